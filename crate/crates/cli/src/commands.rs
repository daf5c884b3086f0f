use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hmbandit_core::analysis::{decision_regions, separation_report};
use hmbandit_core::planner::{self, ViOptions};
use hmbandit_core::regret::{aggregate_runs, run_experiment, ExperimentConfig};
use hmbandit_core::ArmParams;

use crate::output::{self, Manifest, SCHEMA_VERSION};
use crate::svg::{self, PlotKind};
use crate::{config, CliError, Result};

/// Worker-count override for `simulate`.
pub const WORKERS_ENV: &str = "HMBANDIT_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "hmbandit", version, about = "Recommendation-fatigue POMDP planner and Thompson-sampling lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal waiting time, cycle values and belief threshold for known parameters.
    Plan(PlanArgs),
    /// Run the learner against the optimal policy and write CSV traces.
    Simulate(SimulateArgs),
    /// Decision regions and separation diagnostics for a config's grid.
    Analyze(AnalyzeArgs),
    /// Render an aggregate CSV as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    #[arg(long, default_value_t = planner::DEFAULT_K_MAX)]
    pub kmax: u32,
    /// Discount used for the belief-grid threshold.
    #[arg(long, default_value_t = 0.999)]
    pub beta: f64,
    #[arg(long, default_value_t = planner::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `key=value` override applied after the file is read (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        config::load(&self.config, &overrides)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Neighborhood radius around the true model.
    #[arg(long, default_value_t = 0.02)]
    pub epsilon1: f64,
    /// Largest waiting time in the separation scan.
    #[arg(long, default_value_t = 10)]
    pub sep_kmax: u32,
    /// KL threshold splitting the decision regions (default: half the separation).
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Log-scaled time axis.
    #[arg(long)]
    pub logx: bool,
}

pub fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Plan(a) => plan(&a, out),
        Command::Simulate(a) => simulate(&a, out),
        Command::Analyze(a) => analyze(&a, out),
        Command::Plot(a) => {
            svg::render_svg(&a.csv, a.kind, &a.out, a.logx)?;
            writeln!(out, "wrote {}", a.out.display())?;
            Ok(())
        }
    }
}

fn plan(a: &PlanArgs, out: &mut dyn Write) -> Result<()> {
    let params = ArmParams::new(a.q, a.rho, a.lambda)?;
    let k = planner::k_opt(&params, a.kmax)?;
    let table = planner::value_iteration_with(
        &params,
        a.beta,
        ViOptions {
            grid_size: a.grid_size,
            ..ViOptions::default()
        },
    )
    .map_err(|e| match e {
        hmbandit_core::Error::NonConvergence { .. } => CliError::Runtime(e.to_string()),
        other => other.into(),
    })?;

    writeln!(out, "k_opt = {k}")?;
    writeln!(out, "average reward = {}", output::fmt_sig9(planner::cycle_value_avg(&params, k).value))?;
    match table.threshold {
        Some(pi) => writeln!(out, "threshold pi_T = {} (beta = {})", output::fmt_sig9(pi.pi()), a.beta)?,
        None => writeln!(out, "threshold pi_T = none (beta = {})", a.beta)?,
    }
    writeln!(out, "gain (1-beta) V(1) = {}", output::fmt_sig9(planner::average_gain(&table)))?;
    writeln!(out, "k\tV(k)")?;
    for cv in planner::cycle_table(&params, a.kmax) {
        writeln!(out, "{}\t{}", cv.k, output::fmt_sig9(cv.value))?;
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = a.config.load()?;
    let env_workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(
            v.parse::<usize>()
                .map_err(|_| CliError::Config(format!("{WORKERS_ENV}={v} is not a worker count")))?,
        ),
        Err(_) => None,
    };
    if let Some(w) = a.workers.or(env_workers) {
        cfg.workers = Some(w);
    }
    cfg.validate()?;
    let dir = a.config.out_dir(&cfg);
    ensure_dir(&dir)?;

    let traces = run_experiment(&cfg)?;
    let agg = aggregate_runs(&traces)?;
    output::write_steps(&dir.join("steps.csv"), &traces)?;
    output::write_epochs(&dir.join("epochs.csv"), &traces)?;
    output::write_agg(&dir.join("agg.csv"), &agg)?;
    // the worker count does not affect results; keep it out of the manifest
    let mut recorded = cfg.clone();
    recorded.workers = None;
    recorded.output_dir = None;
    output::write_json(
        &dir.join("manifest.json"),
        &Manifest {
            schema_version: SCHEMA_VERSION,
            files: vec!["steps.csv", "epochs.csv", "agg.csv"],
            config: &recorded,
        },
    )?;

    let last = agg.steps.last().expect("horizon >= 1");
    let mean_mr = traces.iter().map(|t| t.modified_regret() as f64).sum::<f64>() / traces.len() as f64;
    writeln!(out, "runs = {}, horizon = {}", cfg.runs, cfg.horizon)?;
    writeln!(out, "mean regret at T = {}", output::fmt_sig9(last.mean_regret))?;
    writeln!(out, "mean posterior mass on truth at T = {}", output::fmt_sig9(last.mean_posterior_mass_true))?;
    writeln!(out, "mean modified regret = {}", output::fmt_sig9(mean_mr))?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

fn analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.config.load()?;
    let models = cfg.grid.models();
    let report = separation_report(cfg.true_model, a.epsilon1, a.sep_kmax, &models)?;
    let epsilon = a.epsilon.unwrap_or(report.epsilon);
    let regions = decision_regions(&models, cfg.lambda, cfg.k_max, epsilon, cfg.true_model)?;
    let dir = a.config.out_dir(&cfg);
    ensure_dir(&dir)?;
    output::write_json(&dir.join("separation.json"), &report)?;
    output::write_regions(&dir.join("regions.csv"), &regions, &report)?;

    writeln!(out, "k* = {}", regions.k_star)?;
    writeln!(out, "delta = {} (at k = {})", output::fmt_sig9(report.delta), report.delta_argmin_k)?;
    writeln!(out, "delta2 = {}", output::fmt_sig9(report.delta2))?;
    writeln!(out, "kappa = {}", report.kappa)?;
    writeln!(out, "max confounders = {}", report.max_confounders)?;
    for (k, s) in &regions.regions {
        writeln!(out, "S_{k}: {} models", s.len())?;
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}
