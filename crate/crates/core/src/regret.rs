//! Experiment harness: the learner and the optimal cyclic policy run on
//! independent arm instances, and their reward gap is tracked per step.
//!
//! Run `r` draws learner randomness from stream `(seed, 2r)` and oracle
//! randomness from `(seed, 2r + 1)`, so every run is reproducible on its own
//! and results do not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{self, grid_models, DiscretePrior};
use crate::planner::{self, PolicyK};
use crate::pomdp::{Action, Arm, ArmParams, Model, DEFAULT_ETA};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub q: Vec<f64>,
    pub rho: Vec<f64>,
}

impl GridSpec {
    /// Same value list on both axes.
    pub fn square(values: &[f64]) -> Self {
        Self {
            q: values.to_vec(),
            rho: values.to_vec(),
        }
    }

    /// The coarse 5x5 grid `0.05, 0.15, ..., 0.45`.
    pub fn coarse() -> Self {
        Self::square(&[0.05, 0.15, 0.25, 0.35, 0.45])
    }

    /// The fine 10x10 grid `0.05, 0.10, ..., 0.50`.
    pub fn fine() -> Self {
        let v: Vec<f64> = (1..=10).map(|i| (i as f64 * 0.05 * 100.0).round() / 100.0).collect();
        Self::square(&v)
    }

    pub fn models(&self) -> Vec<Model> {
        grid_models(&self.q, &self.rho)
    }
}

fn default_k_max() -> u32 {
    planner::DEFAULT_K_MAX
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

/// Everything needed to reproduce one multi-run experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub true_model: Model,
    pub lambda: f64,
    pub grid: GridSpec,
    /// Unnormalized prior weights over the grid (`q` outer, `rho` inner); uniform when absent.
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
    pub horizon: usize,
    pub runs: usize,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

impl ExperimentConfig {
    /// Uniform prior on `grid`, lambda 0.3, horizon 10^4, 300 runs.
    pub fn standard(true_model: Model, grid: GridSpec) -> Self {
        Self {
            true_model,
            lambda: 0.3,
            grid,
            prior: None,
            horizon: 10_000,
            runs: 300,
            k_max: planner::DEFAULT_K_MAX,
            seed: 0,
            output_dir: None,
            workers: None,
            eta: DEFAULT_ETA,
        }
    }

    pub fn truth_params(&self) -> Result<ArmParams> {
        ArmParams::with_margin(self.true_model.q, self.true_model.rho, self.lambda, self.eta)
    }

    pub fn prior(&self) -> Result<DiscretePrior> {
        let models = self.grid.models();
        let weights = self.prior.clone().unwrap_or_else(|| vec![1.0; models.len()]);
        DiscretePrior::with_margin(models, weights, self.eta)
    }

    /// Optimal waiting time of the true model.
    pub fn k_star(&self) -> Result<PolicyK> {
        let search = self.k_max.max(planner::DEFAULT_K_MAX);
        planner::k_opt(&self.truth_params()?, search)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let truth = self.truth_params()?;
        let prior = self.prior()?;
        let idx = prior
            .index_of(truth.model())
            .ok_or_else(|| Error::Config("true model must lie on the grid".into()))?;
        if prior.weight(idx) <= 0.0 {
            return Err(Error::Config("prior must put positive mass on the true model".into()));
        }
        let k_star = self.k_star()?;
        if k_star.get() > self.k_max {
            return Err(Error::Config(format!(
                "optimal waiting time {k_star} of the true model exceeds k_max = {}",
                self.k_max
            )));
        }
        Ok(())
    }
}

/// Cumulative reward of the `k`-cyclic policy over `horizon` steps from state `Low`.
pub fn run_cyclic(params: &ArmParams, k: PolicyK, horizon: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut arm = Arm::new(*params);
    let period = k.cycle_len();
    let mut total = 0.0;
    (0..horizon)
        .map(|t| {
            let action = if t % period == period - 1 { Action::Rec } else { Action::NoRec };
            total += arm.step(action, rng);
            total
        })
        .collect()
}

/// Cumulative reward of the optimal cyclic policy on its own arm instance.
pub fn run_oracle(params: &ArmParams, horizon: usize, rng: &mut RngStream) -> Vec<f64> {
    let k = planner::k_opt(params, planner::DEFAULT_K_MAX).expect("default k_max >= 1");
    run_cyclic(params, k, horizon, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    /// Steps completed when the epoch's recommendation was made (1-based).
    pub t_of_rec: usize,
    pub k: PolicyK,
    pub suboptimal: bool,
    pub posterior_mass_true: f64,
}

/// Per-run regret record. Index `t - 1` of the step vectors holds the value
/// after `t` steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretTrace {
    pub run_id: usize,
    pub k_star: PolicyK,
    pub learner_cum: Vec<f64>,
    pub oracle_cum: Vec<f64>,
    pub regret: Vec<f64>,
    /// Posterior mass on the true model after `t` steps (last update at or before `t`).
    pub posterior_mass: Vec<f64>,
    pub epochs: Vec<EpochSummary>,
    /// `play_counts[k]` = completed epochs that played waiting time `k`.
    pub play_counts: Vec<usize>,
}

impl RegretTrace {
    pub fn horizon(&self) -> usize {
        self.regret.len()
    }

    /// Number of completed epochs whose waiting time differed from `k_star`.
    pub fn modified_regret(&self) -> usize {
        self.epochs.iter().filter(|e| e.suboptimal).count()
    }

    /// Modified regret after each epoch.
    pub fn modified_regret_curve(&self) -> Vec<usize> {
        self.epochs
            .iter()
            .scan(0, |acc, e| {
                *acc += e.suboptimal as usize;
                Some(*acc)
            })
            .collect()
    }

    pub fn final_regret(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }
}

/// Number of epochs whose waiting time differs from `k_star`.
pub fn modified_regret(ks: &[PolicyK], k_star: PolicyK) -> usize {
    ks.iter().filter(|&&k| k != k_star).count()
}

fn cumulative(xs: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    xs.iter()
        .map(|x| {
            total += x;
            total
        })
        .collect()
}

/// One run of the experiment: learner on stream `(seed, 2r)`, oracle on `(seed, 2r + 1)`.
pub fn run_single(config: &ExperimentConfig, run_id: usize) -> Result<RegretTrace> {
    let truth = config.truth_params()?;
    let k_star = config.k_star()?;
    let mut learner_rng = RngStream::new(config.seed, 2 * run_id as u64);
    let mut oracle_rng = RngStream::new(config.seed, 2 * run_id as u64 + 1);

    let ts = learner::run_ts(config, &mut learner_rng)?;
    let oracle_cum = run_cyclic(&truth, k_star, config.horizon, &mut oracle_rng);
    let learner_cum = cumulative(&ts.rewards);
    let regret = oracle_cum.iter().zip(&learner_cum).map(|(o, l)| o - l).collect();

    let mut play_counts = vec![0usize; config.k_max as usize + 1];
    let mut posterior_mass = Vec::with_capacity(config.horizon);
    let mut current = ts.prior_mass_true;
    let mut epochs = Vec::with_capacity(ts.epochs.len());
    let mut updates = ts.epochs.iter().zip(&ts.posterior_mass_true).peekable();
    for t in 1..=config.horizon {
        while let Some((rec, &m)) = updates.peek() {
            if rec.rec_step() + 1 > t {
                break;
            }
            current = m;
            play_counts[rec.k.get() as usize] += 1;
            epochs.push(EpochSummary {
                epoch: rec.epoch,
                t_of_rec: rec.rec_step() + 1,
                k: rec.k,
                suboptimal: rec.k != k_star,
                posterior_mass_true: m,
            });
            updates.next();
        }
        posterior_mass.push(current);
    }

    Ok(RegretTrace {
        run_id,
        k_star,
        learner_cum,
        oracle_cum,
        regret,
        posterior_mass,
        epochs,
        play_counts,
    })
}

/// Runs every configured run, in parallel on `config.workers` threads.
/// Output order is by run id regardless of completion order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RegretTrace>> {
    config.validate()?;
    let job = || -> Result<Vec<RegretTrace>> {
        (0..config.runs)
            .into_par_iter()
            .map(|r| run_single(config, r))
            .collect()
    };
    match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStat {
    pub t: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_posterior_mass_true: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub mean_modified_regret: f64,
    pub std_modified_regret: f64,
    pub mean_posterior_mass_true: f64,
}

/// Pointwise statistics across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub steps: Vec<StepStat>,
    /// Up to the smallest number of completed epochs among the runs.
    pub epochs: Vec<EpochStat>,
}

/// Mean and sample standard deviation. Values are summed in sorted order so
/// the result does not depend on the order of the inputs.
fn mean_std(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / (n - 1.0)).sqrt())
}

pub fn aggregate_runs(traces: &[RegretTrace]) -> Result<Aggregate> {
    let first = traces.first().ok_or(Error::NoTraces)?;
    let horizon = first.horizon();
    if let Some(bad) = traces.iter().find(|t| t.horizon() != horizon) {
        return Err(Error::HorizonMismatch(horizon, bad.horizon()));
    }

    let mut col = vec![0.0; traces.len()];
    let mut steps = Vec::with_capacity(horizon);
    for i in 0..horizon {
        col.iter_mut().zip(traces).for_each(|(c, t)| *c = t.regret[i]);
        let (mean_regret, std_regret) = mean_std(&mut col);
        col.iter_mut().zip(traces).for_each(|(c, t)| *c = t.posterior_mass[i]);
        let (mean_mass, _) = mean_std(&mut col);
        steps.push(StepStat {
            t: i + 1,
            mean_regret,
            std_regret,
            mean_posterior_mass_true: mean_mass,
        });
    }

    let curves: Vec<Vec<usize>> = traces.iter().map(RegretTrace::modified_regret_curve).collect();
    let min_epochs = curves.iter().map(Vec::len).min().unwrap_or(0);
    let epochs = (0..min_epochs)
        .map(|l| {
            let mut mr: Vec<f64> = curves.iter().map(|c| c[l] as f64).collect();
            let (mean, std) = mean_std(&mut mr);
            let mut mass: Vec<f64> = traces.iter().map(|t| t.epochs[l].posterior_mass_true).collect();
            let (mean_mass, _) = mean_std(&mut mass);
            EpochStat {
                epoch: l + 1,
                mean_modified_regret: mean,
                std_modified_regret: std,
                mean_posterior_mass_true: mean_mass,
            }
        })
        .collect();

    Ok(Aggregate {
        runs: traces.len(),
        steps,
        epochs,
    })
}
