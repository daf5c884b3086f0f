//! CSV and JSON outputs of `simulate` and `analyze`.
//!
//! Column layouts are fixed per [`SCHEMA_VERSION`]; `manifest.json` records
//! the version next to the files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use hmbandit_core::analysis::{DecisionRegions, SeparationReport};
use hmbandit_core::regret::{Aggregate, ExperimentConfig, RegretTrace};
use serde::Serialize;

use crate::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const STEPS_HEADER: [&str; 5] = ["run_id", "t", "learner_cum_reward", "oracle_cum_reward", "regret"];
pub const EPOCHS_HEADER: [&str; 6] = ["run_id", "epoch", "t_of_rec", "k", "suboptimal", "posterior_mass_true"];
pub const AGG_HEADER: [&str; 4] = ["t", "mean_regret", "std_regret", "mean_posterior_mass_true"];
pub const REGIONS_HEADER: [&str; 6] = ["q", "rho", "k", "region", "kl_at_k_star", "confounders"];

/// Decimal rendering with 9 significant digits (no exponent).
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit (9.99999999e2 -> 1000.00000); harmless
    if s == "-0" || s.chars().all(|c| c == '-' || c == '0' || c == '.') {
        return "0".into();
    }
    s
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_steps(path: &Path, traces: &[RegretTrace]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(STEPS_HEADER)?;
    for tr in traces {
        for t in 0..tr.horizon() {
            w.write_record([
                tr.run_id.to_string(),
                (t + 1).to_string(),
                fmt_sig9(tr.learner_cum[t]),
                fmt_sig9(tr.oracle_cum[t]),
                fmt_sig9(tr.regret[t]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_epochs(path: &Path, traces: &[RegretTrace]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EPOCHS_HEADER)?;
    for tr in traces {
        for e in &tr.epochs {
            w.write_record([
                tr.run_id.to_string(),
                e.epoch.to_string(),
                e.t_of_rec.to_string(),
                e.k.to_string(),
                (e.suboptimal as u8).to_string(),
                fmt_sig9(e.posterior_mass_true),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_agg(path: &Path, agg: &Aggregate) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(AGG_HEADER)?;
    for s in &agg.steps {
        w.write_record([
            s.t.to_string(),
            fmt_sig9(s.mean_regret),
            fmt_sig9(s.std_regret),
            fmt_sig9(s.mean_posterior_mass_true),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_regions(path: &Path, regions: &DecisionRegions, report: &SeparationReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(REGIONS_HEADER)?;
    let k_star = regions.k_star.get();
    for (i, m) in regions.models.iter().enumerate() {
        let k = regions.policy[i].get();
        let region = if k == k_star {
            "optimal"
        } else if regions.near.get(&k).is_some_and(|s| s.contains(&i)) {
            "near"
        } else {
            "far"
        };
        let confounders = report
            .outside
            .iter()
            .find(|s| s.model == *m)
            .map_or_else(String::new, |s| s.confounders.to_string());
        w.write_record([
            fmt_sig9(m.q),
            fmt_sig9(m.rho),
            k.to_string(),
            region.to_string(),
            fmt_sig9(regions.kl_at_k_star[i]),
            confounders,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    f.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub schema_version: u32,
    pub files: Vec<&'a str>,
    pub config: &'a ExperimentConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1.00000000");
        assert_eq!(fmt_sig9(0.322813390506), "0.322813391");
        assert_eq!(fmt_sig9(6500.0), "6500.00000");
        assert_eq!(fmt_sig9(-12.5), "-12.5000000");
        assert_eq!(fmt_sig9(1.234e-5), "0.0000123400000");
        assert_eq!(fmt_sig9(123456789012.0), "123456789012");
    }
}
