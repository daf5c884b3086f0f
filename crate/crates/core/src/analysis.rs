//! Information-theoretic diagnostics for the learner's regret.
//!
//! All divergences are in nats. Base-2 quantities are converted where they
//! are reported (`delta2 = delta / ln 2`), with the nats counterpart kept
//! alongside.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::learner::policy_for;
use crate::planner::PolicyK;
use crate::pomdp::Model;

fn unit(name: &'static str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParam {
            name,
            value: x,
            reason: "must lie in [0, 1]".into(),
        });
    }
    Ok(())
}

// ln(x / y) for probabilities given with their complements
fn log_ratio(x: f64, cx: f64, y: f64, cy: f64) -> f64 {
    if x <= 0.5 || y <= 0.5 {
        x.ln() - y.ln()
    } else {
        (-cx).ln_1p() - (-cy).ln_1p()
    }
}

fn kl_term(x: f64, cx: f64, y: f64, cy: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * log_ratio(x, cx, y, cy)
    }
}

fn kl_with_complements(p: f64, cp: f64, q: f64, cq: f64) -> f64 {
    let d = kl_term(p, cp, q, cq) + kl_term(cp, p, cq, q);
    // rounding can leave a tiny negative value when p == q
    d.max(0.0)
}

/// `D(p || q)` between Bernoulli distributions, natural log.
///
/// Uses `0 ln 0 = 0`; infinite when `q` puts zero mass where `p` does not.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    unit("p", p)?;
    unit("q", q)?;
    Ok(kl_with_complements(p, 1.0 - p, q, 1.0 - q))
}

/// `D(f(truth,k) || f(model,k))`, keeping precision when both are close to 1.
pub fn kl_success(truth: Model, model: Model, k: u32) -> f64 {
    kl_with_complements(
        truth.success_prob(k),
        truth.failure_prob(k),
        model.success_prob(k),
        model.failure_prob(k),
    )
}

/// `[(1-q)^k (rho-1) - (1-q*)^k (rho*-1)]^2`, the squared gap between the
/// epoch success probabilities of `model` and `truth` at waiting time `k`.
pub fn d_k_distance(model: Model, truth: Model, k: u32) -> f64 {
    let a = (1.0 - model.q).powi(k as i32) * (model.rho - 1.0);
    let b = (1.0 - truth.q).powi(k as i32) * (truth.rho - 1.0);
    (a - b) * (a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinskerCheck {
    /// `D(f(truth,k) || f(model,k))` in nats.
    pub kl: f64,
    /// `2 d_k`, the variation-distance lower bound in nats.
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Checks `D(f* || f) >= 2 (f* - f)^2`.
pub fn pinsker_check(model: Model, truth: Model, k: u32) -> Result<PinskerCheck> {
    let kl = kl_success(truth, model, k);
    let bound = 2.0 * d_k_distance(model, truth, k);
    Ok(PinskerCheck {
        kl,
        bound,
        slack: kl - bound,
        holds: kl >= bound,
    })
}

/// Grid models grouped by the waiting time they would make the learner play.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRegions {
    pub models: Vec<Model>,
    pub truth_index: usize,
    pub k_star: PolicyK,
    pub epsilon: f64,
    /// `k -> S_k` (indices into `models`).
    pub regions: BTreeMap<u32, Vec<usize>>,
    /// `k -> S'_k`: models in a suboptimal `S_k` whose KL from the truth at `k*` is at most `epsilon`.
    pub near: BTreeMap<u32, Vec<usize>>,
    /// `k -> S''_k`: the rest of each suboptimal `S_k`.
    pub far: BTreeMap<u32, Vec<usize>>,
    /// `D(f(truth,k*) || f(model,k*))` per model.
    pub kl_at_k_star: Vec<f64>,
    /// Waiting time per model.
    pub policy: Vec<PolicyK>,
}

impl DecisionRegions {
    pub fn region_of(&self, index: usize) -> PolicyK {
        self.policy[index]
    }
}

pub fn decision_regions(
    models: &[Model],
    lambda: f64,
    k_max: u32,
    epsilon: f64,
    truth: Model,
) -> Result<DecisionRegions> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParam {
            name: "epsilon",
            value: epsilon,
            reason: "must be non-negative".into(),
        });
    }
    let truth_index = models
        .iter()
        .position(|m| (m.q - truth.q).abs() < 1e-12 && (m.rho - truth.rho).abs() < 1e-12)
        .ok_or_else(|| Error::Config("true model must lie on the grid".into()))?;
    let k_star = policy_for(truth, lambda, k_max)?;

    let policy = models
        .iter()
        .map(|&m| policy_for(m, lambda, k_max))
        .collect::<Result<Vec<_>>>()?;
    let kl_at_k_star = models
        .iter()
        .map(|&m| kl_success(truth, m, k_star.get()))
        .collect::<Vec<_>>();

    let mut regions: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut near: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut far: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, k) in policy.iter().enumerate() {
        let k = k.get();
        regions.entry(k).or_default().push(i);
        if k != k_star.get() {
            let split = if kl_at_k_star[i] <= epsilon { &mut near } else { &mut far };
            split.entry(k).or_default().push(i);
        }
    }

    Ok(DecisionRegions {
        models: models.to_vec(),
        truth_index,
        k_star,
        epsilon,
        regions,
        near,
        far,
        kl_at_k_star,
        policy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSeparation {
    pub model: Model,
    /// `d_1 .. d_{k_max}`.
    pub d: Vec<f64>,
    /// Number of `k` with `d_k >= delta`.
    pub separated: usize,
    /// Number of `k` with `d_k <= epsilon` (near-confounding waiting times).
    pub confounders: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub truth: Model,
    pub epsilon1: f64,
    pub k_max: u32,
    pub delta: f64,
    /// Waiting time attaining `delta`.
    pub delta_argmin_k: u32,
    /// `delta / ln 2`.
    pub delta2: f64,
    /// `2 delta`, the same separation expressed as a KL lower bound in nats.
    pub delta2_nats: f64,
    /// Confounder threshold, `delta2 / 2`.
    pub epsilon: f64,
    /// Smallest `separated` count over models outside the neighborhood, capped at `k_max - 1`.
    pub kappa: usize,
    /// Largest `confounders` count over models outside the neighborhood.
    pub max_confounders: usize,
    /// Models with `max(|q - q*|, |rho - rho*|) >= epsilon1`.
    pub outside: Vec<ModelSeparation>,
}

/// Worst-case separation of models at least `epsilon1` away from `truth`.
///
/// `delta = min_k [(1-q*+epsilon1)^k (rho*+epsilon1-1) - (1-q*)^k (rho*-1)]^2`
/// over `k = 1..=k_max`. Requires `0 < epsilon1 < q*` (and `rho* + epsilon1 < 1`)
/// so both shifted probabilities stay inside the unit interval.
pub fn separation_report(truth: Model, epsilon1: f64, k_max: u32, models: &[Model]) -> Result<SeparationReport> {
    if k_max == 0 {
        return Err(Error::InvalidK(0));
    }
    if !(epsilon1 > 0.0) {
        return Err(Error::InvalidParam {
            name: "epsilon1",
            value: epsilon1,
            reason: "must be positive".into(),
        });
    }
    if epsilon1 >= truth.q {
        return Err(Error::InvalidParam {
            name: "epsilon1",
            value: epsilon1,
            reason: format!("must be below q* = {} so that 1 - q* + epsilon1 < 1", truth.q),
        });
    }
    if truth.rho + epsilon1 >= 1.0 {
        return Err(Error::InvalidParam {
            name: "epsilon1",
            value: epsilon1,
            reason: format!("rho* + epsilon1 must stay below 1 (rho* = {})", truth.rho),
        });
    }

    let q_bar = 1.0 - truth.q;
    let (delta_argmin_k, delta) = (1..=k_max)
        .map(|k| {
            let ki = k as i32;
            let gap = (q_bar + epsilon1).powi(ki) * (truth.rho + epsilon1 - 1.0) - q_bar.powi(ki) * (truth.rho - 1.0);
            (k, gap * gap)
        })
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    let delta2 = delta / LN_2;
    let epsilon = delta2 / 2.0;

    let outside: Vec<ModelSeparation> = models
        .iter()
        .filter(|m| (m.q - truth.q).abs().max((m.rho - truth.rho).abs()) >= epsilon1)
        .map(|&m| {
            let d: Vec<f64> = (1..=k_max).map(|k| d_k_distance(m, truth, k)).collect();
            ModelSeparation {
                model: m,
                separated: d.iter().filter(|&&x| x >= delta).count(),
                confounders: d.iter().filter(|&&x| x <= epsilon).count(),
                d,
            }
        })
        .collect();
    let cap = (k_max as usize).saturating_sub(1).max(1);
    let kappa = outside.iter().map(|s| s.separated).min().unwrap_or(cap).min(cap);
    let max_confounders = outside.iter().map(|s| s.confounders).max().unwrap_or(0);

    Ok(SeparationReport {
        truth,
        epsilon1,
        k_max,
        delta,
        delta_argmin_k,
        delta2,
        delta2_nats: 2.0 * delta,
        epsilon,
        kappa,
        max_confounders,
        outside,
    })
}

/// Models that are near the truth at `k*` (KL at most `epsilon`), lie outside
/// the `epsilon1` neighborhood, and yet have KL below `delta` at their own
/// waiting time. Empty when the KL lower bound holds.
pub fn kl_lower_bound_violations(regions: &DecisionRegions, truth: Model, epsilon1: f64, delta: f64) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, m) in regions.models.iter().enumerate() {
        let far_from_truth = (m.q - truth.q).abs().max((m.rho - truth.rho).abs()) >= epsilon1;
        if i == regions.truth_index || !far_from_truth || regions.kl_at_k_star[i] > regions.epsilon {
            continue;
        }
        let k = regions.policy[i].get();
        if k == regions.k_star.get() {
            continue;
        }
        let kl = kl_success(truth, *m, k);
        if kl < delta {
            out.push(i);
        }
    }
    Ok(out)
}

/// Closed-form bound `(1/delta2) * 2(1+epsilon)/(1-epsilon) * ln L` on the
/// log-growth constant of the modified regret.
pub fn regret_constant_bound(delta2: f64, epsilon: f64, epochs: f64) -> Result<f64> {
    if !(delta2 > 0.0 && delta2.is_finite()) {
        return Err(Error::InvalidParam {
            name: "delta2",
            value: delta2,
            reason: "must be positive".into(),
        });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParam {
            name: "epsilon",
            value: epsilon,
            reason: "must lie in (0, 1)".into(),
        });
    }
    if !(epochs >= 2.0) {
        return Err(Error::InvalidParam {
            name: "L",
            value: epochs,
            reason: "must be at least 2".into(),
        });
    }
    Ok((1.0 / delta2) * (2.0 * (1.0 + epsilon) / (1.0 - epsilon)) * epochs.ln())
}
