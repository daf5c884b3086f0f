//! Epoch-based Thompson sampling over a finite set of candidate models.
//!
//! Each epoch samples a model from the posterior, plays that model's optimal
//! waiting time once (`k` idle steps, one recommendation) and conditions the
//! posterior on the recommendation's binary reward. Idle steps pay the subsidy
//! and carry no information, so they never touch the posterior.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::planner::{self, PolicyK};
use crate::pomdp::{Action, Arm, ArmParams, Model, DEFAULT_ETA};
use crate::regret::ExperimentConfig;
use crate::rng::RngStream;

/// Posterior (or prior) over a finite model list, stored as normalized log-weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretePrior {
    models: Vec<Model>,
    log_weights: Vec<f64>,
}

/// Cartesian grid of models, `q` outer and `rho` inner.
pub fn grid_models(qs: &[f64], rhos: &[f64]) -> Vec<Model> {
    qs.iter()
        .flat_map(|&q| rhos.iter().map(move |&rho| Model::new(q, rho)))
        .collect()
}

/// `log(sum(exp(xs)))` with max subtraction; `-inf` when every entry is `-inf`.
fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl DiscretePrior {
    pub fn uniform(models: Vec<Model>) -> Result<Self> {
        let n = models.len();
        Self::new(models, vec![1.0; n])
    }

    /// Prior with unnormalized `weights`; every model must lie in the default interior.
    pub fn new(models: Vec<Model>, weights: Vec<f64>) -> Result<Self> {
        Self::with_margin(models, weights, DEFAULT_ETA)
    }

    pub fn with_margin(models: Vec<Model>, weights: Vec<f64>, eta: f64) -> Result<Self> {
        for m in &models {
            ArmParams::with_margin(m.q, m.rho, 0.0, eta)?;
        }
        Self::build(models, weights)
    }

    /// Test-only: models may sit on the boundary of the unit square.
    pub fn degenerate(models: Vec<Model>, weights: Vec<f64>) -> Result<Self> {
        for m in &models {
            ArmParams::degenerate(m.q, m.rho, 0.0)?;
        }
        Self::build(models, weights)
    }

    pub fn point_mass(models: Vec<Model>, index: usize) -> Result<Self> {
        let mut w = vec![0.0; models.len()];
        if index >= w.len() {
            return Err(Error::InvalidPrior(format!("index {index} out of range")));
        }
        w[index] = 1.0;
        Self::new(models, w)
    }

    fn build(models: Vec<Model>, weights: Vec<f64>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::EmptyPrior);
        }
        if weights.len() != models.len() {
            return Err(Error::InvalidPrior(format!(
                "{} weights for {} models",
                weights.len(),
                models.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPrior("weights must be finite and non-negative".into()));
        }
        let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        Self::normalized(models, log_weights)
    }

    fn normalized(models: Vec<Model>, mut log_weights: Vec<f64>) -> Result<Self> {
        let z = log_sum_exp(&log_weights);
        if z == f64::NEG_INFINITY {
            return Err(Error::DegeneratePrior);
        }
        for lw in &mut log_weights {
            *lw -= z;
        }
        Ok(Self { models, log_weights })
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.log_weights[index].exp()
    }

    /// Index of `model` in the list (exact match up to 1e-12).
    pub fn index_of(&self, model: Model) -> Option<usize> {
        self.models
            .iter()
            .position(|m| (m.q - model.q).abs() < 1e-12 && (m.rho - model.rho).abs() < 1e-12)
    }
}

/// Draws a model index with probability equal to its posterior weight.
pub fn sample_model(prior: &DiscretePrior, rng: &mut RngStream) -> Result<(usize, Model)> {
    if prior.is_empty() {
        return Err(Error::EmptyPrior);
    }
    let i = rng.categorical(&prior.weights());
    Ok((i, prior.models[i]))
}

/// Conditions on a recommendation after `k` idle steps returning `reward`.
pub fn bayes_update(prior: &DiscretePrior, k: PolicyK, reward: bool) -> Result<DiscretePrior> {
    let log_weights = prior
        .models
        .iter()
        .zip(&prior.log_weights)
        .map(|(m, lw)| {
            let f = m.success_prob(k.get());
            lw + if reward { f.ln() } else { (1.0 - f).ln() }
        })
        .collect();
    DiscretePrior::normalized(prior.models.clone(), log_weights)
}

/// Waiting time the learner plays for a sampled model: its optimal `k`,
/// clamped to `k_max`.
pub fn policy_for(model: Model, lambda: f64, k_max: u32) -> Result<PolicyK> {
    let params = ArmParams::degenerate(model.q, model.rho, lambda)?;
    let search = k_max.max(planner::DEFAULT_K_MAX);
    let k = planner::k_opt(&params, search)?;
    PolicyK::new(k.get().min(k_max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub model_index: usize,
    pub model: Model,
    pub k: PolicyK,
    /// Reward of the recommendation step.
    pub reward: bool,
    /// 0-based index of the epoch's first step.
    pub start_step: usize,
    /// Rewards of all `k + 1` steps, subsidy steps included.
    pub rewards: Vec<f64>,
}

impl EpochRecord {
    /// 0-based index of the recommendation step.
    pub fn rec_step(&self) -> usize {
        self.start_step + self.k.get() as usize
    }
}

enum EpochOutcome {
    Complete(DiscretePrior, EpochRecord),
    /// Horizon ran out before the recommendation.
    Truncated { k: PolicyK, rewards: Vec<f64> },
}

#[allow(clippy::too_many_arguments)]
fn play_epoch(
    prior: &DiscretePrior,
    arm: &mut Arm,
    rng: &mut RngStream,
    lambda: f64,
    k_max: u32,
    epoch: usize,
    start_step: usize,
    budget: usize,
) -> Result<EpochOutcome> {
    let (model_index, model) = sample_model(prior, rng)?;
    let k = policy_for(model, lambda, k_max)?;
    let idle = k.get() as usize;
    let mut rewards = Vec::with_capacity(idle + 1);
    for _ in 0..idle.min(budget) {
        rewards.push(arm.step(Action::NoRec, rng));
    }
    if budget <= idle {
        return Ok(EpochOutcome::Truncated { k, rewards });
    }
    let r = arm.step(Action::Rec, rng);
    rewards.push(r);
    let reward = r == 1.0;
    let posterior = bayes_update(prior, k, reward)?;
    Ok(EpochOutcome::Complete(
        posterior,
        EpochRecord {
            epoch,
            model_index,
            model,
            k,
            reward,
            start_step,
            rewards,
        },
    ))
}

/// One full epoch against `arm`, which must sit right after a recommendation.
pub fn ts_epoch(
    prior: &DiscretePrior,
    arm: &mut Arm,
    lambda: f64,
    k_max: u32,
    rng: &mut RngStream,
) -> Result<(DiscretePrior, EpochRecord)> {
    match play_epoch(prior, arm, rng, lambda, k_max, 1, 0, usize::MAX)? {
        EpochOutcome::Complete(p, rec) => Ok((p, rec)),
        EpochOutcome::Truncated { .. } => unreachable!("unbounded budget"),
    }
}

/// Complete record of one learner run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsTrace {
    /// Per-step rewards; length equals the horizon.
    pub rewards: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
    /// Posterior mass on the true model after each epoch's update.
    pub posterior_mass_true: Vec<f64>,
    /// Posterior mass on the true model before the first epoch.
    pub prior_mass_true: f64,
    /// Waiting time drawn for an epoch cut off by the horizon, if any.
    pub truncated_k: Option<PolicyK>,
    pub final_posterior: DiscretePrior,
}

/// Runs Thompson sampling for `config.horizon` steps on a fresh arm with the
/// true parameters. Model draws and arm randomness share `rng`.
pub fn run_ts(config: &ExperimentConfig, rng: &mut RngStream) -> Result<TsTrace> {
    config.validate()?;
    let truth = config.truth_params()?;
    let mut prior = config.prior()?;
    let truth_index = prior
        .index_of(truth.model())
        .ok_or_else(|| Error::Config("true model is not in the prior".into()))?;
    let prior_mass_true = prior.weight(truth_index);
    let horizon = config.horizon;
    let mut arm = Arm::new(truth);
    let mut rewards = Vec::with_capacity(horizon);
    let mut epochs = Vec::new();
    let mut mass = Vec::new();
    let mut truncated_k = None;

    while rewards.len() < horizon {
        let start = rewards.len();
        let outcome = play_epoch(
            &prior,
            &mut arm,
            rng,
            config.lambda,
            config.k_max,
            epochs.len() + 1,
            start,
            horizon - start,
        )?;
        match outcome {
            EpochOutcome::Complete(posterior, record) => {
                rewards.extend_from_slice(&record.rewards);
                mass.push(posterior.weight(truth_index));
                epochs.push(record);
                prior = posterior;
            }
            EpochOutcome::Truncated { k, rewards: tail } => {
                rewards.extend(tail);
                truncated_k = Some(k);
            }
        }
    }

    Ok(TsTrace {
        rewards,
        epochs,
        posterior_mass_true: mass,
        prior_mass_true,
        truncated_k,
        final_posterior: prior,
    })
}
