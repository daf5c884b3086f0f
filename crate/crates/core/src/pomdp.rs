//! The single-arm POMDP: hidden two-state interest, action-dependent
//! transitions and Bernoulli rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Default margin `eta`: production parameters must lie in `[eta, 1 - eta]`.
pub const DEFAULT_ETA: f64 = 0.01;

/// Hidden interest level of the user for an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArmState {
    Low = 0,
    High = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    NoRec = 0,
    Rec = 1,
}

/// A candidate user model `(q, rho)` without the subsidy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub q: f64,
    pub rho: f64,
}

impl Model {
    pub fn new(q: f64, rho: f64) -> Self {
        Self { q, rho }
    }

    /// Probability that a recommendation issued after exactly `k` idle steps
    /// (starting from `Low`) earns a unit reward:
    /// `(1-q)^k * rho + 1 - (1-q)^k`.
    ///
    /// No validation; callers that need the `k >= 1` contract go through
    /// [`success_prob`].
    pub fn success_prob(&self, k: u32) -> f64 {
        let stay_low = (1.0 - self.q).powi(k as i32);
        stay_low * self.rho + (1.0 - stay_low)
    }

    /// `1 - f(q, rho, k)`, computed directly so it keeps precision when `f` is close to 1.
    pub fn failure_prob(&self, k: u32) -> f64 {
        (1.0 - self.q).powi(k as i32) * (1.0 - self.rho)
    }

    pub fn with_lambda(self, lambda: f64) -> Result<ArmParams> {
        ArmParams::new(self.q, self.rho, lambda)
    }
}

/// Model parameters together with the subsidy `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmParams {
    q: f64,
    rho: f64,
    lambda: f64,
    #[serde(default)]
    degenerate: bool,
}

fn check_unit(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(Error::InvalidParam {
            name,
            value,
            reason: format!("must lie in [{lo}, {hi}]"),
        });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParam {
            name: "lambda",
            value: lambda,
            reason: "must lie in [0, 1)".into(),
        });
    }
    Ok(())
}

impl ArmParams {
    /// Parameters in the default interior `[0.01, 0.99]`.
    pub fn new(q: f64, rho: f64, lambda: f64) -> Result<Self> {
        Self::with_margin(q, rho, lambda, DEFAULT_ETA)
    }

    /// Parameters restricted to `[eta, 1 - eta]`, `0 < eta < 1/2`.
    pub fn with_margin(q: f64, rho: f64, lambda: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::InvalidParam {
                name: "eta",
                value: eta,
                reason: "must lie in (0, 1/2)".into(),
            });
        }
        check_unit("q", q, eta, 1.0 - eta)?;
        check_unit("rho", rho, eta, 1.0 - eta)?;
        check_lambda(lambda)?;
        Ok(Self {
            q,
            rho,
            lambda,
            degenerate: false,
        })
    }

    /// Test-only mode: `q` and `rho` may sit on `{0, 1}` and `k = 0` is accepted.
    pub fn degenerate(q: f64, rho: f64, lambda: f64) -> Result<Self> {
        check_unit("q", q, 0.0, 1.0)?;
        check_unit("rho", rho, 0.0, 1.0)?;
        check_lambda(lambda)?;
        Ok(Self {
            q,
            rho,
            lambda,
            degenerate: true,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn model(&self) -> Model {
        Model::new(self.q, self.rho)
    }
}

/// Belief that the hidden state is `Low`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Belief(f64);

impl Belief {
    /// The belief right after a recommendation.
    pub const RESET: Belief = Belief(1.0);

    pub fn new(pi: f64) -> Result<Self> {
        check_unit("pi", pi, 0.0, 1.0)?;
        Ok(Self(pi))
    }

    pub fn pi(&self) -> f64 {
        self.0
    }
}

/// One step of the hidden chain.
pub fn transition(state: ArmState, action: Action, params: &ArmParams, rng: &mut RngStream) -> ArmState {
    match (action, state) {
        (Action::Rec, _) => ArmState::Low,
        (Action::NoRec, ArmState::High) => ArmState::High,
        (Action::NoRec, ArmState::Low) => {
            if rng.bernoulli(params.q) {
                ArmState::High
            } else {
                ArmState::Low
            }
        }
    }
}

/// Reward for playing `action` while the hidden state is `state`.
pub fn sample_reward(state: ArmState, action: Action, params: &ArmParams, rng: &mut RngStream) -> f64 {
    match (action, state) {
        (Action::NoRec, _) => params.lambda,
        (Action::Rec, ArmState::High) => 1.0,
        (Action::Rec, ArmState::Low) => {
            if rng.bernoulli(params.rho) {
                1.0
            } else {
                0.0
            }
        }
    }
}

pub fn update_belief(belief: Belief, action: Action, params: &ArmParams) -> Belief {
    match action {
        Action::Rec => Belief::RESET,
        Action::NoRec => Belief((1.0 - params.q) * belief.0),
    }
}

/// Epoch success probability `f(q, rho, k)`; `k = 0` only in degenerate mode.
pub fn success_prob(params: &ArmParams, k: u32) -> Result<f64> {
    if k == 0 && !params.degenerate {
        return Err(Error::InvalidK(k));
    }
    Ok(params.model().success_prob(k))
}

/// A live arm instance. Starts in `Low`, the state every recommendation leaves behind.
#[derive(Debug, Clone)]
pub struct Arm {
    params: ArmParams,
    state: ArmState,
}

impl Arm {
    pub fn new(params: ArmParams) -> Self {
        Self {
            params,
            state: ArmState::Low,
        }
    }

    pub fn params(&self) -> &ArmParams {
        &self.params
    }

    pub fn state(&self) -> ArmState {
        self.state
    }

    /// Plays `action`: draws the reward from the current state, then moves the chain.
    pub fn step(&mut self, action: Action, rng: &mut RngStream) -> f64 {
        let reward = sample_reward(self.state, action, &self.params, rng);
        self.state = transition(self.state, action, &self.params, rng);
        reward
    }
}
