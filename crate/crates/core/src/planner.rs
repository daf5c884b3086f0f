//! Optimal policies for a known arm.
//!
//! Because a recommendation resets the belief to 1 and idling shrinks it
//! geometrically, a single-threshold policy is the same thing as a cyclic one:
//! idle `k` steps, recommend once, repeat. This module scores those cycles in
//! closed form and, independently, solves the discounted Bellman equation on a
//! belief grid so the two routes can be checked against each other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{Action, ArmParams, Belief};

pub const DEFAULT_K_MAX: u32 = 50;
pub const DEFAULT_GRID_SIZE: usize = 1024;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 1_000_000;

/// Waiting-time policy: `k` idle steps, then one recommendation (cycle length `k + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PolicyK(u32);

impl PolicyK {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidK(k));
        }
        Ok(Self(k))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn cycle_len(self) -> usize {
        self.0 as usize + 1
    }
}

impl std::fmt::Display for PolicyK {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleValue {
    pub k: PolicyK,
    pub value: f64,
}

/// Long-run average reward of the `k`-cyclic policy: `(lambda*k + f(q,rho,k)) / (k+1)`.
pub fn cycle_value_avg(params: &ArmParams, k: PolicyK) -> CycleValue {
    let kf = k.get() as f64;
    let f = params.model().success_prob(k.get());
    CycleValue {
        k,
        value: (params.lambda() * kf + f) / (kf + 1.0),
    }
}

/// Total discounted reward of the `k`-cyclic policy started right after a
/// recommendation: one cycle's discounted reward `C_k` summed geometrically
/// over cycles.
pub fn cycle_value_discounted(params: &ArmParams, k: PolicyK, beta: f64) -> Result<CycleValue> {
    check_beta(beta, true)?;
    let kk = k.get() as i32;
    let bk = beta.powi(kk);
    let subsidy = if beta == 0.0 {
        params.lambda()
    } else {
        params.lambda() * (1.0 - bk) / (1.0 - beta)
    };
    let cycle = subsidy + bk * params.model().success_prob(k.get());
    Ok(CycleValue {
        k,
        value: cycle / (1.0 - beta.powi(kk + 1)),
    })
}

fn check_beta(beta: f64, allow_zero: bool) -> Result<()> {
    let lo_ok = if allow_zero { beta >= 0.0 } else { beta > 0.0 };
    if !(beta.is_finite() && lo_ok && beta < 1.0) {
        return Err(Error::InvalidParam {
            name: "beta",
            value: beta,
            reason: if allow_zero { "must lie in [0, 1)" } else { "must lie in (0, 1)" }.into(),
        });
    }
    Ok(())
}

fn check_k_max(k_max: u32) -> Result<()> {
    if k_max == 0 {
        return Err(Error::InvalidK(0));
    }
    Ok(())
}

fn argmax_smallest(values: impl Iterator<Item = CycleValue>) -> PolicyK {
    let mut best: Option<CycleValue> = None;
    for cv in values {
        // strict comparison keeps the smallest k on ties
        if best.is_none_or(|b| cv.value > b.value) {
            best = Some(cv);
        }
    }
    best.expect("k_max >= 1").k
}

/// Optimal waiting time for the average-reward criterion, searched over
/// `1..=k_max`; ties go to the smallest `k`.
pub fn k_opt(params: &ArmParams, k_max: u32) -> Result<PolicyK> {
    check_k_max(k_max)?;
    Ok(argmax_smallest(
        (1..=k_max).map(|k| cycle_value_avg(params, PolicyK(k))),
    ))
}

/// Optimal waiting time under discount `beta`, same search and tie rule as [`k_opt`].
pub fn k_opt_discounted(params: &ArmParams, beta: f64, k_max: u32) -> Result<PolicyK> {
    check_k_max(k_max)?;
    check_beta(beta, true)?;
    Ok(argmax_smallest((1..=k_max).map(|k| {
        cycle_value_discounted(params, PolicyK(k), beta).expect("beta checked")
    })))
}

/// Average value of every policy `1..=k_max`, in order of `k`.
pub fn cycle_table(params: &ArmParams, k_max: u32) -> Vec<CycleValue> {
    (1..=k_max).map(|k| cycle_value_avg(params, PolicyK(k))).collect()
}

/// Converged solution of the discounted belief-space Bellman equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueTable {
    pub params: ArmParams,
    pub beta: f64,
    /// Uniform beliefs `0 = pi_0 < ... < pi_N = 1`.
    pub grid: Vec<f64>,
    /// `V(pi)` where both actions are available.
    pub values: Vec<f64>,
    /// Value right after a recommendation (belief 1). Equals `V(1)` when
    /// back-to-back recommendations are allowed, otherwise the forced-idle value.
    pub value_reset: f64,
    /// Whether recommending is (weakly) optimal at each grid point.
    pub rec: Vec<bool>,
    /// Largest grid belief at which recommending is optimal; `None` when it never is.
    pub threshold: Option<Belief>,
    pub back_to_back: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViOptions {
    /// Number of uniform cells; the grid has `grid_size + 1` points.
    pub grid_size: usize,
    pub tol: f64,
    /// Allow a recommendation immediately after another one (`k = 0`).
    ///
    /// Off by default: the cyclic policies start at `k = 1`, and with the
    /// option on, arms with `rho > lambda` can prefer recommending every step.
    pub back_to_back: bool,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            tol: DEFAULT_TOL,
            back_to_back: false,
        }
    }
}

/// Interpolation stencil for the off-grid point `x`: left index and right weight.
fn stencil(x: f64, n: usize) -> (usize, f64) {
    let pos = (x * n as f64).clamp(0.0, n as f64);
    let j = (pos.floor() as usize).min(n - 1);
    (j, pos - j as f64)
}

fn interp(values: &[f64], (j, w): (usize, f64)) -> f64 {
    values[j] * (1.0 - w) + values[j + 1] * w
}

/// Solves `V(pi) = max{ lambda + beta V((1-q) pi), 1 - pi (1-rho) + beta V_reset }`
/// by value iteration on a uniform belief grid, linearly interpolating `V`
/// at `(1-q) pi`. `V_reset` is `V(1)`, or `lambda + beta V(1-q)` when a
/// recommendation must be followed by at least one idle step.
pub fn value_iteration(params: &ArmParams, beta: f64, grid_size: usize, tol: f64) -> Result<ValueTable> {
    value_iteration_with(
        params,
        beta,
        ViOptions {
            grid_size,
            tol,
            ..ViOptions::default()
        },
    )
}

pub fn value_iteration_with(params: &ArmParams, beta: f64, opts: ViOptions) -> Result<ValueTable> {
    check_beta(beta, false)?;
    if opts.grid_size < 64 {
        return Err(Error::InvalidParam {
            name: "grid_size",
            value: opts.grid_size as f64,
            reason: "must be at least 64".into(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParam {
            name: "tol",
            value: opts.tol,
            reason: "must be positive".into(),
        });
    }

    let n = opts.grid_size;
    let lambda = params.lambda();
    let q = params.q();
    let rho = params.rho();
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let stencils: Vec<(usize, f64)> = grid.iter().map(|&pi| stencil((1.0 - q) * pi, n)).collect();
    let immediate: Vec<f64> = grid.iter().map(|&pi| 1.0 - pi * (1.0 - rho)).collect();
    let reset_of = |values: &[f64]| {
        if opts.back_to_back {
            values[n]
        } else {
            lambda + beta * interp(values, stencils[n])
        }
    };

    let mut values = vec![0.0; n + 1];
    let mut next = vec![0.0; n + 1];
    let mut last_change = f64::INFINITY;
    for iter in 1..=MAX_ITERATIONS {
        let v_reset = reset_of(&values);
        let mut change: f64 = 0.0;
        for i in 0..=n {
            let idle = lambda + beta * interp(&values, stencils[i]);
            let rec = immediate[i] + beta * v_reset;
            next[i] = idle.max(rec);
            change = change.max((next[i] - values[i]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        last_change = change;
        if change < opts.tol {
            let value_reset = reset_of(&values);
            return Ok(ValueTable::assemble(*params, beta, grid, values, value_reset, opts.back_to_back, iter));
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        last_change,
    })
}

/// Structural diagnostics of a value table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureReport {
    /// Largest step-to-step increase of `V` along the grid (non-increasing means `<= 0`).
    pub max_increase: f64,
    /// Smallest second difference (convex means `>= 0`).
    pub min_second_diff: f64,
    /// `V(0) - V(1)`.
    pub range: f64,
    /// Number of action changes along the grid.
    pub switches: usize,
    /// `Rec` on a prefix `[0, pi_T]` of the grid and `NoRec` on the rest.
    pub threshold_form: bool,
}

impl StructureReport {
    /// Monotone, convex, bounded range and single-threshold structure at tolerance `tol`.
    pub fn holds(&self, rho: f64, tol: f64, range_tol: f64) -> bool {
        self.max_increase <= tol
            && self.min_second_diff >= -tol
            && self.range < (1.0 - rho) + range_tol
            && self.threshold_form
    }
}

impl ValueTable {
    fn assemble(
        params: ArmParams,
        beta: f64,
        grid: Vec<f64>,
        values: Vec<f64>,
        value_reset: f64,
        back_to_back: bool,
        iterations: usize,
    ) -> Self {
        let n = grid.len() - 1;
        let rec: Vec<bool> = grid
            .iter()
            .map(|&pi| {
                let idle = params.lambda() + beta * interp(&values, stencil((1.0 - params.q()) * pi, n));
                let rec = 1.0 - pi * (1.0 - params.rho()) + beta * value_reset;
                rec >= idle
            })
            .collect();
        let threshold = grid
            .iter()
            .zip(&rec)
            .filter(|(_, &r)| r)
            .map(|(&pi, _)| Belief::new(pi).expect("grid in [0,1]"))
            .next_back();
        Self {
            params,
            beta,
            grid,
            values,
            value_reset,
            rec,
            threshold,
            back_to_back,
            iterations,
        }
    }

    fn n(&self) -> usize {
        self.grid.len() - 1
    }

    /// `V` at any belief, by linear interpolation.
    pub fn value_at(&self, pi: f64) -> f64 {
        interp(&self.values, stencil(pi, self.n()))
    }

    /// Greedy action at belief `pi` against the interpolated table.
    pub fn action_at(&self, pi: f64) -> Action {
        let idle = self.params.lambda() + self.beta * self.value_at((1.0 - self.params.q()) * pi);
        let rec = 1.0 - pi * (1.0 - self.params.rho()) + self.beta * self.value_reset;
        if rec >= idle {
            Action::Rec
        } else {
            Action::NoRec
        }
    }

    /// Actions of the greedy policy over `steps` steps, starting right after a
    /// recommendation (belief 1).
    pub fn greedy_actions(&self, steps: usize) -> Vec<Action> {
        let mut pi = 1.0;
        let mut just_recommended = true;
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let a = if just_recommended && !self.back_to_back {
                Action::NoRec
            } else {
                self.action_at(pi)
            };
            pi = match a {
                Action::Rec => 1.0,
                Action::NoRec => (1.0 - self.params.q()) * pi,
            };
            just_recommended = a == Action::Rec;
            out.push(a);
        }
        out
    }

    /// If the greedy policy from belief 1 is `k`-cyclic (exactly one
    /// recommendation every `k + 1` steps) over `steps` steps, returns `k`.
    pub fn greedy_cycle(&self, steps: usize) -> Option<PolicyK> {
        let recs: Vec<usize> = self
            .greedy_actions(steps)
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == Action::Rec)
            .map(|(t, _)| t)
            .collect();
        if recs.len() < 2 {
            return None;
        }
        let period = recs[0] + 1;
        let periodic = recs.windows(2).all(|w| w[1] - w[0] == period);
        // the tail after the last recommendation must not exceed one period
        let tail_ok = steps - 1 - recs[recs.len() - 1] < period;
        if periodic && tail_ok && period >= 2 {
            PolicyK::new(period as u32 - 1).ok()
        } else {
            None
        }
    }

    pub fn structure(&self) -> StructureReport {
        let v = &self.values;
        let max_increase = v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_second_diff = v
            .windows(3)
            .map(|w| w[2] - 2.0 * w[1] + w[0])
            .fold(f64::INFINITY, f64::min);
        let switches = self.rec.windows(2).filter(|w| w[0] != w[1]).count();
        let first_idle = self.rec.iter().position(|&r| !r).unwrap_or(self.rec.len());
        let threshold_form = self.rec[first_idle..].iter().all(|&r| !r);
        StructureReport {
            max_increase,
            min_second_diff,
            range: v[0] - v[self.n()],
            switches,
            threshold_form,
        }
    }
}

/// `(1 - beta) V_beta(1)`, the vanishing-discount estimate of the optimal average reward.
pub fn average_gain(table: &ValueTable) -> f64 {
    (1.0 - table.beta) * table.value_reset
}
