//! Planning and online learning for a two-state hidden-Markov recommendation arm.
//!
//! Each item is a two-state POMDP: a user's interest is either `Low` or
//! `High`. Not recommending pays a fixed subsidy `lambda` and lets interest
//! recover (`Low -> High` with probability `q`). Recommending resets the
//! state to `Low` and pays a unit reward with probability `rho` in `Low`
//! and with certainty in `High`. The state is never observed.
//!
//! Modules:
//! - [`pomdp`]: the arm itself (dynamics, rewards, beliefs, epoch success probability).
//! - [`planner`]: cyclic-policy values, the optimal waiting time, and a
//!   belief-grid value-iteration solver used as an independent cross-check.
//! - [`learner`]: epoch-based Thompson sampling over a finite model grid.
//! - [`regret`]: the experiment harness (oracle vs learner, regret traces, aggregation).
//! - [`analysis`]: KL / distance diagnostics, decision regions and the closed-form
//!   regret bound.

// `!(x > 0.0)` style guards are there to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod learner;
pub mod planner;
pub mod pomdp;
pub mod regret;
pub mod rng;

pub use error::{Error, Result};
pub use pomdp::{Action, ArmParams, ArmState, Belief, Model};
pub use rng::RngStream;
