//! Interval-timing reinforcement-learning laboratory.
//!
//! * [`env`]: the interval reproduction task.
//! * [`nn`]: embedding, controllers, heads, BPTT and Adam.
//! * [`rl`]: V-trace targets and actor-critic losses.
//! * [`train`]: actor-learner training loop.
//! * [`psych`]: Bayesian observer model and power-law analysis.
//! * [`analysis`]: performance tables, PCA, gaze paths and plots.
//! * [`selfcheck`]: V-trace and gradient self-checks behind `timing-lab check`.
//! * [`par`]: order-preserving data-parallel map with a sequential fallback.

// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod env;
pub mod error;
pub mod nn;
pub mod par;
pub mod psych;
pub mod rl;
pub mod selfcheck;
pub mod train;

pub use error::{Error, Result};
