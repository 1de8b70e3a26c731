//! Experiment runner for `optflow-core`.
//!
//! An experiment is a JSON [`ExperimentConfig`]: a problem, a scheme with its
//! parameters, and a run length. Running it produces the per-step trace (as
//! CSV) and a [`RateReport`] comparing `L_k/L_0` with the closed-form bound of
//! the scheme. The same module drives the continuous models, the sampled
//! strong Lyapunov check, and the rate tables of the step-size rules.

// comparisons are written as `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use report::{RateReport, Status};
