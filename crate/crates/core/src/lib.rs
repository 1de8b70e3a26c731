//! First-order convex optimization as discretized dynamical systems.
//!
//! Every method in this crate is a time discretization of an ODE whose
//! equilibrium is the minimizer `x*`. A Lyapunov function `L` that satisfies
//! the *strong* Lyapunov condition
//!
//! ```text
//! -∇L(x)·G(x) >= c(x) L(x)^q + p(x)^2
//! ```
//!
//! decays at a known rate along the flow, and the same inequality, applied at
//! the new iterate, yields a per-step contraction for the discrete scheme.
//! The crate provides
//!
//! * [`problems`]: test-problem oracles (quadratic, LASSO, log-cosh),
//! * [`calculus`]: Bregman divergences and sampled convexity-bound checkers,
//! * [`schedules`]: the `γ_k`/`α_k` recursions and closed-form rate bounds,
//! * [`flows`]: vector fields of the continuous models plus an RK4 integrator,
//! * [`lyapunov`]: the Lyapunov catalog, a sampled strong-condition verifier,
//!   and discrete decay bounds for positive sequences,
//! * [`solvers`]: one-step transitions of every scheme and a run loop that
//!   records per-step certificates.
//!
//! All checks that sample points are certificates *over the samples*: they
//! can refute an inequality but never prove it on the whole domain.

// comparisons are written as `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod error;
pub mod flows;
pub mod lyapunov;
pub mod problems;
pub mod schedules;
pub mod solvers;

mod sampling;

pub use error::{Error, Result};
pub use problems::ProblemOracle;

/// Dense column vector used throughout.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
