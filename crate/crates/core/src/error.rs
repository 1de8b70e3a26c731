use thiserror::Error;

use crate::Vector;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),

    #[error("invalid flow model: {0}")]
    InvalidModel(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("solver `{solver}` is not applicable: {reason}")]
    UnsupportedSolver { solver: String, reason: String },

    /// Integration produced a non-finite value; carries the last finite state.
    #[error("trajectory diverged at t = {t}")]
    Divergence {
        t: f64,
        last_x: Vector,
        last_v: Option<Vector>,
        last_gamma: Option<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
