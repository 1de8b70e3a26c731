use std::fs;
use std::path::{Path, PathBuf};

use optflow_core::problems::ProblemSpec;
use optflow_core::solvers::SolverKind;
use optflow_core::{ProblemOracle, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{HarnessError, Result};

/// Half-width of the box `[-R, R]^n` the default starting point is drawn from.
pub const DEFAULT_X0_RADIUS: f64 = 5.0;

/// One experiment: a problem, a scheme and its run length.
///
/// ```json
/// {
///   "problem": {"kind": "quadratic", "eigs": [1, 100], "b": [1, 1]},
///   "solver": {"name": "gd", "alpha": 0.0198},
///   "iters": 200,
///   "output": "gd.csv"
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub problem: ProblemSpec,
    pub solver: SolverKind,
    pub iters: usize,
    /// Starting point; drawn from `seed` when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Second block, defaults to `x0`.
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    /// Initial time-scaling factor, defaults to `L`.
    #[serde(default)]
    pub gamma0: Option<f64>,
    /// Strong-convexity constant to use instead of the problem's own; it may
    /// only be lowered.
    #[serde(default)]
    pub mu: Option<f64>,
    /// Stop once the gradient-mapping norm falls below this value.
    #[serde(default)]
    pub stop_tolerance: Option<f64>,
    /// Trace CSV destination.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub oracle: ProblemOracle,
    pub x0: Vector,
    pub v0: Option<Vector>,
}

impl ExperimentConfig {
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.solver.name().to_string())
    }

    /// Builds the problem and checks every field against it.
    pub fn prepare(&self) -> Result<Prepared> {
        let mut oracle = self.problem.build()?;
        if let Some(mu) = self.mu {
            oracle = oracle.with_mu(mu)?;
        }
        self.solver.check(&oracle)?;
        if self.iters == 0 {
            return Err(HarnessError::Usage("`iters` must be positive".into()));
        }
        if let Some(g) = self.gamma0 {
            if !(g > 0.0 && g.is_finite()) {
                return Err(HarnessError::Usage(format!(
                    "`gamma0` must be positive, got {g}"
                )));
            }
        }
        if let Some(tol) = self.stop_tolerance {
            if !(tol > 0.0) {
                return Err(HarnessError::Usage(format!(
                    "`stop_tolerance` must be positive, got {tol}"
                )));
            }
        }
        let x0 = match &self.x0 {
            Some(x) => Vector::from_vec(x.clone()),
            None => default_start(oracle.dim(), self.seed),
        };
        oracle.check_dim(&x0)?;
        let v0 = self.v0.as_ref().map(|v| Vector::from_vec(v.clone()));
        if let Some(v) = &v0 {
            oracle.check_dim(v)?;
        }
        Ok(Prepared { oracle, x0, v0 })
    }
}

/// Deterministic starting point with entries uniform in `[-R, R]`.
pub fn default_start(dim: usize, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Vector::from_fn(dim, |_, _| {
        rng.random_range(-DEFAULT_X0_RADIUS..=DEFAULT_X0_RADIUS)
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json(path: &Path, text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a config file holding one experiment object or an array of them.
pub fn load_batch(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let items = match parse_json(path, &read(path)?)? {
        Value::Array(items) => items,
        single => vec![single],
    };
    if items.is_empty() {
        return Err(HarnessError::Usage(format!(
            "{}: no experiments",
            path.display()
        )));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            serde_json::from_value(item).map_err(|e| {
                HarnessError::Usage(format!("{}: experiment {i}: {e}", path.display()))
            })
        })
        .collect()
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec> {
    serde_json::from_value(parse_json(path, &read(path)?)?)
        .map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))
}
