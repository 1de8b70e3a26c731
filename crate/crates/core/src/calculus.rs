//! Bregman divergences of the smooth part `h` and sampled checkers for the
//! classical two-sided bounds on convex functions in `𝒮¹_{μ,L}`.
//!
//! The checkers draw points uniformly from the box of half-width
//! [`SAMPLE_RADIUS`] around `x*`. A clean report is a certificate over the
//! drawn samples only; it can refute an inequality but never prove it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::{sampling, ProblemOracle, Vector};

/// Half-width of the sampling box around `x*`.
pub const SAMPLE_RADIUS: f64 = 10.0;
/// A normalized slack below `-VIOLATION_TOLERANCE` counts as a violation.
pub const VIOLATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergencePair {
    /// `D_h(y, x) = h(y) - h(x) - <∇h(x), y - x>`.
    pub d_forward: f64,
    /// `D_h(x, y)`.
    pub d_backward: f64,
    /// `M(x, y) = ½<∇h(x) - ∇h(y), x - y>`.
    pub m_sym: f64,
}

pub fn bregman(oracle: &ProblemOracle, y: &Vector, x: &Vector) -> DivergencePair {
    let (hx, hy) = (oracle.eval_h(x), oracle.eval_h(y));
    let (gx, gy) = (oracle.grad_h(x), oracle.grad_h(y));
    let diff = y - x;
    let d_forward = hy - hx - gx.dot(&diff);
    let d_backward = hx - hy + gy.dot(&diff);
    DivergencePair {
        d_forward,
        d_backward,
        m_sym: 0.5 * (d_forward + d_backward),
    }
}

/// `D_h(y, x)` from the integral form `∫₀¹ 2M(x_ξ, x) dξ/ξ` with
/// `x_ξ = x + ξ(y - x)`, using the midpoint rule on `panels` panels.
pub fn bregman_by_quadrature(oracle: &ProblemOracle, y: &Vector, x: &Vector, panels: usize) -> f64 {
    let diff = y - x;
    let gx = oracle.grad_h(x);
    let width = 1.0 / panels as f64;
    // 2M(x_ξ, x)/ξ = <∇h(x_ξ) - ∇h(x), y - x>, which has no singularity at ξ = 0
    (0..panels)
        .map(|i| {
            let xi = (i as f64 + 0.5) * width;
            let point = x + &diff * xi;
            (oracle.grad_h(&point) - &gx).dot(&diff)
        })
        .sum::<f64>()
        * width
}

/// Right side of the three-point descent bound for `h`:
/// `<∇h(y), x⁺ - x> + L/2‖x⁺ - y‖² - max{μ/2‖y - x‖², ‖∇h(y) - ∇h(x)‖²/(2L)}`.
pub fn three_point_bound(oracle: &ProblemOracle, x_k: &Vector, y: &Vector, x_next: &Vector) -> f64 {
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let gy = oracle.grad_h(y);
    let gx = oracle.grad_h(x_k);
    let descent = gy.dot(&(x_next - x_k)) + 0.5 * lip * (x_next - y).norm_squared();
    let lower = f64::max(
        0.5 * mu * (y - x_k).norm_squared(),
        (gy - gx).norm_squared() / (2.0 * lip),
    );
    descent - lower
}

/// One inequality `lhs <= rhs` evaluated at a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl Inequality {
    fn new(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self { name, lhs, rhs }
    }

    /// `(rhs - lhs)` scaled by the magnitude of both sides.
    pub fn normalized_slack(&self) -> f64 {
        (self.rhs - self.lhs) / (1.0 + self.lhs.abs() + self.rhs.abs())
    }
}

/// Four inequalities bounding the Bregman divergence of `h` at `(x, y)`.
/// The bound with `1/μ` is omitted when `μ = 0`.
pub fn lemma1_at(oracle: &ProblemOracle, x: &Vector, y: &Vector) -> Vec<Inequality> {
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let div = bregman(oracle, y, x);
    let dist_sq = (x - y).norm_squared();
    let grad_gap_sq = (oracle.grad_h(y) - oracle.grad_h(x)).norm_squared();
    let largest = div.d_forward.max(div.m_sym);
    let smallest = div.d_forward.min(div.m_sym);
    let mut out = vec![
        Inequality::new("divergence_upper_lip", largest, 0.5 * lip * dist_sq),
        Inequality::new("divergence_lower_mu", 0.5 * mu * dist_sq, smallest),
        Inequality::new(
            "divergence_lower_gradient",
            grad_gap_sq / (2.0 * lip),
            smallest,
        ),
    ];
    if mu > 0.0 {
        out.push(Inequality::new(
            "divergence_upper_gradient_mu",
            largest,
            grad_gap_sq / (2.0 * mu),
        ));
    }
    out
}

/// Names produced by [`lemma1_at`], in order.
pub const LEMMA1_NAMES: [&str; 4] = [
    "divergence_upper_lip",
    "divergence_lower_mu",
    "divergence_lower_gradient",
    "divergence_upper_gradient_mu",
];

/// Bounds that involve the minimizer, evaluated at `x` for a smooth problem.
pub fn minimum_bounds_at(oracle: &ProblemOracle, x: &Vector) -> Vec<Inequality> {
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let gap = oracle.optimality_gap(x);
    let grad = oracle.grad_h(x);
    let grad_sq = grad.norm_squared();
    let offset = x - oracle.x_star();
    let dist_sq = offset.norm_squared();
    let pairing = grad.dot(&offset);
    let mut out = vec![
        Inequality::new("gap_lower_gradient", grad_sq / (2.0 * lip), gap),
        Inequality::new("gap_upper_lip", gap, 0.5 * lip * dist_sq),
        Inequality::new("pairing_lower_gradient", grad_sq / lip, pairing),
        Inequality::new("pairing_upper_lip", pairing, lip * dist_sq),
    ];
    if mu > 0.0 {
        out.extend([
            Inequality::new("gap_lower_mu", 0.5 * mu * dist_sq, gap),
            Inequality::new("gap_upper_gradient_mu", gap, grad_sq / (2.0 * mu)),
            Inequality::new("pairing_lower_mu", mu * dist_sq, pairing),
            Inequality::new("pairing_upper_gradient_mu", pairing, grad_sq / mu),
            Inequality::new("pairing_lower_gap", gap + 0.5 * mu * dist_sq, pairing),
        ]);
    }
    out.push(Inequality::new(
        "pairing_lower_refined",
        mu * lip / (mu + lip) * dist_sq + grad_sq / (mu + lip),
        pairing,
    ));
    out
}

/// Names produced by [`minimum_bounds_at`], in order when `μ > 0`.
pub const MINIMUM_BOUND_NAMES: [&str; 10] = [
    "gap_lower_gradient",
    "gap_upper_lip",
    "pairing_lower_gradient",
    "pairing_upper_lip",
    "gap_lower_mu",
    "gap_upper_gradient_mu",
    "pairing_lower_mu",
    "pairing_upper_gradient_mu",
    "pairing_lower_gap",
    "pairing_lower_refined",
];

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: String,
    /// Smallest normalized slack over all samples; `+∞` when skipped.
    pub worst_slack: f64,
    /// Sample points (`[x]` or `[x, y]`) attaining `worst_slack`.
    pub argmax_sample: Vec<Vec<f64>>,
    pub violations: usize,
    pub skipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub problem: String,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub inequalities: Vec<InequalityReport>,
}

impl BoundsReport {
    pub fn total_violations(&self) -> usize {
        self.inequalities.iter().map(|i| i.violations).sum()
    }

    pub fn passed(&self) -> bool {
        self.total_violations() == 0
    }

    pub fn get(&self, name: &str) -> Option<&InequalityReport> {
        self.inequalities.iter().find(|i| i.name == name)
    }
}

struct Accumulator {
    entries: Vec<InequalityReport>,
}

impl Accumulator {
    fn new(names: &[&str]) -> Self {
        Self {
            entries: names
                .iter()
                .map(|n| InequalityReport {
                    name: n.to_string(),
                    worst_slack: f64::INFINITY,
                    argmax_sample: Vec::new(),
                    violations: 0,
                    skipped: true,
                })
                .collect(),
        }
    }

    fn record(&mut self, values: &[Inequality], points: &[&Vector]) {
        for ineq in values {
            let entry = self
                .entries
                .iter_mut()
                .find(|e| e.name == ineq.name)
                .expect("inequality names are registered up front");
            entry.skipped = false;
            let slack = ineq.normalized_slack();
            if slack < -VIOLATION_TOLERANCE {
                entry.violations += 1;
            }
            if slack < entry.worst_slack {
                entry.worst_slack = slack;
                entry.argmax_sample = points.iter().map(|p| p.as_slice().to_vec()).collect();
            }
        }
    }
}

/// Samples `samples` pairs and evaluates every bound of [`lemma1_at`] on `h`.
pub fn check_bounds_lemma1(oracle: &ProblemOracle, samples: usize, seed: u64) -> BoundsReport {
    let mut rng = sampling::rng(seed, 1);
    let mut acc = Accumulator::new(&LEMMA1_NAMES);
    for _ in 0..samples {
        let x = sampling::in_box(&mut rng, oracle.x_star(), SAMPLE_RADIUS);
        let y = sampling::in_box(&mut rng, oracle.x_star(), SAMPLE_RADIUS);
        acc.record(&lemma1_at(oracle, &x, &y), &[&x, &y]);
    }
    BoundsReport {
        problem: oracle.name().into(),
        samples,
        seed,
        tolerance: VIOLATION_TOLERANCE,
        inequalities: acc.entries,
    }
}

/// Samples `samples` points and evaluates every bound of [`minimum_bounds_at`].
/// Only smooth problems have `∇f(x*) = 0`, so composite problems are rejected.
pub fn check_minimum_bounds(
    oracle: &ProblemOracle,
    samples: usize,
    seed: u64,
) -> Result<BoundsReport> {
    if oracle.is_composite() {
        return Err(Error::UnsupportedParameter(format!(
            "minimum bounds need a smooth objective, `{}` has a nonsmooth part",
            oracle.name()
        )));
    }
    let mut rng = sampling::rng(seed, 2);
    let mut acc = Accumulator::new(&MINIMUM_BOUND_NAMES);
    for _ in 0..samples {
        let x = sampling::in_box(&mut rng, oracle.x_star(), SAMPLE_RADIUS);
        acc.record(&minimum_bounds_at(oracle, &x), &[&x]);
    }
    Ok(BoundsReport {
        problem: oracle.name().into(),
        samples,
        seed,
        tolerance: VIOLATION_TOLERANCE,
        inequalities: acc.entries,
    })
}
