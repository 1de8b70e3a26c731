//! Convex test problems `f = h + g` with smooth `h` and simple nonsmooth `g`.
//!
//! Each oracle is immutable after construction and carries its constants
//! `μ <= L` together with a reference minimizer `x*` and optimal value `f*`.

use nalgebra::SymmetricEigen;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{sampling, Matrix, Vector};

/// Iteration budget of the LASSO reference solve.
pub const REFERENCE_MAX_ITERS: usize = 200_000;
/// Gradient-mapping tolerance that stops the LASSO reference solve early.
pub const REFERENCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum ProblemKind {
    /// `f(x) = ½ Σ λ_i x_i² - <b, x>`, `g ≡ 0`.
    Quadratic { eigs: Vector, b: Vector },
    /// `h(x) = ½‖Ax - b‖²`, `g(x) = ρ‖x‖₁`.
    Lasso { a: Matrix, b: Vector, rho: f64 },
    /// `f(x) = s² Σ log(e^{x_i/s} + e^{-x_i/s})`, `g ≡ 0`.
    LogCosh { dim: usize, scale: f64 },
}

#[derive(Debug, Clone)]
pub struct ProblemOracle {
    kind: ProblemKind,
    mu: f64,
    lip: f64,
    x_star: Vector,
    f_star: f64,
    level_f0: Option<f64>,
    radius_r0: Option<f64>,
}

impl ProblemOracle {
    /// Separable quadratic with spectrum `eigs`.
    pub fn quadratic(eigs: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if eigs.is_empty() {
            return Err(Error::InvalidProblem("empty spectrum".into()));
        }
        if eigs.len() != b.len() {
            return Err(Error::InvalidProblem(format!(
                "spectrum has {} entries but b has {}",
                eigs.len(),
                b.len()
            )));
        }
        if let Some(bad) = eigs.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidProblem(format!(
                "eigenvalues must be positive, got {bad}"
            )));
        }
        let eigs = Vector::from_vec(eigs);
        let b = Vector::from_vec(b);
        let mu = eigs.min();
        let lip = eigs.max();
        let x_star = b.component_div(&eigs);
        let f_star = -0.5 * b.dot(&x_star);
        Ok(Self {
            kind: ProblemKind::Quadratic { eigs, b },
            mu,
            lip,
            x_star,
            f_star,
            level_f0: None,
            radius_r0: None,
        })
    }

    /// LASSO problem. Computes `L` by power iteration, `μ = λ_min(AᵀA)`, and a
    /// high-accuracy reference solution.
    pub fn lasso(a: Matrix, b: Vector, rho: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::InvalidProblem(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.ncols() == 0 {
            return Err(Error::InvalidProblem("A has no columns".into()));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "rho must be positive, got {rho}"
            )));
        }
        let ata = a.transpose() * &a;
        let lip = power_iteration(&ata, 1e-10);
        if !(lip > 0.0) {
            return Err(Error::InvalidProblem("A is zero".into()));
        }
        let mu = if a.ncols() > a.nrows() {
            0.0
        } else {
            let smallest = SymmetricEigen::new(ata.clone()).eigenvalues.min();
            if smallest <= 1e-12 * lip {
                0.0
            } else {
                smallest
            }
        };
        let dim = a.ncols();
        let mut oracle = Self {
            kind: ProblemKind::Lasso { a, b, rho },
            mu,
            lip,
            x_star: Vector::zeros(dim),
            f_star: 0.0,
            level_f0: None,
            radius_r0: None,
        };
        let x_star = oracle.lasso_reference_solution();
        oracle.f_star = oracle.eval_f(&x_star);
        oracle.x_star = x_star;
        Ok(oracle)
    }

    /// Random LASSO instance: Gaussian `A` scaled by `1/√rows`, sparse planted
    /// signal, small observation noise.
    pub fn random_lasso(rows: usize, cols: usize, rho: f64, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidProblem(
                "LASSO dimensions must be positive".into(),
            ));
        }
        let mut rng = sampling::rng(seed, 0);
        let scale = 1.0 / (rows as f64).sqrt();
        let a = Matrix::from_fn(rows, cols, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        });
        let planted = Vector::from_fn(cols, |i, _| {
            if i % 5 == 0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            } else {
                0.0
            }
        });
        let noise = Vector::from_fn(rows, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.01 * z
        });
        let b = &a * planted + noise;
        Self::lasso(a, b, rho)
    }

    /// Coercive, convex, not strongly convex smooth problem in `dim` variables.
    /// `scale` sets the width of the region where `f` is locally quadratic;
    /// `f'' <= 1` for every scale.
    pub fn logcosh(dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidProblem("dimension must be positive".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            kind: ProblemKind::LogCosh { dim, scale },
            mu: 0.0,
            lip: 1.0,
            x_star: Vector::zeros(dim),
            f_star: dim as f64 * scale * scale * std::f64::consts::LN_2,
            level_f0: None,
            radius_r0: None,
        })
    }

    /// Stores the level `f0 = f(x0)` and the radius `R0` bounding `‖x - x*‖`
    /// over the sublevel set `{f <= f0}`.
    ///
    /// Quadratic and log-cosh radii are exact; the LASSO radius is the upper
    /// bound `f0/ρ + ‖x*‖` from `ρ‖x‖₂ <= ρ‖x‖₁ <= f(x)`.
    pub fn with_initial_level(mut self, x0: &Vector) -> Result<Self> {
        self.check_dim(x0)?;
        let f0 = self.eval_f(x0);
        let gap0 = self.optimality_gap(x0).max(0.0);
        let radius = match &self.kind {
            ProblemKind::Quadratic { eigs, .. } => (2.0 * gap0 / eigs.min()).sqrt(),
            ProblemKind::Lasso { rho, .. } => f0 / rho + self.x_star.norm(),
            ProblemKind::LogCosh { scale, .. } => logcosh_level_radius(gap0, *scale),
        };
        self.level_f0 = Some(f0);
        self.radius_r0 = Some(radius);
        Ok(self)
    }

    /// Replaces `μ` by a smaller strong-convexity constant. Every `μ' <= μ` is
    /// valid, and `μ' = 0` runs the convex variants of the schemes on a
    /// strongly convex problem.
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu <= self.mu) {
            return Err(Error::InvalidProblem(format!(
                "μ can only be lowered: requested {mu}, problem has {}",
                self.mu
            )));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Quadratic { .. } => "quadratic",
            ProblemKind::Lasso { .. } => "lasso",
            ProblemKind::LogCosh { .. } => "logcosh",
        }
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn x_star(&self) -> &Vector {
        &self.x_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn level_f0(&self) -> Option<f64> {
        self.level_f0
    }

    pub fn radius_r0(&self) -> Option<f64> {
        self.radius_r0
    }

    /// True when `g` is not identically zero.
    pub fn is_composite(&self) -> bool {
        matches!(self.kind, ProblemKind::Lasso { .. })
    }

    /// True when a closed-form (or 1-D solvable) prox of the full `f` exists.
    pub fn has_prox_f(&self) -> bool {
        !self.is_composite()
    }

    pub fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidProblem(format!(
                "vector has length {} but the problem dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn eval_h(&self, x: &Vector) -> f64 {
        match &self.kind {
            ProblemKind::Quadratic { eigs, b } => {
                0.5 * x
                    .iter()
                    .zip(eigs.iter())
                    .map(|(xi, e)| e * xi * xi)
                    .sum::<f64>()
                    - b.dot(x)
            }
            ProblemKind::Lasso { a, b, .. } => 0.5 * (a * x - b).norm_squared(),
            ProblemKind::LogCosh { scale, .. } => {
                let s2 = scale * scale;
                x.iter()
                    .map(|xi| s2 * (logcosh(xi / scale) + std::f64::consts::LN_2))
                    .sum()
            }
        }
    }

    pub fn grad_h(&self, x: &Vector) -> Vector {
        match &self.kind {
            ProblemKind::Quadratic { eigs, b } => x.component_mul(eigs) - b,
            ProblemKind::Lasso { a, b, .. } => a.tr_mul(&(a * x - b)),
            ProblemKind::LogCosh { scale, .. } => x.map(|xi| scale * (xi / scale).tanh()),
        }
    }

    pub fn eval_g(&self, x: &Vector) -> f64 {
        match &self.kind {
            ProblemKind::Lasso { rho, .. } => rho * x.lp_norm(1),
            _ => 0.0,
        }
    }

    pub fn eval_f(&self, x: &Vector) -> f64 {
        self.eval_h(x) + self.eval_g(x)
    }

    /// `f(x) - f*`, evaluated without cancellation where the problem allows it.
    pub fn optimality_gap(&self, x: &Vector) -> f64 {
        match &self.kind {
            ProblemKind::Quadratic { eigs, .. } => {
                0.5 * (x - &self.x_star)
                    .iter()
                    .zip(eigs.iter())
                    .map(|(d, e)| e * d * d)
                    .sum::<f64>()
            }
            ProblemKind::LogCosh { scale, .. } => {
                let s2 = scale * scale;
                x.iter().map(|xi| s2 * logcosh(xi / scale)).sum()
            }
            ProblemKind::Lasso { .. } => self.eval_f(x) - self.f_star,
        }
    }

    /// `argmin_x g(x) + ‖x - w‖²/(2s)`.
    pub fn prox_g(&self, w: &Vector, s: f64) -> Vector {
        match &self.kind {
            ProblemKind::Lasso { rho, .. } => soft_threshold(w, s * rho),
            _ => w.clone(),
        }
    }

    /// `argmin_x f(x) + ‖x - w‖²/(2s)` for smooth problems; `None` for LASSO.
    pub fn prox_f(&self, w: &Vector, s: f64) -> Option<Vector> {
        match &self.kind {
            ProblemKind::Quadratic { eigs, b } => Some(Vector::from_fn(w.len(), |i, _| {
                (w[i] + s * b[i]) / (1.0 + s * eigs[i])
            })),
            ProblemKind::LogCosh { scale, .. } => {
                Some(w.map(|wi| prox_scaled_logcosh(wi, s, *scale)))
            }
            ProblemKind::Lasso { .. } => None,
        }
    }

    /// `q = (w - prox_g(w, s))/s`, a subgradient of `g` at `prox_g(w, s)`.
    pub fn subgradient_residual(&self, w: &Vector, s: f64) -> Vector {
        (w - self.prox_g(w, s)) / s
    }

    /// Gradient mapping `(x - prox_g(x - s∇h(x), s))/s`.
    pub fn gradient_mapping(&self, x: &Vector, s: f64) -> Vector {
        let forward = x - self.grad_h(x) * s;
        (x - self.prox_g(&forward, s)) / s
    }

    fn lasso_reference_solution(&self) -> Vector {
        let ProblemKind::Lasso { a, b, rho } = &self.kind else {
            unreachable!("reference solve is only used for LASSO");
        };
        let lip = self.lip;
        let mu_ratio = self.mu / lip;
        let dim = self.dim();

        // accelerated proximal gradient with γ0 = L, i.e. α0 = 1
        let mut x = Vector::zeros(dim);
        let mut v = x.clone();
        let mut y = &x - self.grad_h(&x) / lip;
        let mut alpha = 1.0_f64;
        for k in 0..REFERENCE_MAX_ITERS {
            let w = (&y + &v * alpha) / (1.0 + alpha);
            let x_next = self.prox_g(&w, 1.0 / (lip * (1.0 + alpha)));
            let y_next = &x_next - self.grad_h(&x_next) / lip;
            v = &x_next + (&y_next - &y) / (alpha + mu_ratio);
            alpha = ((alpha * alpha + alpha * mu_ratio) / (1.0 + alpha)).sqrt();
            x = x_next;
            y = y_next;
            if k % 64 == 0 && self.gradient_mapping(&x, 1.0 / lip).norm() < REFERENCE_TOLERANCE {
                log::debug!("lasso reference converged after {k} iterations");
                break;
            }
        }

        match polish_lasso(a, b, *rho, &x) {
            Some(polished) if self.eval_f(&polished) <= self.eval_f(&x) + 1e-14 => polished,
            _ => x,
        }
    }
}

/// Solves the smooth system on the detected support and sign pattern, and
/// accepts the result only if it satisfies the LASSO optimality conditions.
fn polish_lasso(a: &Matrix, b: &Vector, rho: f64, x: &Vector) -> Option<Vector> {
    let scale = x.amax().max(1.0);
    let support: Vec<usize> = (0..x.len())
        .filter(|&i| x[i].abs() > 1e-9 * scale)
        .collect();
    if support.is_empty() || support.len() > a.nrows() {
        return None;
    }
    let a_s = a.select_columns(support.iter());
    let signs = Vector::from_iterator(support.len(), support.iter().map(|&i| x[i].signum()));
    let rhs = a_s.tr_mul(b) - signs.clone() * rho;
    let z = (a_s.transpose() * &a_s).cholesky()?.solve(&rhs);
    if z.iter().zip(signs.iter()).any(|(zi, si)| zi * si <= 0.0) {
        return None;
    }
    let mut full = Vector::zeros(x.len());
    for (pos, &i) in support.iter().enumerate() {
        full[i] = z[pos];
    }
    let correlation = a.tr_mul(&(a * &full - b));
    let off_support_ok = (0..x.len())
        .filter(|i| !support.contains(i))
        .all(|j| correlation[j].abs() <= rho * (1.0 + 1e-9));
    off_support_ok.then_some(full)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix, iterated
/// until the Rayleigh quotient changes by less than `rel_tol`.
pub fn power_iteration(m: &Matrix, rel_tol: f64) -> f64 {
    let n = m.nrows();
    // a fixed, non-degenerate start vector
    let mut v = Vector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt().fract());
    v.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..100_000 {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - estimate).abs() <= rel_tol * next.abs() {
            return next.max(norm);
        }
        estimate = next;
    }
    estimate
}

/// Component-wise `sign(w_i)·max(|w_i| - threshold, 0)`.
pub fn soft_threshold(w: &Vector, threshold: f64) -> Vector {
    w.map(|wi| wi.signum() * (wi.abs() - threshold).max(0.0))
}

/// `log cosh(u)` without cancellation near zero or overflow for large `|u|`.
pub fn logcosh(u: f64) -> f64 {
    let a = u.abs();
    if a < 1.0 {
        let half = (0.5 * a).sinh();
        (2.0 * half * half).ln_1p()
    } else {
        a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
    }
}

/// Solves `x + t·s·tanh(x/s) = w` by safeguarded Newton on the bracket
/// between `w/(1+t)` and `w`.
fn prox_scaled_logcosh(w: f64, t: f64, scale: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let sign = w.signum();
    let target = w.abs();
    let residual = |x: f64| x + t * scale * (x / scale).tanh() - target;
    let mut lo = target / (1.0 + t);
    let mut hi = target;
    let mut x = lo;
    for _ in 0..200 {
        let r = residual(x);
        if r == 0.0 {
            break;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let sech = 1.0 / (x / scale).cosh();
        let slope = 1.0 + t * sech * sech;
        let mut next = x - r / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * x.abs().max(f64::MIN_POSITIVE) {
            x = next;
            break;
        }
        x = next;
    }
    sign * x
}

/// Largest `r` with `s²·log cosh(r/s) <= gap`. The sublevel set of the
/// separable log-cosh gap is farthest from the origin along a coordinate
/// axis because `r ↦ (logcosh⁻¹)²` is convex, so one bisection suffices.
fn logcosh_level_radius(gap: f64, scale: f64) -> f64 {
    if gap <= 0.0 {
        return 0.0;
    }
    let level = |r: f64| scale * scale * logcosh(r / scale) - gap;
    let mut lo = 0.0;
    // s²·logcosh(r/s) >= s·r - s²·ln2, so this upper end is above the level
    let mut hi = gap / scale + scale * std::f64::consts::LN_2 + scale;
    while level(hi) < 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if level(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// JSON problem description, tagged by `kind`. Matrices are row-major nested
/// arrays.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        eigs: Vec<f64>,
        b: Vec<f64>,
    },
    Lasso {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        rho: f64,
    },
    RandomLasso {
        rows: usize,
        cols: usize,
        rho: f64,
        #[serde(default)]
        seed: u64,
    },
    Logcosh {
        dim: usize,
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

fn default_scale() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemOracle> {
        match self {
            ProblemSpec::Quadratic { eigs, b } => ProblemOracle::quadratic(eigs.clone(), b.clone()),
            ProblemSpec::Lasso { a, b, rho } => {
                let rows = a.len();
                let cols = a.first().map_or(0, Vec::len);
                if a.iter().any(|row| row.len() != cols) {
                    return Err(Error::InvalidProblem("ragged matrix rows".into()));
                }
                let matrix = Matrix::from_row_iterator(rows, cols, a.iter().flatten().copied());
                ProblemOracle::lasso(matrix, Vector::from_vec(b.clone()), *rho)
            }
            ProblemSpec::RandomLasso {
                rows,
                cols,
                rho,
                seed,
            } => ProblemOracle::random_lasso(*rows, *cols, *rho, *seed),
            ProblemSpec::Logcosh { dim, scale } => ProblemOracle::logcosh(*dim, *scale),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn quadratic_values() {
        let p = ProblemOracle::quadratic(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(p.eval_f(&v(&[2.0])), 2.0);
        assert_eq!(p.grad_h(&v(&[2.0])), v(&[2.0]));
        assert_eq!(p.x_star(), &v(&[0.0]));

        let p = ProblemOracle::quadratic(vec![1.0, 10.0], vec![0.0, 0.0]).unwrap();
        assert_eq!((p.mu(), p.lip()), (1.0, 10.0));

        let p = ProblemOracle::quadratic(vec![2.0], vec![4.0]).unwrap();
        assert_eq!(p.x_star(), &v(&[2.0]));
        assert_eq!(p.f_star(), -4.0);
    }

    #[test]
    fn quadratic_rejects_bad_spectrum() {
        assert!(matches!(
            ProblemOracle::quadratic(vec![1.0, 0.0], vec![0.0, 0.0]),
            Err(Error::InvalidProblem(_))
        ));
        assert!(ProblemOracle::quadratic(vec![-1.0], vec![0.0]).is_err());
        assert!(ProblemOracle::quadratic(vec![], vec![]).is_err());
        assert!(ProblemOracle::quadratic(vec![1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn quadratic_prox_closed_form() {
        let p = ProblemOracle::quadratic(vec![2.0], vec![4.0]).unwrap();
        let x = p.prox_f(&v(&[0.0]), 1.0).unwrap();
        assert!((x[0] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&v(&[3.0]), 1.0), v(&[2.0]));
        assert_eq!(soft_threshold(&v(&[0.5]), 1.0), v(&[0.0]));
        assert_eq!(soft_threshold(&v(&[-3.0]), 1.0), v(&[-2.0]));
    }

    #[test]
    fn mu_can_only_be_lowered() {
        let p = ProblemOracle::quadratic(vec![2.0, 8.0], vec![1.0, 1.0]).unwrap();
        let convex = p.clone().with_mu(0.0).unwrap();
        assert_eq!(convex.mu(), 0.0);
        assert_eq!(convex.lip(), 8.0);
        assert_eq!(convex.x_star(), p.x_star());
        assert!(p.clone().with_mu(3.0).is_err());
        let x0 = v(&[1.5, 0.5]);
        let r = convex.with_initial_level(&x0).unwrap().radius_r0().unwrap();
        assert!((r - p.with_initial_level(&x0).unwrap().radius_r0().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn lasso_identity_design() {
        // ½(x-1)² + 0.5|x| is minimized at 0.5; ½x² + 0.5|x| at 0
        let p = ProblemOracle::lasso(Matrix::identity(2, 2), v(&[1.0, 0.0]), 0.5).unwrap();
        assert!((p.x_star() - v(&[0.5, 0.0])).norm() < 1e-12);
        assert!((p.f_star() - (0.125 + 0.25)).abs() < 1e-12);
        assert_eq!((p.mu(), p.lip()), (1.0, 1.0));
    }

    #[test]
    fn lasso_rejects_mismatch() {
        assert!(ProblemOracle::lasso(Matrix::identity(2, 2), v(&[1.0]), 0.5).is_err());
        assert!(ProblemOracle::lasso(Matrix::identity(2, 2), v(&[1.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn power_iteration_matches_eigen_decomposition() {
        let p = ProblemOracle::random_lasso(30, 12, 0.1, 3).unwrap();
        let ProblemKind::Lasso { a, .. } = p.kind() else {
            unreachable!()
        };
        let ata = a.transpose() * a;
        let eig = SymmetricEigen::new(ata).eigenvalues;
        assert!((p.lip() - eig.max()).abs() <= 1e-9 * eig.max());
        assert!((p.mu() - eig.min()).abs() <= 1e-9 * eig.max());
        assert!(p.mu() > 0.0);
    }

    #[test]
    fn wide_lasso_has_zero_mu() {
        let p = ProblemOracle::random_lasso(10, 20, 0.1, 1).unwrap();
        assert_eq!(p.mu(), 0.0);
    }

    #[test]
    fn lasso_reference_satisfies_optimality() {
        let p = ProblemOracle::random_lasso(20, 50, 0.05, 7).unwrap();
        let ProblemKind::Lasso { a, b, rho } = p.kind() else {
            unreachable!()
        };
        let corr = a.tr_mul(&(a * p.x_star() - b));
        for i in 0..p.dim() {
            let xi = p.x_star()[i];
            if xi != 0.0 {
                assert!((corr[i] + rho * xi.signum()).abs() < 1e-9, "coordinate {i}");
            } else {
                assert!(corr[i].abs() <= rho * (1.0 + 1e-9), "coordinate {i}");
            }
        }
    }

    #[test]
    fn logcosh_values() {
        let p = ProblemOracle::logcosh(1, 1.0).unwrap();
        assert!((p.eval_f(&v(&[0.0])) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(p.grad_h(&v(&[0.0])), v(&[0.0]));
        assert!((p.grad_h(&v(&[40.0]))[0] - 1.0).abs() < 1e-15);
        assert_eq!(p.optimality_gap(&v(&[0.0])), 0.0);
    }

    #[test]
    fn logcosh_radius() {
        let p = ProblemOracle::logcosh(1, 1.0)
            .unwrap()
            .with_initial_level(&v(&[2.0]))
            .unwrap();
        assert!((p.radius_r0().unwrap() - 2.0).abs() < 1e-10);

        // in 2-D the whole gap can sit on one axis
        let p = ProblemOracle::logcosh(2, 1.0)
            .unwrap()
            .with_initial_level(&v(&[1.0, 1.0]))
            .unwrap();
        let r = p.radius_r0().unwrap();
        assert!((logcosh(r) - 2.0 * logcosh(1.0)).abs() < 1e-10);
    }

    #[test]
    fn stable_logcosh_matches_naive_formula() {
        for &u in &[
            -30.0_f64, -3.0, -0.7, -1e-3, 0.0, 1e-8, 0.4, 0.99, 1.0, 2.5, 700.0,
        ] {
            let naive = if u.abs() < 300.0 {
                u.cosh().ln()
            } else {
                u.abs() - std::f64::consts::LN_2
            };
            assert!(
                (logcosh(u) - naive).abs() <= 1e-14 * (1.0 + naive.abs()),
                "u = {u}"
            );
        }
        // tiny arguments keep full relative precision
        assert!((logcosh(1e-9) / 5e-19 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logcosh_prox_solves_optimality_condition() {
        for &(w, t, s) in &[
            (3.0, 1.0, 1.0),
            (-0.2, 5.0, 2.0),
            (1.0, 1e30, 1.0),
            (1e-3, 1e-6, 0.5),
        ] {
            let x = prox_scaled_logcosh(w, t, s);
            let r = x + t * s * (x / s).tanh() - w;
            assert!(
                r.abs() <= 1e-12 * w.abs().max(1e-300),
                "w={w} t={t} s={s} r={r}"
            );
        }
        assert_eq!(prox_scaled_logcosh(0.0, 2.0, 1.0), 0.0);
    }

    #[test]
    fn subgradient_residual_examples() {
        let p = ProblemOracle::lasso(Matrix::identity(1, 1), v(&[0.0]), 1.0).unwrap();
        assert_eq!(p.subgradient_residual(&v(&[3.0]), 1.0), v(&[1.0]));
        assert_eq!(p.subgradient_residual(&v(&[0.5]), 1.0), v(&[0.5]));
        let q = ProblemOracle::quadratic(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(q.subgradient_residual(&v(&[3.0]), 0.7), v(&[0.0]));
    }

    #[test]
    fn spec_round_trip_and_unknown_keys() {
        let spec: ProblemSpec =
            serde_json::from_str(r#"{"kind":"quadratic","eigs":[1,10],"b":[0,0]}"#).unwrap();
        assert_eq!(spec.build().unwrap().lip(), 10.0);
        let spec: ProblemSpec =
            serde_json::from_str(r#"{"kind":"lasso","a":[[1,0],[0,1]],"b":[1,0],"rho":0.5}"#)
                .unwrap();
        assert!((spec.build().unwrap().x_star()[0] - 0.5).abs() < 1e-12);
        assert!(serde_json::from_str::<ProblemSpec>(
            r#"{"kind":"quadratic","eigs":[1],"b":[0],"typo":1}"#
        )
        .is_err());
        let ragged = ProblemSpec::Lasso {
            a: vec![vec![1.0, 0.0], vec![1.0]],
            b: vec![0.0, 0.0],
            rho: 1.0,
        };
        assert!(ragged.build().is_err());
    }
}
