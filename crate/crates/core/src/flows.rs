//! Continuous models whose discretizations are the solvers, and a fixed-step
//! classical RK4 integrator for them.
//!
//! | kind              | field                                                      |
//! |-------------------|------------------------------------------------------------|
//! | `gradient`        | `x' = -∇f(x)`                                              |
//! | `scaled_gradient` | `x' = -∇f(x)/γ`, `γ' = μ - γ`                              |
//! | `heavy_ball`      | `x' = v - x`, `v' = x - v - ∇f(x)/μ`                       |
//! | `avd_r3`          | `x' = √γ(v - x)`, `v' = -∇f(x)/√γ`, `γ' = -γ^{3/2}`        |
//! | `hnag`            | `x' = v - x - β∇f(x)`, `v' = (μ/γ)(x - v) - ∇f(x)/γ`, `γ' = μ - γ` |
//!
//! Only smooth objectives are integrated.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::Pairing;
use crate::{ProblemOracle, Vector};

/// Magnitude beyond which an integration step is treated as an overflow.
const BLOWUP: f64 = 1e150;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: Vector,
    pub v: Option<Vector>,
    pub gamma: Option<f64>,
}

impl FlowState {
    pub fn new(t: f64, x: Vector) -> Self {
        Self {
            t,
            x,
            v: None,
            gamma: None,
        }
    }

    pub fn with_v(mut self, v: Vector) -> Self {
        self.v = Some(v);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    fn is_finite(&self) -> bool {
        let ok = |v: &Vector| v.iter().all(|c| c.is_finite() && c.abs() < BLOWUP);
        ok(&self.x)
            && self.v.as_ref().is_none_or(ok)
            && self.gamma.is_none_or(|g| g.is_finite() && g > 0.0)
    }

    fn shifted(&self, h: f64, d: &Tangent) -> Self {
        Self {
            t: self.t + h,
            x: &self.x + &d.x * h,
            v: self
                .v
                .as_ref()
                .map(|v| v + d.v.as_ref().expect("matching blocks") * h),
            gamma: self
                .gamma
                .map(|g| g + h * d.gamma.expect("matching blocks")),
        }
    }
}

/// A time derivative, or a gradient, with the same blocks as a [`FlowState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub x: Vector,
    pub v: Option<Vector>,
    pub gamma: Option<f64>,
}

impl Tangent {
    /// Block-wise inner product. Blocks missing on either side contribute 0.
    pub fn dot(&self, other: &Tangent) -> f64 {
        let mut total = self.x.dot(&other.x);
        if let (Some(a), Some(b)) = (&self.v, &other.v) {
            total += a.dot(b);
        }
        if let (Some(a), Some(b)) = (self.gamma, other.gamma) {
            total += a * b;
        }
        total
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn combine(terms: [(&Tangent, f64); 4]) -> Tangent {
        let first = terms[0].0;
        let mut x = Vector::zeros(first.x.len());
        let mut v = first.v.as_ref().map(|v| Vector::zeros(v.len()));
        let mut gamma = first.gamma.map(|_| 0.0);
        for (t, w) in terms {
            x += &t.x * w;
            if let (Some(acc), Some(d)) = (v.as_mut(), t.v.as_ref()) {
                *acc += d * w;
            }
            if let (Some(acc), Some(d)) = (gamma.as_mut(), t.gamma) {
                *acc += d * w;
            }
        }
        Tangent { x, v, gamma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Gradient,
    ScaledGradient,
    HeavyBall,
    AvdR3,
    Hnag,
}

impl FlowKind {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "gradient" => FlowKind::Gradient,
            "scaled_gradient" => FlowKind::ScaledGradient,
            "heavy_ball" => FlowKind::HeavyBall,
            "avd_r3" | "avd" => FlowKind::AvdR3,
            "hnag" => FlowKind::Hnag,
            other => return Err(Error::InvalidModel(format!("unknown flow model `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::Gradient => "gradient",
            FlowKind::ScaledGradient => "scaled_gradient",
            FlowKind::HeavyBall => "heavy_ball",
            FlowKind::AvdR3 => "avd_r3",
            FlowKind::Hnag => "hnag",
        }
    }

    pub fn needs_v(&self) -> bool {
        matches!(self, FlowKind::HeavyBall | FlowKind::AvdR3 | FlowKind::Hnag)
    }

    pub fn needs_gamma(&self) -> bool {
        matches!(
            self,
            FlowKind::ScaledGradient | FlowKind::AvdR3 | FlowKind::Hnag
        )
    }
}

type BetaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct FlowModel<'a> {
    kind: FlowKind,
    oracle: &'a ProblemOracle,
    beta: BetaFn,
}

impl fmt::Debug for FlowModel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowModel")
            .field("kind", &self.kind)
            .field("problem", &self.oracle.name())
            .finish_non_exhaustive()
    }
}

impl<'a> FlowModel<'a> {
    /// HNAG damping defaults to the constant `β = 1/L`.
    pub fn new(kind: FlowKind, oracle: &'a ProblemOracle) -> Result<Self> {
        if oracle.is_composite() {
            return Err(Error::InvalidModel(format!(
                "flows are integrated for smooth objectives only, `{}` is composite",
                oracle.name()
            )));
        }
        if kind == FlowKind::HeavyBall && !(oracle.mu() > 0.0) {
            return Err(Error::InvalidModel(
                "heavy_ball divides by μ and needs μ > 0".into(),
            ));
        }
        let beta = 1.0 / oracle.lip();
        Ok(Self {
            kind,
            oracle,
            beta: Arc::new(move |_| beta),
        })
    }

    pub fn with_beta(mut self, beta: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.beta = Arc::new(beta);
        self
    }

    pub fn kind(&self) -> FlowKind {
        self.kind
    }

    pub fn oracle(&self) -> &'a ProblemOracle {
        self.oracle
    }

    pub fn beta(&self, t: f64) -> f64 {
        (self.beta)(t)
    }

    /// Checks that `state` carries exactly the blocks this model uses.
    pub fn check_state(&self, state: &FlowState) -> Result<()> {
        self.oracle.check_dim(&state.x)?;
        if self.kind.needs_v() != state.v.is_some() {
            return Err(Error::InvalidModel(format!(
                "`{}` {} a v block",
                self.kind.name(),
                if self.kind.needs_v() {
                    "needs"
                } else {
                    "has no"
                }
            )));
        }
        if let Some(v) = &state.v {
            self.oracle.check_dim(v)?;
        }
        if self.kind.needs_gamma() != state.gamma.is_some() {
            return Err(Error::InvalidModel(format!(
                "`{}` {} a γ block",
                self.kind.name(),
                if self.kind.needs_gamma() {
                    "needs"
                } else {
                    "has no"
                }
            )));
        }
        if let Some(g) = state.gamma {
            if !(g > 0.0) {
                return Err(Error::InvalidModel(format!("γ must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// The vector field at `state`, without block validation.
    pub fn field_unchecked(&self, state: &FlowState) -> Tangent {
        let grad = self.oracle.grad_h(&state.x);
        let mu = self.oracle.mu();
        let x = &state.x;
        match self.kind {
            FlowKind::Gradient => Tangent {
                x: -grad,
                v: None,
                gamma: None,
            },
            FlowKind::ScaledGradient => {
                let gamma = state.gamma.expect("validated");
                Tangent {
                    x: -grad / gamma,
                    v: None,
                    gamma: Some(mu - gamma),
                }
            }
            FlowKind::HeavyBall => {
                let v = state.v.as_ref().expect("validated");
                Tangent {
                    x: v - x,
                    v: Some(x - v - grad / mu),
                    gamma: None,
                }
            }
            FlowKind::AvdR3 => {
                let v = state.v.as_ref().expect("validated");
                let gamma = state.gamma.expect("validated");
                let s = gamma.sqrt();
                Tangent {
                    x: (v - x) * s,
                    v: Some(-grad / s),
                    gamma: Some(-gamma * s),
                }
            }
            FlowKind::Hnag => {
                let v = state.v.as_ref().expect("validated");
                let gamma = state.gamma.expect("validated");
                let beta = self.beta(state.t);
                Tangent {
                    x: v - x - &grad * beta,
                    v: Some((x - v) * (mu / gamma) - grad / gamma),
                    gamma: Some(mu - gamma),
                }
            }
        }
    }

    pub fn field(&self, state: &FlowState) -> Result<Tangent> {
        self.check_state(state)?;
        Ok(self.field_unchecked(state))
    }

    /// Equilibrium `(x*, x*, γ)` with the blocks this model uses.
    pub fn equilibrium(&self, gamma: f64) -> FlowState {
        let x = self.oracle.x_star().clone();
        FlowState {
            t: 0.0,
            v: self.kind.needs_v().then(|| x.clone()),
            gamma: self.kind.needs_gamma().then_some(gamma),
            x,
        }
    }

    /// Default start for a model: `v₀ = x₀`, `γ₀ = L`, and for `avd_r3` the
    /// pair `t₁ = 1`, `γ(t₁) = 4` matching `γ = 4/t²`.
    pub fn initial_state(&self, x0: Vector) -> FlowState {
        let (t, gamma) = match self.kind {
            FlowKind::AvdR3 => (1.0, 4.0),
            _ => (0.0, self.oracle.lip()),
        };
        FlowState {
            t,
            v: self.kind.needs_v().then(|| x0.clone()),
            gamma: self.kind.needs_gamma().then_some(gamma),
            x: x0,
        }
    }
}

/// Classical RK4 with fixed step `dt` from `state0.t` to `t_end`; the final
/// step is shortened to land on `t_end`. Returns every computed state
/// including the initial one.
pub fn integrate(
    model: &FlowModel<'_>,
    state0: &FlowState,
    t_end: f64,
    dt: f64,
) -> Result<Vec<FlowState>> {
    model.check_state(state0)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(t_end > state0.t) {
        return Err(Error::InvalidModel(format!(
            "t_end = {t_end} must exceed the start time {}",
            state0.t
        )));
    }
    let span = t_end - state0.t;
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state0.clone());
    let mut state = state0.clone();
    for i in 0..steps {
        let h = if i + 1 == steps { t_end - state.t } else { dt };
        let next = rk4_step(model, &state, h);
        if !next.is_finite() {
            return Err(Error::Divergence {
                t: state.t,
                last_x: state.x,
                last_v: state.v,
                last_gamma: state.gamma,
            });
        }
        state = next;
        if i + 1 < steps {
            // avoid drift of t through repeated addition
            state.t = state0.t + (i + 1) as f64 * dt;
        } else {
            state.t = t_end;
        }
        out.push(state.clone());
    }
    Ok(out)
}

fn rk4_step(model: &FlowModel<'_>, s: &FlowState, h: f64) -> FlowState {
    let k1 = model.field_unchecked(s);
    let s2 = s.shifted(0.5 * h, &k1);
    if !s2.is_finite() {
        return s2;
    }
    let k2 = model.field_unchecked(&s2);
    let s3 = s.shifted(0.5 * h, &k2);
    if !s3.is_finite() {
        return s3;
    }
    let k3 = model.field_unchecked(&s3);
    let s4 = s.shifted(h, &k3);
    if !s4.is_finite() {
        return s4;
    }
    let k4 = model.field_unchecked(&s4);
    let incr = Tangent::combine([(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)]);
    s.shifted(h / 6.0, &incr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub lyapunov: f64,
    pub bound: f64,
    /// `‖x - x*‖`.
    pub x_norm_err: f64,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub model: String,
    pub pairing: String,
    pub tolerance: f64,
    pub rows: Vec<TrajectoryRow>,
    /// Largest `lyapunov/bound` along the trajectory.
    pub max_ratio: f64,
    pub first_violation_t: Option<f64>,
    pub passed: bool,
}

/// Relative tolerance of [`continuous_decay_check`].
pub const DECAY_TOLERANCE: f64 = 1e-3;

/// Integrates `model` and compares `L(x(t))` with the bound implied by the
/// pairing's strong condition `-∇L·G >= c L^q + p²`:
/// `L(t₀)exp(-∫c)` for `q = 1` and `(L(t₀)^{1-q} + (q-1)∫c)^{-1/(q-1)}` for
/// `q > 1`, with `∫c` accumulated by the trapezoidal rule along the
/// trajectory.
pub fn continuous_decay_check(
    model: &FlowModel<'_>,
    pairing: Pairing,
    state0: &FlowState,
    t_end: f64,
    dt: f64,
) -> Result<DecayReport> {
    if pairing.flow_kind() != Some(model.kind()) {
        return Err(Error::Configuration(format!(
            "pairing `{}` does not apply to the `{}` flow",
            pairing.name(),
            model.kind().name()
        )));
    }
    let oracle = model.oracle();
    let q = pairing.q();
    let trajectory = integrate(model, state0, t_end, dt)?;
    let lyap = pairing.lyapunov();

    let mut rows = Vec::with_capacity(trajectory.len());
    let mut integral_c = 0.0;
    let mut prev_c = pairing.strong_params(model, &trajectory[0])?.c;
    let l0 = lyap.evaluate(oracle, &trajectory[0])?;
    let mut max_ratio: f64 = 0.0;
    let mut first_violation_t = None;
    for (i, state) in trajectory.iter().enumerate() {
        if i > 0 {
            let c = pairing.strong_params(model, state)?.c;
            integral_c += 0.5 * (c + prev_c) * (state.t - trajectory[i - 1].t);
            prev_c = c;
        }
        let value = lyap.evaluate(oracle, state)?;
        let bound = if q == 1.0 {
            l0 * (-integral_c).exp()
        } else if l0 == 0.0 {
            0.0
        } else {
            (l0.powf(1.0 - q) + (q - 1.0) * integral_c).powf(-1.0 / (q - 1.0))
        };
        if bound > 0.0 {
            max_ratio = max_ratio.max(value / bound);
        }
        if value > bound * (1.0 + DECAY_TOLERANCE) && first_violation_t.is_none() {
            first_violation_t = Some(state.t);
        }
        rows.push(TrajectoryRow {
            t: state.t,
            lyapunov: value,
            bound,
            x_norm_err: (&state.x - oracle.x_star()).norm(),
            gamma: state.gamma,
        });
    }
    Ok(DecayReport {
        model: model.kind().name().into(),
        pairing: pairing.name().into(),
        tolerance: DECAY_TOLERANCE,
        rows,
        max_ratio,
        first_violation_t,
        passed: first_violation_t.is_none(),
    })
}
