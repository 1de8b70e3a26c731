//! Lyapunov functions, the sampled strong-condition verifier, and decay
//! bounds for positive sequences.
//!
//! A pairing binds a flow `G` to a Lyapunov function `L` and to parameters
//! `(c, q, p²)` of the strong condition `-∇L·G >= c L^q + p²`. The verifier
//! samples states from the pairing's domain and reports the smallest slack.
//! Like every sampled check in this crate, a PASS certifies the samples only.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{FlowKind, FlowModel, FlowState, Tangent};
use crate::{sampling, ProblemOracle, Vector};

/// Half-width of the sampling box around the equilibrium.
pub const SAMPLE_RADIUS: f64 = 10.0;
/// Range of `γ` samples for models with a time-scaling block.
pub const GAMMA_RANGE: (f64, f64) = (1e-2, 10.0);
/// PASS threshold on the normalized slack.
pub const SLACK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovKind {
    /// `f - f*`.
    OptGap,
    /// `½‖x - x*‖²`.
    DistSq,
    /// `f - f* + μ/2‖x - x*‖²`.
    CombinedMu,
    /// `f - f* + γ/2‖x - x*‖²`.
    Scaled,
    /// `f - f* + μ/2‖v - x*‖²`.
    Hb,
    /// `f - f* + γ/2‖v - x*‖²`.
    AvdNag,
}

impl LyapunovKind {
    pub fn name(&self) -> &'static str {
        match self {
            LyapunovKind::OptGap => "opt_gap",
            LyapunovKind::DistSq => "dist_sq",
            LyapunovKind::CombinedMu => "combined_mu",
            LyapunovKind::Scaled => "scaled",
            LyapunovKind::Hb => "hb",
            LyapunovKind::AvdNag => "avd_nag",
        }
    }

    pub fn needs_v(&self) -> bool {
        matches!(self, LyapunovKind::Hb | LyapunovKind::AvdNag)
    }

    pub fn needs_gamma(&self) -> bool {
        matches!(self, LyapunovKind::Scaled | LyapunovKind::AvdNag)
    }

    fn missing(&self, block: &str) -> Error {
        Error::Configuration(format!(
            "Lyapunov function `{}` needs a {block} block",
            self.name()
        ))
    }

    /// Value from the individual blocks.
    pub fn evaluate_parts(
        &self,
        oracle: &ProblemOracle,
        x: &Vector,
        v: Option<&Vector>,
        gamma: Option<f64>,
    ) -> Result<f64> {
        let x_star = oracle.x_star();
        let gap = || oracle.optimality_gap(x);
        Ok(match self {
            LyapunovKind::OptGap => gap(),
            LyapunovKind::DistSq => 0.5 * (x - x_star).norm_squared(),
            LyapunovKind::CombinedMu => gap() + 0.5 * oracle.mu() * (x - x_star).norm_squared(),
            LyapunovKind::Scaled => {
                let g = gamma.ok_or_else(|| self.missing("γ"))?;
                gap() + 0.5 * g * (x - x_star).norm_squared()
            }
            LyapunovKind::Hb => {
                let v = v.ok_or_else(|| self.missing("v"))?;
                gap() + 0.5 * oracle.mu() * (v - x_star).norm_squared()
            }
            LyapunovKind::AvdNag => {
                let v = v.ok_or_else(|| self.missing("v"))?;
                let g = gamma.ok_or_else(|| self.missing("γ"))?;
                gap() + 0.5 * g * (v - x_star).norm_squared()
            }
        })
    }

    pub fn evaluate(&self, oracle: &ProblemOracle, state: &FlowState) -> Result<f64> {
        self.evaluate_parts(oracle, &state.x, state.v.as_ref(), state.gamma)
    }

    /// Block gradient with the same blocks as `state`; blocks the function
    /// does not depend on are zero.
    pub fn gradient(&self, oracle: &ProblemOracle, state: &FlowState) -> Result<Tangent> {
        if self.needs_v() && state.v.is_none() {
            return Err(self.missing("v"));
        }
        if self.needs_gamma() && state.gamma.is_none() {
            return Err(self.missing("γ"));
        }
        let x_star = oracle.x_star();
        let offset = &state.x - x_star;
        let grad = oracle.grad_h(&state.x);
        let mut out = Tangent {
            x: grad.clone(),
            v: state.v.as_ref().map(|v| Vector::zeros(v.len())),
            gamma: state.gamma.map(|_| 0.0),
        };
        match self {
            LyapunovKind::OptGap => {}
            LyapunovKind::DistSq => out.x = offset,
            LyapunovKind::CombinedMu => out.x = grad + offset * oracle.mu(),
            LyapunovKind::Scaled => {
                let g = state.gamma.expect("checked");
                out.x = grad + &offset * g;
                out.gamma = Some(0.5 * offset.norm_squared());
            }
            LyapunovKind::Hb => {
                let v = state.v.as_ref().expect("checked");
                out.v = Some((v - x_star) * oracle.mu());
            }
            LyapunovKind::AvdNag => {
                let v = state.v.as_ref().expect("checked");
                let g = state.gamma.expect("checked");
                let off_v = v - x_star;
                out.gamma = Some(0.5 * off_v.norm_squared());
                out.v = Some(off_v * g);
            }
        }
        Ok(out)
    }
}

/// State-dependent parameters of the strong condition; `q` is per pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongParams {
    pub c: f64,
    pub p_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Gradient flow, `μ > 0`, `L = f - f* + μ/2‖x - x*‖²`, `c = μ`, `p² = ‖∇f‖²`.
    GradientStrong,
    /// Gradient flow, `μ = 0`, `L = f - f*` on the sublevel set of `f₀`,
    /// `c = 1/R₀²`, `q = 2`.
    GradientConvex,
    /// Scaled gradient flow, `c = 1`, `p² = ‖∇f‖²/γ`.
    ScaledGradient,
    /// Heavy-ball system, `c = 1`, `p² = μ/2‖x - v‖²`.
    HeavyBall,
    /// AVD system, `c = √γ`, `p = 0`.
    Avd,
    /// HNAG flow, `c = 1`, `p² = β‖∇f‖² + μ/2‖x - v‖²`.
    Hnag,
    /// Subgradient flow at proximal points, `μ > 0`: `-∂L·G = ‖d‖²`,
    /// `c = μ`, `p² = ½‖d‖²` with `d = ∇h(x) + q`.
    ProxStrong,
    /// Subgradient flow at proximal points inside the sublevel set of `f₀`,
    /// `μ = 0`: `c = 1/(2R₀²)`, `q = 2`, `p² = ½‖d‖²`.
    ProxConvex,
    /// Gradient flow, `μ > 0`, `L = f - f*`, `c = 2μ`, `p = 0`.
    GradientGap,
    /// Gradient flow, `L = ½‖x - x*‖²`, `c = 2μL/(μ + L)`, `p² = ‖∇f‖²/(μ + L)`.
    GradientDistance,
}

impl Pairing {
    pub const CORE: [Pairing; 8] = [
        Pairing::GradientStrong,
        Pairing::GradientConvex,
        Pairing::ScaledGradient,
        Pairing::HeavyBall,
        Pairing::Avd,
        Pairing::Hnag,
        Pairing::ProxStrong,
        Pairing::ProxConvex,
    ];

    pub const ALL: [Pairing; 10] = [
        Pairing::GradientStrong,
        Pairing::GradientConvex,
        Pairing::ScaledGradient,
        Pairing::HeavyBall,
        Pairing::Avd,
        Pairing::Hnag,
        Pairing::ProxStrong,
        Pairing::ProxConvex,
        Pairing::GradientGap,
        Pairing::GradientDistance,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Pairing::GradientStrong => "gradient_strong",
            Pairing::GradientConvex => "gradient_convex",
            Pairing::ScaledGradient => "scaled_gradient",
            Pairing::HeavyBall => "heavy_ball",
            Pairing::Avd => "avd",
            Pairing::Hnag => "hnag",
            Pairing::ProxStrong => "prox_strong",
            Pairing::ProxConvex => "prox_convex",
            Pairing::GradientGap => "gradient_gap",
            Pairing::GradientDistance => "gradient_distance",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| {
                let known: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
                Error::Configuration(format!(
                    "unknown pairing `{name}` (known: {})",
                    known.join(", ")
                ))
            })
    }

    /// The integrable flow, or `None` for the proximal-point pairings.
    pub fn flow_kind(&self) -> Option<FlowKind> {
        match self {
            Pairing::GradientStrong
            | Pairing::GradientConvex
            | Pairing::GradientGap
            | Pairing::GradientDistance => Some(FlowKind::Gradient),
            Pairing::ScaledGradient => Some(FlowKind::ScaledGradient),
            Pairing::HeavyBall => Some(FlowKind::HeavyBall),
            Pairing::Avd => Some(FlowKind::AvdR3),
            Pairing::Hnag => Some(FlowKind::Hnag),
            Pairing::ProxStrong | Pairing::ProxConvex => None,
        }
    }

    pub fn lyapunov(&self) -> LyapunovKind {
        match self {
            Pairing::GradientStrong => LyapunovKind::CombinedMu,
            Pairing::GradientConvex
            | Pairing::ProxStrong
            | Pairing::ProxConvex
            | Pairing::GradientGap => LyapunovKind::OptGap,
            Pairing::ScaledGradient => LyapunovKind::Scaled,
            Pairing::HeavyBall => LyapunovKind::Hb,
            Pairing::Avd | Pairing::Hnag => LyapunovKind::AvdNag,
            Pairing::GradientDistance => LyapunovKind::DistSq,
        }
    }

    pub fn q(&self) -> f64 {
        match self {
            Pairing::GradientConvex | Pairing::ProxConvex => 2.0,
            _ => 1.0,
        }
    }

    /// True when the domain is the sublevel set `{f <= f₀}`.
    pub fn on_sublevel_set(&self) -> bool {
        self.q() > 1.0
    }

    fn requires_strong_convexity(&self) -> bool {
        matches!(
            self,
            Pairing::GradientStrong
                | Pairing::HeavyBall
                | Pairing::ProxStrong
                | Pairing::GradientGap
        )
    }

    /// Checks the hypotheses of the pairing against a problem.
    pub fn check_problem(&self, oracle: &ProblemOracle) -> Result<()> {
        let fail = |why: String| {
            Err(Error::Configuration(format!(
                "pairing `{}` does not apply to `{}`: {why}",
                self.name(),
                oracle.name()
            )))
        };
        if self.requires_strong_convexity() && !(oracle.mu() > 0.0) {
            return fail("it needs μ > 0".into());
        }
        if self.on_sublevel_set() && oracle.radius_r0().is_none() {
            return fail("no initial level f₀ (and radius R₀) is stored".into());
        }
        if self.flow_kind().is_some() && oracle.is_composite() {
            return fail("continuous flows need a smooth objective".into());
        }
        Ok(())
    }

    /// `c` and `p²` at a flow state (not used for proximal-point pairings).
    pub fn strong_params(&self, model: &FlowModel<'_>, state: &FlowState) -> Result<StrongParams> {
        let oracle = model.oracle();
        let (mu, lip) = (oracle.mu(), oracle.lip());
        let grad_sq = || oracle.grad_h(&state.x).norm_squared();
        let xv_sq = || {
            state
                .v
                .as_ref()
                .map_or(0.0, |v| (&state.x - v).norm_squared())
        };
        let radius = || {
            oracle
                .radius_r0()
                .ok_or_else(|| Error::Configuration("pairing needs a stored radius R₀".into()))
        };
        Ok(match self {
            Pairing::GradientStrong => StrongParams {
                c: mu,
                p_sq: grad_sq(),
            },
            Pairing::GradientConvex => {
                let r = radius()?;
                StrongParams {
                    c: 1.0 / (r * r),
                    p_sq: 0.0,
                }
            }
            Pairing::ScaledGradient => {
                let g = state
                    .gamma
                    .ok_or_else(|| Error::Configuration("missing γ".into()))?;
                StrongParams {
                    c: 1.0,
                    p_sq: grad_sq() / g,
                }
            }
            Pairing::HeavyBall => StrongParams {
                c: 1.0,
                p_sq: 0.5 * mu * xv_sq(),
            },
            Pairing::Avd => {
                let g = state
                    .gamma
                    .ok_or_else(|| Error::Configuration("missing γ".into()))?;
                StrongParams {
                    c: g.sqrt(),
                    p_sq: 0.0,
                }
            }
            Pairing::Hnag => StrongParams {
                c: 1.0,
                p_sq: model.beta(state.t) * grad_sq() + 0.5 * mu * xv_sq(),
            },
            Pairing::GradientGap => StrongParams {
                c: 2.0 * mu,
                p_sq: 0.0,
            },
            Pairing::GradientDistance => StrongParams {
                c: 2.0 * mu * lip / (mu + lip),
                p_sq: grad_sq() / (mu + lip),
            },
            Pairing::ProxStrong | Pairing::ProxConvex => {
                return Err(Error::Configuration(format!(
                    "pairing `{}` is evaluated at proximal points, not flow states",
                    self.name()
                )))
            }
        })
    }

    /// Problem used when none is supplied, with its initial level stored.
    pub fn default_problem(&self) -> Result<ProblemOracle> {
        let quadratic =
            || ProblemOracle::quadratic(vec![0.5, 1.0, 4.0, 10.0], vec![1.0, -2.0, 0.5, 3.0]);
        let logcosh = || ProblemOracle::logcosh(3, 1.0);
        match self {
            Pairing::GradientStrong
            | Pairing::HeavyBall
            | Pairing::Hnag
            | Pairing::GradientGap
            | Pairing::GradientDistance => quadratic(),
            Pairing::ScaledGradient | Pairing::Avd => logcosh(),
            Pairing::GradientConvex => {
                let p = logcosh()?;
                let x0 = p.x_star() + Vector::from_column_slice(&[4.0, -3.0, 2.0]);
                p.with_initial_level(&x0)
            }
            Pairing::ProxStrong => ProblemOracle::random_lasso(60, 20, 0.1, 11),
            Pairing::ProxConvex => {
                let p = ProblemOracle::random_lasso(20, 50, 0.1, 12)?;
                let x0 = p.x_star().add_scalar(SAMPLE_RADIUS);
                p.with_initial_level(&x0)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongConditionReport {
    pub pairing: String,
    pub problem: String,
    pub samples: usize,
    /// Samples that fell inside the domain (all of them except on sublevel sets).
    pub accepted: usize,
    pub seed: u64,
    pub c_override: Option<f64>,
    /// `min (-∇L·G - cL^q - p²)/(1 + |L|^q)` over accepted samples.
    pub min_slack: f64,
    /// Blocks of the minimizing sample: `x`, then `v` and `[γ]` when present
    /// (for proximal-point pairings: `x` and the subgradient `d`).
    pub argmin_state: Vec<Vec<f64>>,
    pub violations: usize,
    pub passed: bool,
}

struct SlackTracker {
    min: f64,
    argmin: Vec<Vec<f64>>,
    violations: usize,
    accepted: usize,
}

impl SlackTracker {
    fn new() -> Self {
        Self {
            min: f64::INFINITY,
            argmin: Vec::new(),
            violations: 0,
            accepted: 0,
        }
    }

    fn record(
        &mut self,
        lhs: f64,
        lyap: f64,
        q: f64,
        params: StrongParams,
        blocks: impl FnOnce() -> Vec<Vec<f64>>,
    ) {
        self.accepted += 1;
        let lq = lyap.abs().powf(q);
        let slack = (lhs - params.c * lyap.max(0.0).powf(q) - params.p_sq) / (1.0 + lq);
        if slack < -SLACK_TOLERANCE {
            self.violations += 1;
        }
        if slack < self.min {
            self.min = slack;
            self.argmin = blocks();
        }
    }
}

/// Samples the pairing's domain and evaluates the strong condition.
///
/// Box pairings draw `x` (and `v`) uniformly from the box of half-width
/// [`SAMPLE_RADIUS`] around `x*` and `γ` uniformly from [`GAMMA_RANGE`].
/// Sublevel-set pairings keep only samples with `f <= f₀`, drawing up to
/// `1000·samples` candidates. Proximal-point pairings draw `w` from the box
/// and `s` from `(0, 10/L]`, and evaluate at `x = prox_g(w, s)` with
/// `d = ∇h(x) + (w - x)/s ∈ ∂f(x)`.
///
/// `c_override` replaces `c` everywhere (used to show that an inflated
/// constant is refuted).
pub fn strong_condition_check(
    pairing: Pairing,
    oracle: &ProblemOracle,
    samples: usize,
    seed: u64,
    c_override: Option<f64>,
) -> Result<StrongConditionReport> {
    pairing.check_problem(oracle)?;
    let mut rng = sampling::rng(seed, 3);
    let mut tracker = SlackTracker::new();
    let q = pairing.q();
    let lyap = pairing.lyapunov();
    let x_star = oracle.x_star();
    let level = oracle.level_f0();
    let in_domain =
        |x: &Vector| !pairing.on_sublevel_set() || oracle.eval_f(x) <= level.expect("checked");
    let max_draws = samples.saturating_mul(1000).max(1);
    let mut draws = 0usize;

    match pairing.flow_kind() {
        Some(kind) => {
            let model = FlowModel::new(kind, oracle)?;
            while tracker.accepted < samples && draws < max_draws {
                draws += 1;
                let x = sampling::in_box(&mut rng, x_star, SAMPLE_RADIUS);
                let v = kind
                    .needs_v()
                    .then(|| sampling::in_box(&mut rng, x_star, SAMPLE_RADIUS));
                let gamma = kind
                    .needs_gamma()
                    .then(|| rng.random_range(GAMMA_RANGE.0..=GAMMA_RANGE.1));
                if !in_domain(&x) {
                    continue;
                }
                let state = FlowState {
                    t: 0.0,
                    x,
                    v,
                    gamma,
                };
                let field = model.field_unchecked(&state);
                let grad = lyap.gradient(oracle, &state)?;
                let value = lyap.evaluate(oracle, &state)?;
                let mut params = pairing.strong_params(&model, &state)?;
                if let Some(c) = c_override {
                    params.c = c;
                }
                tracker.record(-grad.dot(&field), value, q, params, || {
                    let mut blocks = vec![state.x.as_slice().to_vec()];
                    if let Some(v) = &state.v {
                        blocks.push(v.as_slice().to_vec());
                    }
                    if let Some(g) = state.gamma {
                        blocks.push(vec![g]);
                    }
                    blocks
                });
            }
        }
        None => {
            let (mu, lip) = (oracle.mu(), oracle.lip());
            let c = match pairing {
                Pairing::ProxStrong => mu,
                _ => {
                    let r = oracle.radius_r0().expect("checked");
                    1.0 / (2.0 * r * r)
                }
            };
            while tracker.accepted < samples && draws < max_draws {
                draws += 1;
                let w = sampling::in_box(&mut rng, x_star, SAMPLE_RADIUS);
                let s = rng.random_range(0.0..=10.0 / lip);
                if s == 0.0 {
                    continue;
                }
                let x = oracle.prox_g(&w, s);
                if !in_domain(&x) {
                    continue;
                }
                let d = oracle.grad_h(&x) + (&w - &x) / s;
                let d_sq = d.norm_squared();
                let params = StrongParams {
                    c: c_override.unwrap_or(c),
                    p_sq: 0.5 * d_sq,
                };
                let value = oracle.optimality_gap(&x);
                tracker.record(d_sq, value, q, params, || {
                    vec![x.as_slice().to_vec(), d.as_slice().to_vec()]
                });
            }
        }
    }

    let passed = tracker.accepted > 0 && tracker.violations == 0;
    Ok(StrongConditionReport {
        pairing: pairing.name().into(),
        problem: oracle.name().into(),
        samples,
        accepted: tracker.accepted,
        seed,
        c_override,
        min_slack: tracker.min,
        argmin_state: tracker.argmin,
        violations: tracker.violations,
        passed,
    })
}

/// Hypotheses on a positive sequence `A_k` with `p_k² >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayCase {
    /// Case 1: `A_{k+1} - A_k <= -α_k A_k - p_k²` with `α_k ∈ [0, 1)`.
    Explicit { alphas: Vec<f64> },
    /// Case 2: `A_{k+1} - A_k <= -α_k A_{k+1} - p_k²` with `α_k >= 0`.
    Implicit { alphas: Vec<f64> },
    /// Case 3: `A_{k+1} - A_k <= -α A_k²`.
    ExplicitQuadratic { alpha: f64 },
    /// Case 4: `A_{k+1} - A_k <= -α A_{k+1}²`.
    ImplicitQuadratic { alpha: f64 },
}

impl DecayCase {
    pub fn number(&self) -> u8 {
        match self {
            DecayCase::Explicit { .. } => 1,
            DecayCase::Implicit { .. } => 2,
            DecayCase::ExplicitQuadratic { .. } => 3,
            DecayCase::ImplicitQuadratic { .. } => 4,
        }
    }
}

/// Largest `αA₀` for which the case-4 bound survives the first step. The
/// bound `(1+δ)A₀/(1+αA₀k)` fails at `k = 1` for the extremal sequence once
/// `(√(1+4a) - 1)/(2a) > (1+2a)/(1+a)²`, `a = αA₀`, which happens for
/// `a` slightly above 3.0796.
pub fn implicit_quadratic_admissible(alpha: f64, a0: f64) -> bool {
    let a = alpha * a0;
    if a <= 0.0 {
        return true;
    }
    let first = 2.0 / (1.0 + (1.0 + 4.0 * a).sqrt());
    let bound = (1.0 + 2.0 * a) / ((1.0 + a) * (1.0 + a));
    first <= bound
}

/// Bound on `A_k`:
/// case 1 `Π_{i<k}(1-α_i) A₀`, case 2 `Π_{i<k} A₀/(1+α_i)`,
/// case 3 `A₀/(1 + αA₀k)`, case 4 `(1+δ)A₀/(1 + αA₀k)` with
/// `δ = αA₀/(1 + αA₀)`.
///
/// Case 4 is only valid when [`implicit_quadratic_admissible`] holds and
/// returns an unsupported-parameter error otherwise.
pub fn sequence_decay(case: &DecayCase, a0: f64, k: usize) -> Result<f64> {
    if !(a0 > 0.0) {
        return Err(Error::UnsupportedParameter(format!(
            "A₀ must be positive, got {a0}"
        )));
    }
    let prefix = |alphas: &[f64]| -> Result<()> {
        if k > alphas.len() {
            return Err(Error::UnsupportedParameter(format!(
                "k = {k} exceeds the {} supplied step sizes",
                alphas.len()
            )));
        }
        Ok(())
    };
    match case {
        DecayCase::Explicit { alphas } => {
            prefix(alphas)?;
            if let Some(bad) = alphas.iter().find(|a| !(**a >= 0.0 && **a < 1.0)) {
                return Err(Error::UnsupportedParameter(format!(
                    "case 1 needs α_k in [0, 1), got {bad}"
                )));
            }
            Ok(alphas[..k].iter().map(|a| 1.0 - a).product::<f64>() * a0)
        }
        DecayCase::Implicit { alphas } => {
            prefix(alphas)?;
            if let Some(bad) = alphas.iter().find(|a| !(**a >= 0.0)) {
                return Err(Error::UnsupportedParameter(format!(
                    "case 2 needs α_k >= 0, got {bad}"
                )));
            }
            Ok(a0 / alphas[..k].iter().map(|a| 1.0 + a).product::<f64>())
        }
        DecayCase::ExplicitQuadratic { alpha } => {
            if !(*alpha > 0.0) {
                return Err(Error::UnsupportedParameter(format!(
                    "α must be positive, got {alpha}"
                )));
            }
            Ok(a0 / (1.0 + alpha * a0 * k as f64))
        }
        DecayCase::ImplicitQuadratic { alpha } => {
            if !(*alpha > 0.0) {
                return Err(Error::UnsupportedParameter(format!(
                    "α must be positive, got {alpha}"
                )));
            }
            if !implicit_quadratic_admissible(*alpha, a0) {
                return Err(Error::UnsupportedParameter(format!(
                    "the implicit quadratic bound fails for αA₀ = {} (above ≈ 3.0796)",
                    alpha * a0
                )));
            }
            let a = alpha * a0;
            let delta = a / (1.0 + a);
            Ok((1.0 + delta) * a0 / (1.0 + a * k as f64))
        }
    }
}

/// `Σ_{i<k} p_i²/ρ_i` for a recorded sequence.
pub fn weighted_p_sum(rho: &[f64], p_sq: &[f64]) -> f64 {
    rho.iter().zip(p_sq).map(|(r, p)| p / r).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayOracleReport {
    pub case: u8,
    pub k_max: usize,
    /// `max_k A_k/bound_k` for the sequence with equality and `p = 0`.
    pub extremal_max_ratio: f64,
    /// `max_k A_k/bound_k` over the random admissible sequences.
    pub random_max_ratio: f64,
    pub random_sequences: usize,
    /// Largest `Σ p_i²/ρ_i / A₀` over the random sequences (cases 1 and 2).
    pub max_weighted_p_sum: Option<f64>,
    pub passed: bool,
}

const TINY: f64 = 1e-280;

/// Positive root of `A + αA² = prev`.
fn implicit_quadratic_step(prev: f64, alpha: f64) -> f64 {
    2.0 * prev / (1.0 + (1.0 + 4.0 * alpha * prev).sqrt())
}

/// Compares the bound of [`sequence_decay`] with the extremal sequence
/// (equality in the hypothesis, `p = 0`) and with `random` sequences that
/// satisfy the hypothesis with a random extra decrease, for `k <= k_max`.
pub fn sequence_decay_oracle(
    case: &DecayCase,
    a0: f64,
    k_max: usize,
    random: usize,
    seed: u64,
) -> Result<DecayOracleReport> {
    if let DecayCase::ExplicitQuadratic { alpha } = case {
        if !(alpha * a0 < 1.0) {
            return Err(Error::UnsupportedParameter(format!(
                "no positive sequence satisfies case 3 with αA₀ = {} >= 1",
                alpha * a0
            )));
        }
    }
    let bounds: Vec<f64> = (0..=k_max)
        .map(|k| sequence_decay(case, a0, k))
        .collect::<Result<_>>()?;

    // one step of the hypothesis with equality, then scaled by `shrink`
    let step = |k: usize, prev: f64, shrink: f64| -> f64 {
        let full = match case {
            DecayCase::Explicit { alphas } => (1.0 - alphas[k]) * prev,
            DecayCase::Implicit { alphas } => prev / (1.0 + alphas[k]),
            DecayCase::ExplicitQuadratic { alpha } => prev - alpha * prev * prev,
            DecayCase::ImplicitQuadratic { alpha } => implicit_quadratic_step(prev, *alpha),
        };
        full * shrink
    };
    // below TINY both sides are subnormal or zero and only an absolute
    // comparison is meaningful
    let ratio_of = |seq: &[f64]| -> f64 {
        seq.iter()
            .zip(&bounds)
            .map(|(a, b)| {
                if *b >= TINY || *a > b + TINY {
                    a / b
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    };

    let mut extremal = Vec::with_capacity(k_max + 1);
    extremal.push(a0);
    for k in 0..k_max {
        let next = step(k, extremal[k], 1.0);
        extremal.push(next);
    }
    let extremal_max_ratio = ratio_of(&extremal);

    let mut rng = sampling::rng(seed, 4);
    let mut random_max_ratio: f64 = 0.0;
    let mut max_weighted: Option<f64> = None;
    for _ in 0..random {
        let mut seq = Vec::with_capacity(k_max + 1);
        seq.push(a0);
        let mut weighted = 0.0;
        let mut rho = 1.0;
        for k in 0..k_max {
            let shrink: f64 = if rng.random_bool(0.5) {
                1.0
            } else {
                rng.random_range(0.5..1.0)
            };
            let full = step(k, seq[k], 1.0);
            let next = full * shrink;
            // the implied p_k² is the extra decrease beyond equality
            match case {
                _ if rho < TINY => {}
                DecayCase::Explicit { alphas } => {
                    weighted += (full - next) / rho;
                    rho *= 1.0 - alphas[k];
                }
                DecayCase::Implicit { alphas } => {
                    weighted += (1.0 + alphas[k]) * (full - next) / rho;
                    rho /= 1.0 + alphas[k];
                }
                _ => {}
            }
            seq.push(next);
        }
        if matches!(
            case,
            DecayCase::Explicit { .. } | DecayCase::Implicit { .. }
        ) {
            let w = weighted / a0;
            max_weighted = Some(max_weighted.map_or(w, |m: f64| m.max(w)));
        }
        random_max_ratio = random_max_ratio.max(ratio_of(&seq));
    }

    // a k-term product carries up to k roundings
    let tol = 1.0 + 4.0 * f64::EPSILON * (k_max as f64 + 1.0);
    Ok(DecayOracleReport {
        case: case.number(),
        k_max,
        extremal_max_ratio,
        random_max_ratio,
        random_sequences: random,
        max_weighted_p_sum: max_weighted,
        passed: extremal_max_ratio <= tol && random_max_ratio <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn evaluate_examples() {
        let p = ProblemOracle::quadratic(vec![1.0], vec![0.0]).unwrap();
        let s = FlowState::new(0.0, v(&[2.0])).with_v(v(&[1.0]));
        assert_eq!(LyapunovKind::Hb.evaluate(&p, &s).unwrap(), 2.5);
        let at_star = FlowState::new(0.0, v(&[0.0]));
        assert_eq!(
            LyapunovKind::CombinedMu.evaluate(&p, &at_star).unwrap(),
            0.0
        );

        let q = ProblemOracle::quadratic(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let x = v(&[0.3, 0.1]);
        let s = FlowState::new(0.0, x.clone())
            .with_v(q.x_star() + v(&[1.0, 0.0]))
            .with_gamma(4.0);
        let value = LyapunovKind::AvdNag.evaluate(&q, &s).unwrap();
        assert!((value - (q.optimality_gap(&x) + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn missing_block_is_a_configuration_error() {
        let p = ProblemOracle::quadratic(vec![1.0], vec![0.0]).unwrap();
        let s = FlowState::new(0.0, v(&[2.0]));
        assert!(matches!(
            LyapunovKind::Hb.evaluate(&p, &s),
            Err(Error::Configuration(_))
        ));
        assert!(LyapunovKind::Scaled.gradient(&p, &s).is_err());
    }

    #[test]
    fn gradient_flow_gap_is_exact_for_scalar_quadratic() {
        let p = ProblemOracle::quadratic(vec![1.0], vec![0.0]).unwrap();
        let m = FlowModel::new(FlowKind::Gradient, &p).unwrap();
        let s = FlowState::new(0.0, v(&[1.7]));
        let lhs = -LyapunovKind::OptGap
            .gradient(&p, &s)
            .unwrap()
            .dot(&m.field(&s).unwrap());
        let value = LyapunovKind::OptGap.evaluate(&p, &s).unwrap();
        assert!((lhs - 2.0 * value).abs() < 1e-15);
    }

    #[test]
    fn sequence_decay_examples() {
        let c3 = DecayCase::ExplicitQuadratic { alpha: 1.0 };
        assert!((sequence_decay(&c3, 1.0, 4).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(sequence_decay(&c3, 1.0, 0).unwrap(), 1.0);
        let c4 = DecayCase::ImplicitQuadratic { alpha: 1.0 };
        for k in [0usize, 1, 7] {
            assert!((sequence_decay(&c4, 1.0, k).unwrap() - 1.5 / (1.0 + k as f64)).abs() < 1e-15);
        }
        assert!(sequence_decay(&DecayCase::Explicit { alphas: vec![1.0] }, 1.0, 1).is_err());
        let c2 = DecayCase::Implicit {
            alphas: vec![1.0, 3.0],
        };
        assert_eq!(sequence_decay(&c2, 2.0, 2).unwrap(), 0.25);
    }

    #[test]
    fn case3_first_step() {
        let case = DecayCase::ExplicitQuadratic { alpha: 0.1 };
        let bound = sequence_decay(&case, 1.0, 1).unwrap();
        assert!((bound - 1.0 / 1.1).abs() < 1e-15);
        assert!(0.9 <= bound);
        let report = sequence_decay_oracle(&case, 1.0, 1, 0, 0).unwrap();
        assert!(report.passed);
        assert_eq!(report.extremal_max_ratio, 1.0);
    }

    #[test]
    fn case2_extremal_is_tight() {
        let case = DecayCase::Implicit {
            alphas: vec![0.3; 50],
        };
        let report = sequence_decay_oracle(&case, 2.0, 50, 10, 1).unwrap();
        assert!((report.extremal_max_ratio - 1.0).abs() < 1e-12);
        assert!(report.passed);
    }

    #[test]
    fn case4_threshold() {
        assert!(implicit_quadratic_admissible(3.0, 1.0));
        assert!(!implicit_quadratic_admissible(3.1, 1.0));
        assert!(matches!(
            sequence_decay(&DecayCase::ImplicitQuadratic { alpha: 10.0 }, 1.0, 1),
            Err(Error::UnsupportedParameter(_))
        ));
    }
}
