//! Discrete schemes as single-step transitions, plus a uniform run loop.
//!
//! Every step returns the next [`SolverState`] together with the slack of the
//! one-step inequality proved for that scheme (`rhs - lhs`, so a negative
//! value is a violation). Auxiliary identities and inequalities used by the
//! proofs are reported as named [`Check`]s. [`run`] strings steps together and
//! attaches the closed-form rate bound for every certified scheme.
//!
//! A violated certificate is logged and flagged on the trace; the run goes on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{sequence_decay, DecayCase, LyapunovKind};
use crate::schedules::{
    avd_alpha, avd_gamma_step, gamma_step, momentum_alpha, rho_bound, MomentumVariant, StepRule,
};
use crate::{ProblemOracle, Vector};

/// Certificates pass when `slack >= -CERTIFICATE_TOLERANCE·(1 + |L_k|)`.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;
/// Agreement required between algebraically identical forms of a scheme.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-12;

/// A discrete scheme together with its step parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverKind {
    /// Proximal point: `x' = prox_f(x, α)`.
    Ppa {
        alpha: f64,
    },
    /// Gradient descent with fixed step.
    Gd {
        alpha: f64,
    },
    /// Proximal gradient with fixed step.
    Pg {
        alpha: f64,
    },
    /// Proximal point in the rescaled time `t = α/γ`.
    ScaledPpa {
        alpha: f64,
    },
    /// Gauss-Seidel discretization of the heavy-ball flow.
    HbGs {
        alpha: f64,
    },
    /// Heavy ball followed by an extra gradient step.
    Momentum {
        #[serde(default)]
        variant: MomentumVariant,
    },
    /// Gauss-Seidel discretization of the AVD system; `α` defaults to the
    /// root of `Lα² = 1 + α√γ`.
    AvdGs {
        #[serde(default)]
        alpha: Option<f64>,
    },
    /// AVD with an extra gradient step.
    AvdGrad,
    /// AVD with an extrapolation step.
    AvdExtrap,
    Nag,
    /// Accelerated proximal gradient with `Lα² = γ`.
    Apg,
    /// Accelerated proximal gradient with `α = √(γ/(4L))`, `β = 1/(2Lα)`.
    ApgFastGrad,
    /// Accelerated proximal gradient with `Lα² = γ(1 + α)`.
    NewApg,
}

/// The three AVD discretizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvdVariant {
    Gs,
    Grad,
    Extrap,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Ppa { .. } => "ppa",
            SolverKind::Gd { .. } => "gd",
            SolverKind::Pg { .. } => "pg",
            SolverKind::ScaledPpa { .. } => "scaled_ppa",
            SolverKind::HbGs { .. } => "hb_gs",
            SolverKind::Momentum { .. } => "momentum",
            SolverKind::AvdGs { .. } => "avd_gs",
            SolverKind::AvdGrad => "avd_grad",
            SolverKind::AvdExtrap => "avd_extrap",
            SolverKind::Nag => "nag",
            SolverKind::Apg => "apg",
            SolverKind::ApgFastGrad => "apg_fast_grad",
            SolverKind::NewApg => "new_apg",
        }
    }

    /// Lyapunov function of the scheme. For NAG the certified quantity is
    /// this value minus `‖∇f(x)‖²/(2L)`.
    pub fn lyapunov(&self) -> LyapunovKind {
        match self {
            SolverKind::Ppa { .. } | SolverKind::Gd { .. } => LyapunovKind::CombinedMu,
            SolverKind::Pg { .. } => LyapunovKind::OptGap,
            SolverKind::ScaledPpa { .. } => LyapunovKind::Scaled,
            SolverKind::HbGs { .. } | SolverKind::Momentum { .. } => LyapunovKind::Hb,
            _ => LyapunovKind::AvdNag,
        }
    }

    pub fn needs_v(&self) -> bool {
        self.lyapunov().needs_v()
    }

    pub fn needs_gamma(&self) -> bool {
        self.lyapunov().needs_gamma()
    }

    fn unsupported(&self, reason: impl Into<String>) -> Error {
        Error::UnsupportedSolver {
            solver: self.name().into(),
            reason: reason.into(),
        }
    }

    /// Rejects scheme/problem pairs the scheme is not defined for.
    pub fn check(&self, oracle: &ProblemOracle) -> Result<()> {
        let fixed = match *self {
            SolverKind::Ppa { alpha }
            | SolverKind::Gd { alpha }
            | SolverKind::Pg { alpha }
            | SolverKind::ScaledPpa { alpha }
            | SolverKind::HbGs { alpha }
            | SolverKind::AvdGs { alpha: Some(alpha) } => Some(alpha),
            _ => None,
        };
        if let Some(alpha) = fixed {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::Configuration(format!(
                    "{} needs a finite step size α > 0 (got {alpha})",
                    self.name()
                )));
            }
        }
        match self {
            SolverKind::Ppa { .. } | SolverKind::ScaledPpa { .. } if !oracle.has_prox_f() => {
                Err(self.unsupported(format!("no proximal map of f for {}", oracle.name())))
            }
            SolverKind::Pg { .. }
            | SolverKind::Apg
            | SolverKind::ApgFastGrad
            | SolverKind::NewApg
            | SolverKind::Ppa { .. }
            | SolverKind::ScaledPpa { .. } => Ok(()),
            _ if oracle.is_composite() => Err(self.unsupported(format!(
                "{} has a nonsmooth part; use pg, apg or new_apg",
                oracle.name()
            ))),
            SolverKind::HbGs { .. } | SolverKind::Momentum { .. } if !(oracle.mu() > 0.0) => {
                Err(self.unsupported("heavy-ball schemes need μ > 0"))
            }
            _ => Ok(()),
        }
    }

    /// True when a contraction certificate and a rate bound exist for this
    /// scheme and step size.
    pub fn is_certified(&self, oracle: &ProblemOracle) -> bool {
        let (mu, lip) = (oracle.mu(), oracle.lip());
        match *self {
            SolverKind::Gd { alpha } => alpha <= 2.0 / (lip + mu) * (1.0 + 1e-12),
            SolverKind::Pg { alpha } => is_inverse_lip(alpha, lip),
            SolverKind::HbGs { .. } | SolverKind::AvdGs { .. } => false,
            _ => true,
        }
    }

    /// `α_k` for the current `γ_k` (schemes whose `α` is carried by the
    /// state ignore `gamma`).
    fn alpha(&self, oracle: &ProblemOracle, gamma: Option<f64>) -> Result<f64> {
        let lip = oracle.lip();
        let g = gamma.unwrap_or(lip);
        Ok(match *self {
            SolverKind::Ppa { alpha }
            | SolverKind::Gd { alpha }
            | SolverKind::Pg { alpha }
            | SolverKind::ScaledPpa { alpha }
            | SolverKind::HbGs { alpha }
            | SolverKind::AvdGs { alpha: Some(alpha) } => alpha,
            SolverKind::Momentum { variant } => momentum_alpha(oracle.mu(), lip, variant)?,
            SolverKind::AvdGs { alpha: None } | SolverKind::AvdGrad | SolverKind::AvdExtrap => {
                avd_alpha(g, lip)
            }
            SolverKind::Nag => StepRule::Nag.alpha(g, lip),
            SolverKind::Apg => StepRule::SplitApg.alpha(g, lip),
            SolverKind::ApgFastGrad => StepRule::FastGradApg.alpha(g, lip),
            SolverKind::NewApg => StepRule::NewApg.alpha(g, lip),
        })
    }

    /// Step rule whose closed-form `ρ_k` bounds the scheme.
    fn rate_rule(&self) -> Option<StepRule> {
        match self {
            SolverKind::AvdGrad | SolverKind::AvdExtrap => Some(StepRule::Avd),
            SolverKind::Nag => Some(StepRule::Nag),
            SolverKind::Apg => Some(StepRule::SplitApg),
            SolverKind::ApgFastGrad => Some(StepRule::FastGradApg),
            SolverKind::NewApg => Some(StepRule::NewApg),
            _ => None,
        }
    }
}

fn is_inverse_lip(alpha: f64, lip: f64) -> bool {
    (alpha * lip - 1.0).abs() <= 1e-12
}

/// A named auxiliary inequality evaluated during a step. Only checks with
/// `binding` set can flag a trace; the others are reported for inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub slack: f64,
    pub tolerance: f64,
    pub binding: bool,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.slack >= -self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub k: usize,
    pub x: Vector,
    pub v: Option<Vector>,
    /// Intermediate point: `y_k` of NAG and APG, the last extrapolated point
    /// of the momentum and AVD schemes.
    pub y: Option<Vector>,
    pub gamma: Option<f64>,
    /// Step size of the next iteration.
    pub alpha: f64,
    /// Certified Lyapunov quantity at `x_k`.
    pub lyapunov: f64,
    /// Norm of the gradient mapping with step `1/L` (the gradient for smooth problems).
    pub last_grad_norm: f64,
    /// Slack of the one-step inequality that produced this state.
    pub slack: Option<f64>,
    pub checks: Vec<Check>,
    /// Product of the per-step contraction factors so far.
    pub rho: f64,
    /// `Σ (ρ_k/ρ_i)‖d_{i+1}‖²`, kept by the fast-gradient APG.
    pub grad_sum: f64,
}

fn tolerance(lyapunov: f64) -> f64 {
    CERTIFICATE_TOLERANCE * (1.0 + lyapunov.abs())
}

fn grad_norm(oracle: &ProblemOracle, x: &Vector) -> f64 {
    oracle.gradient_mapping(x, 1.0 / oracle.lip()).norm()
}

fn lyapunov_value(
    oracle: &ProblemOracle,
    kind: &SolverKind,
    x: &Vector,
    v: Option<&Vector>,
    gamma: Option<f64>,
) -> Result<f64> {
    let value = kind.lyapunov().evaluate_parts(oracle, x, v, gamma)?;
    Ok(match kind {
        SolverKind::Nag => value - oracle.grad_h(x).norm_squared() / (2.0 * oracle.lip()),
        _ => value,
    })
}

impl SolverState {
    /// Starting state with the defaults `v₀ = x₀` and `γ₀ = L`.
    pub fn initial(
        oracle: &ProblemOracle,
        kind: &SolverKind,
        x0: Vector,
        v0: Option<Vector>,
        gamma0: Option<f64>,
    ) -> Result<Self> {
        kind.check(oracle)?;
        oracle.check_dim(&x0)?;
        let lip = oracle.lip();
        let v = kind.needs_v().then(|| v0.unwrap_or_else(|| x0.clone()));
        if let Some(v) = &v {
            oracle.check_dim(v)?;
        }
        let gamma = if kind.needs_gamma() {
            let g = gamma0.unwrap_or(lip);
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Configuration(format!(
                    "γ₀ must be finite and positive (got {g})"
                )));
            }
            Some(g)
        } else {
            None
        };
        let alpha = kind.alpha(oracle, gamma)?;
        let y = match kind {
            SolverKind::Nag | SolverKind::Apg => Some(&x0 - oracle.grad_h(&x0) / lip),
            _ => None,
        };
        let lyapunov = lyapunov_value(oracle, kind, &x0, v.as_ref(), gamma)?;
        Ok(Self {
            k: 0,
            last_grad_norm: grad_norm(oracle, &x0),
            x: x0,
            v,
            y,
            gamma,
            alpha,
            lyapunov,
            slack: None,
            checks: Vec::new(),
            rho: 1.0,
            grad_sum: 0.0,
        })
    }

    fn v(&self) -> Result<&Vector> {
        self.v
            .as_ref()
            .ok_or_else(|| Error::Configuration("state has no v block".into()))
    }

    fn y(&self) -> Result<&Vector> {
        self.y
            .as_ref()
            .ok_or_else(|| Error::Configuration("state has no y block".into()))
    }

    fn gamma(&self) -> Result<f64> {
        self.gamma
            .ok_or_else(|| Error::Configuration("state has no γ block".into()))
    }
}

/// Fields of the next state computed by a step.
struct Next {
    x: Vector,
    v: Option<Vector>,
    y: Option<Vector>,
    gamma: Option<f64>,
    alpha: f64,
    lyapunov: f64,
    slack: Option<f64>,
    checks: Vec<Check>,
    factor: f64,
}

fn finish(oracle: &ProblemOracle, prev: &SolverState, next: Next) -> Result<SolverState> {
    let finite = next.x.iter().all(|c| c.is_finite())
        && next
            .v
            .as_ref()
            .is_none_or(|v| v.iter().all(|c| c.is_finite()))
        && next
            .y
            .as_ref()
            .is_none_or(|y| y.iter().all(|c| c.is_finite()))
        && next.gamma.is_none_or(f64::is_finite)
        && next.lyapunov.is_finite();
    if !finite {
        return Err(Error::Divergence {
            t: (prev.k + 1) as f64,
            last_x: prev.x.clone(),
            last_v: prev.v.clone(),
            last_gamma: prev.gamma,
        });
    }
    Ok(SolverState {
        k: prev.k + 1,
        last_grad_norm: grad_norm(oracle, &next.x),
        x: next.x,
        v: next.v,
        y: next.y,
        gamma: next.gamma,
        alpha: next.alpha,
        lyapunov: next.lyapunov,
        slack: next.slack,
        checks: next.checks,
        rho: prev.rho * next.factor,
        grad_sum: prev.grad_sum,
    })
}

/// Proximal point step `x' = prox_f(x, α)`, certified by
/// `L_{k+1} <= L_k/(1 + μα)` with `L = f - f* + μ/2‖x - x*‖²`.
pub fn step_ppa(oracle: &ProblemOracle, state: &SolverState, alpha: f64) -> Result<SolverState> {
    let kind = SolverKind::Ppa { alpha };
    let x = oracle
        .prox_f(&state.x, alpha)
        .ok_or_else(|| kind.unsupported("no proximal map of f"))?;
    let lyapunov = lyapunov_value(oracle, &kind, &x, None, None)?;
    let factor = 1.0 / (1.0 + oracle.mu() * alpha);
    finish(
        oracle,
        state,
        Next {
            x,
            v: None,
            y: None,
            gamma: None,
            alpha,
            slack: Some(state.lyapunov * factor - lyapunov),
            lyapunov,
            checks: Vec::new(),
            factor,
        },
    )
}

/// Gradient step `x' = x - α∇f(x)`; for `α <= 2/(L + μ)` certified by
/// `L_{k+1} <= (1 - μα)L_k`.
pub fn step_gd(oracle: &ProblemOracle, state: &SolverState, alpha: f64) -> Result<SolverState> {
    let kind = SolverKind::Gd { alpha };
    let x = &state.x - oracle.grad_h(&state.x) * alpha;
    let lyapunov = lyapunov_value(oracle, &kind, &x, None, None)?;
    let factor = 1.0 - oracle.mu() * alpha;
    let slack = kind
        .is_certified(oracle)
        .then_some(factor * state.lyapunov - lyapunov);
    finish(
        oracle,
        state,
        Next {
            x,
            v: None,
            y: None,
            gamma: None,
            alpha,
            lyapunov,
            slack,
            checks: Vec::new(),
            factor,
        },
    )
}

/// Proximal gradient step `x' = prox_g(x - α∇h(x), α)`.
///
/// With `d_{k+1} = ∇h(x') + (y - x')/α` and `d_{k+½} = (x - x')/α`, the
/// descent `f(x') - f(x) <= α(Lα/2 - 1) min(‖d_{k+1}‖², ‖d_{k+½}‖²)` holds for
/// `α <= 2/L` and the sharper `α((L - μ)α/2 - 1)‖d_{k+½}‖²` for
/// `α <= 2/(L - μ)`. At `α = 1/L` the certificate is
/// `L_{k+1} - L_k <= -(μ/L)L_{k+1}` for `μ > 0` and
/// `L_{k+1} - L_k <= -L_{k+1}²/(2LR₀²)` for `μ = 0` (needs a stored `R₀`);
/// for other steps below `2/L` it is the descent inequality.
pub fn step_pg(oracle: &ProblemOracle, state: &SolverState, alpha: f64) -> Result<SolverState> {
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let forward = &state.x - oracle.grad_h(&state.x) * alpha;
    let x = oracle.prox_g(&forward, alpha);
    let d_full = oracle.grad_h(&x) + (&forward - &x) / alpha;
    let d_half = (&state.x - &x) / alpha;
    let lyapunov = oracle.optimality_gap(&x);
    let decrease = lyapunov - state.lyapunov;
    let tol = tolerance(state.lyapunov);
    let mut checks = Vec::new();
    let mut descent = None;
    if alpha <= 2.0 / lip {
        let min_sq = d_full.norm_squared().min(d_half.norm_squared());
        let s = alpha * (lip * alpha / 2.0 - 1.0) * min_sq - decrease;
        checks.push(Check {
            name: "descent",
            slack: s,
            tolerance: tol,
            binding: true,
        });
        descent = Some(s);
    }
    if lip == mu || alpha <= 2.0 / (lip - mu) {
        let s = alpha * ((lip - mu) * alpha / 2.0 - 1.0) * d_half.norm_squared() - decrease;
        // stated for μ > 0 as well, but it only follows when μ = 0; kept as a
        // diagnostic that never flags the trace
        checks.push(Check {
            name: "better_estimate",
            slack: s,
            tolerance: tol,
            binding: mu == 0.0,
        });
    }
    let slack = if is_inverse_lip(alpha, lip) {
        if mu > 0.0 {
            Some(-(mu / lip) * lyapunov - decrease)
        } else if let Some(r0) = oracle.radius_r0() {
            Some(-lyapunov * lyapunov / (2.0 * lip * r0 * r0) - decrease)
        } else {
            descent
        }
    } else {
        descent
    };
    let factor = if mu > 0.0 && is_inverse_lip(alpha, lip) {
        1.0 / (1.0 + mu / lip)
    } else {
        1.0
    };
    finish(
        oracle,
        state,
        Next {
            x,
            v: None,
            y: Some(forward),
            gamma: None,
            alpha,
            lyapunov,
            slack,
            checks,
            factor,
        },
    )
}

/// Proximal point step in rescaled time: `t = α/γ`, `x' = prox_f(x, t)`,
/// `γ' = (γ + αμ)/(1 + α)`. Certified by `L_{k+1} <= L_k/(1 + α)` with
/// `L = f - f* + γ/2‖x - x*‖²`.
pub fn step_scaled_ppa(
    oracle: &ProblemOracle,
    state: &SolverState,
    alpha: f64,
) -> Result<SolverState> {
    let kind = SolverKind::ScaledPpa { alpha };
    let gamma = state.gamma()?;
    let x = oracle
        .prox_f(&state.x, alpha / gamma)
        .ok_or_else(|| kind.unsupported("no proximal map of f"))?;
    let gamma_next = gamma_step(gamma, alpha, oracle.mu())?;
    let lyapunov = lyapunov_value(oracle, &kind, &x, None, Some(gamma_next))?;
    let factor = 1.0 / (1.0 + alpha);
    finish(
        oracle,
        state,
        Next {
            x,
            v: None,
            y: None,
            gamma: Some(gamma_next),
            alpha,
            slack: Some(state.lyapunov * factor - lyapunov),
            lyapunov,
            checks: Vec::new(),
            factor,
        },
    )
}

/// Gauss-Seidel heavy ball. Only the one-step inequality
/// `L_{k+1} - L_k <= -αL_{k+1} + α²/(2μ)‖∇f(x_{k+1})‖²` is available, and its
/// positive term prevents a contraction.
pub fn step_hb_gs(oracle: &ProblemOracle, state: &SolverState, alpha: f64) -> Result<SolverState> {
    let kind = SolverKind::HbGs { alpha };
    kind.check(oracle)?;
    let mu = oracle.mu();
    let v = state.v()?;
    let x = (&state.x + v * alpha) / (1.0 + alpha);
    let grad = oracle.grad_h(&x);
    let v_next = (v + &x * alpha - &grad * (alpha / mu)) / (1.0 + alpha);
    let lyapunov = lyapunov_value(oracle, &kind, &x, Some(&v_next), None)?;
    let slack = -alpha * lyapunov + alpha * alpha / (2.0 * mu) * grad.norm_squared()
        - (lyapunov - state.lyapunov);
    finish(
        oracle,
        state,
        Next {
            x,
            v: Some(v_next),
            y: None,
            gamma: None,
            alpha,
            lyapunov,
            slack: Some(slack),
            checks: Vec::new(),
            factor: 1.0,
        },
    )
}

/// One iteration of the two-sequence momentum method, returning
/// `(x_{k+1}, y_{k+1})` from `(x_k, y_k)`.
pub fn momentum_two_sequence_step(
    oracle: &ProblemOracle,
    x: &Vector,
    y: &Vector,
    alpha: f64,
    variant: MomentumVariant,
) -> (Vector, Vector) {
    let x_next = y - oracle.grad_h(y) / oracle.lip();
    let a1 = 1.0 + alpha;
    let y_next = match variant {
        MomentumVariant::Sqrt => {
            y * (alpha / a1) - x / (a1 * a1) + &x_next * ((2.0 + alpha) / (a1 * a1))
        }
        MomentumVariant::Root => {
            y * (alpha * alpha / (a1 * a1)) - x / (a1 * a1) + &x_next * (2.0 / a1)
        }
    };
    (x_next, y_next)
}

/// Heavy ball with an extra gradient step:
/// `y = (x + αv)/(1 + α)`, `v' = (v + αy - (α/μ)∇f(y))/(1 + α)`,
/// `x' = y - ∇f(y)/L`. Certified by `L_{k+1} <= L_k/(1 + α)`.
///
/// The `two_sequence` check applies the v-free form to `(x_k, y_k)` and
/// compares its output with `x_{k+1}` and `y_{k+1} = (x_{k+1} + αv_{k+1})/(1 + α)`.
pub fn step_momentum(
    oracle: &ProblemOracle,
    state: &SolverState,
    variant: MomentumVariant,
) -> Result<SolverState> {
    let kind = SolverKind::Momentum { variant };
    kind.check(oracle)?;
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let alpha = momentum_alpha(mu, lip, variant)?;
    let v = state.v()?;
    let y = (&state.x + v * alpha) / (1.0 + alpha);
    let grad = oracle.grad_h(&y);
    let v_next = (v + &y * alpha - &grad * (alpha / mu)) / (1.0 + alpha);
    let x = &y - &grad / lip;
    let lyapunov = lyapunov_value(oracle, &kind, &x, Some(&v_next), None)?;
    let factor = 1.0 / (1.0 + alpha);
    let (twin_x, twin_y) = momentum_two_sequence_step(oracle, &state.x, &y, alpha, variant);
    let y_next = (&x + &v_next * alpha) / (1.0 + alpha);
    let gap = (&twin_x - &x).amax().max((&twin_y - &y_next).amax());
    let tol = EQUIVALENCE_TOLERANCE * y_next.amax().max(1.0);
    let checks = vec![Check {
        name: "two_sequence",
        slack: tol - gap,
        tolerance: 0.0,
        binding: true,
    }];
    finish(
        oracle,
        state,
        Next {
            x,
            v: Some(v_next),
            y: Some(y),
            gamma: None,
            alpha,
            slack: Some(state.lyapunov * factor - lyapunov),
            lyapunov,
            checks,
            factor,
        },
    )
}

/// The AVD schemes with `s = α√γ` and `γ' = γ/(1 + s)`.
///
/// * `Gs`: `x' = (x + sv)/(1 + s)`, `v' = v - (α/√γ)∇f(x')`, with the
///   one-step inequality `L_{k+1} - L_k <= -sL_{k+1} + α²/2‖∇f(x')‖²` only.
/// * `Grad`: `y = (x + sv)/(1 + s)`, `v' = v - (α/√γ)∇f(y)`,
///   `x' = y - ∇f(y)/L`.
/// * `Extrap`: same `y` and `v'`, then `x' = (x + sv')/(1 + s)`.
///
/// With `Lα² = 1 + α√γ` the last two coincide and are certified by
/// `L_{k+1} <= L_k/(1 + s)`.
pub fn step_avd(
    oracle: &ProblemOracle,
    state: &SolverState,
    variant: AvdVariant,
) -> Result<SolverState> {
    let kind = match variant {
        AvdVariant::Gs => SolverKind::AvdGs {
            alpha: Some(state.alpha),
        },
        AvdVariant::Grad => SolverKind::AvdGrad,
        AvdVariant::Extrap => SolverKind::AvdExtrap,
    };
    kind.check(oracle)?;
    let lip = oracle.lip();
    let gamma = state.gamma()?;
    let v = state.v()?;
    let alpha = match variant {
        AvdVariant::Gs => state.alpha,
        _ => avd_alpha(gamma, lip),
    };
    let root = gamma.sqrt();
    let s = alpha * root;
    let gamma_next = avd_gamma_step(gamma, alpha);
    let y = (&state.x + v * s) / (1.0 + s);
    let grad = oracle.grad_h(&y);
    let v_next = v - &grad * (alpha / root);
    let (x, y) = match variant {
        AvdVariant::Gs => (y, None),
        AvdVariant::Grad => (&y - &grad / lip, Some(y)),
        AvdVariant::Extrap => ((&state.x + &v_next * s) / (1.0 + s), Some(y)),
    };
    let lyapunov = lyapunov_value(oracle, &kind, &x, Some(&v_next), Some(gamma_next))?;
    let (slack, factor) = match variant {
        AvdVariant::Gs => (
            -s * lyapunov + 0.5 * alpha * alpha * grad.norm_squared() - (lyapunov - state.lyapunov),
            1.0,
        ),
        _ => {
            let factor = 1.0 / (1.0 + s);
            (state.lyapunov * factor - lyapunov, factor)
        }
    };
    let alpha_next = match variant {
        AvdVariant::Gs => alpha,
        _ => avd_alpha(gamma_next, lip),
    };
    finish(
        oracle,
        state,
        Next {
            x,
            v: Some(v_next),
            y,
            gamma: Some(gamma_next),
            alpha: alpha_next,
            lyapunov,
            slack: Some(slack),
            checks: Vec::new(),
            factor,
        },
    )
}

/// NAG with `Lα² = γ(2 + α)`. The certified quantity
/// `L_k - ‖∇f(x_k)‖²/(2L)` contracts by `1/(1 + α_k)`.
pub fn step_nag(oracle: &ProblemOracle, state: &SolverState) -> Result<SolverState> {
    let kind = SolverKind::Nag;
    kind.check(oracle)?;
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let gamma = state.gamma()?;
    let v = state.v()?;
    let alpha = StepRule::Nag.alpha(gamma, lip);
    let x = (state.y()? + v * alpha) / (1.0 + alpha);
    let y = &x - oracle.grad_h(&x) / lip;
    let denom = gamma + mu * alpha;
    let v_next = (v * gamma + &x * (mu * alpha)) / denom + (&y - &x) * (lip * alpha / denom);
    let gamma_next = (mu * alpha + gamma) / (1.0 + alpha);
    let lyapunov = lyapunov_value(oracle, &kind, &x, Some(&v_next), Some(gamma_next))?;
    let factor = 1.0 / (1.0 + alpha);
    finish(
        oracle,
        state,
        Next {
            x,
            v: Some(v_next),
            y: Some(y),
            gamma: Some(gamma_next),
            alpha: StepRule::Nag.alpha(gamma_next, lip),
            slack: Some(state.lyapunov * factor - lyapunov),
            lyapunov,
            checks: Vec::new(),
            factor,
        },
    )
}

/// Accelerated proximal gradient with `γ = Lα²`:
/// `w = (y + αv)/(1 + α)`, `s = 1/(L(1 + α))`, `x' = prox_g(w, s)`,
/// `y' = x' - ∇h(x')/L`, `v' = x' + (y' - y)/(α + μ/L)`,
/// `α' = √((α² + αμ/L)/(1 + α))`.
///
/// Certified by `L_{k+1} - L_k <= -αL_{k+1} - ‖∇h(x_k) + q_{k+1}‖²/(2L)` with
/// `q_{k+1} = (w - x')/s`.
pub fn step_apg(oracle: &ProblemOracle, state: &SolverState) -> Result<SolverState> {
    let kind = SolverKind::Apg;
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let alpha = state.alpha;
    let v = state.v()?;
    let y = state.y()?;
    let w = (y + v * alpha) / (1.0 + alpha);
    let s = 1.0 / (lip * (1.0 + alpha));
    let x = oracle.prox_g(&w, s);
    let q = (&w - &x) / s;
    let y_next = &x - oracle.grad_h(&x) / lip;
    let v_next = &x + (&y_next - y) / (alpha + mu / lip);
    let alpha_next = ((alpha * alpha + alpha * mu / lip) / (1.0 + alpha)).sqrt();
    let gamma_next = lip * alpha_next * alpha_next;
    let lyapunov = lyapunov_value(oracle, &kind, &x, Some(&v_next), Some(gamma_next))?;
    let residual = (oracle.grad_h(&state.x) + q).norm_squared();
    let slack = -alpha * lyapunov - residual / (2.0 * lip) - (lyapunov - state.lyapunov);
    finish(
        oracle,
        state,
        Next {
            x,
            v: Some(v_next),
            y: Some(y_next),
            gamma: Some(gamma_next),
            alpha: alpha_next,
            lyapunov,
            slack: Some(slack),
            checks: Vec::new(),
            factor: 1.0 / (1.0 + alpha),
        },
    )
}

/// Splitting scheme with `α = √(γ/(4L))`, `β = 1/(2Lα)`:
/// `w = (x - ∇h(x)/(2L) + αv)/(1 + α)`, `x' = prox_g(w, αβ/(1 + α))`,
/// `v' = (γv + αμx' - αd)/(γ + αμ)` with `d = ∇h(x') + q`.
///
/// Certified by `L_{k+1} - L_k <= -αL_{k+1} - ‖d‖²/(4L)`. The `key_identity`
/// check asserts `α²β²L/2 + α²/(2γ) - αβ = -1/(4L)`.
pub fn step_apg_fast_grad(oracle: &ProblemOracle, state: &SolverState) -> Result<SolverState> {
    let kind = SolverKind::ApgFastGrad;
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let gamma = state.gamma()?;
    let v = state.v()?;
    let alpha = StepRule::FastGradApg.alpha(gamma, lip);
    let beta = 1.0 / (2.0 * lip * alpha);
    let ab = alpha * beta;
    let identity = alpha * alpha * beta * beta * lip / 2.0 + alpha * alpha / (2.0 * gamma) - ab;
    let target = -1.0 / (4.0 * lip);
    let key = Check {
        name: "key_identity",
        slack: EQUIVALENCE_TOLERANCE * target.abs() - (identity - target).abs(),
        tolerance: 0.0,
        binding: true,
    };
    let y = &state.x - oracle.grad_h(&state.x) * ab;
    let w = (&y + v * alpha) / (1.0 + alpha);
    let s = ab / (1.0 + alpha);
    let x = oracle.prox_g(&w, s);
    let d = oracle.grad_h(&x) + (&w - &x) / s;
    let denom = gamma + alpha * mu;
    let v_next = (v * gamma + &x * (alpha * mu) - &d * alpha) / denom;
    let gamma_next = denom / (1.0 + alpha);
    let lyapunov = lyapunov_value(oracle, &kind, &x, Some(&v_next), Some(gamma_next))?;
    let d_sq = d.norm_squared();
    let slack = -alpha * lyapunov - d_sq / (4.0 * lip) - (lyapunov - state.lyapunov);
    let mut next = finish(
        oracle,
        state,
        Next {
            x,
            v: Some(v_next),
            y: Some(y),
            gamma: Some(gamma_next),
            alpha: StepRule::FastGradApg.alpha(gamma_next, lip),
            lyapunov,
            slack: Some(slack),
            checks: vec![key],
            factor: 1.0 / (1.0 + alpha),
        },
    )?;
    next.grad_sum = (state.grad_sum + d_sq) / (1.0 + alpha);
    Ok(next)
}

/// Accelerated proximal gradient with `Lα² = γ(1 + α)` and fixed `s = 1/L`:
/// `y = (x + αv)/(1 + α)`, `x' = prox_g(y - s∇h(y), s)`,
/// `v' = (γv + μαy)/(γ + μα) + γ(1 + α)/(γ + μα)·(x' - y)/α`.
///
/// Certified by `L_{k+1} <= L_k/(1 + α)`. The `gradient_mapping_bound` check
/// evaluates `⟨d, y - x*⟩ >= f(x') - f* + μ/2‖y - x*‖² + ‖d‖²/(2L)` for
/// `d = L(y - x')`.
pub fn step_new_apg(oracle: &ProblemOracle, state: &SolverState) -> Result<SolverState> {
    let kind = SolverKind::NewApg;
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let gamma = state.gamma()?;
    let v = state.v()?;
    let alpha = StepRule::NewApg.alpha(gamma, lip);
    let y = (&state.x + v * alpha) / (1.0 + alpha);
    let s = 1.0 / lip;
    let x = oracle.prox_g(&(&y - oracle.grad_h(&y) * s), s);
    let d = (&y - &x) * lip;
    let denom = gamma + mu * alpha;
    let v_next = (v * gamma + &y * (mu * alpha)) / denom
        + (&x - &y) * (gamma * (1.0 + alpha) / (denom * alpha));
    let gamma_next = denom / (1.0 + alpha);
    let lyapunov = lyapunov_value(oracle, &kind, &x, Some(&v_next), Some(gamma_next))?;
    let offset = &y - oracle.x_star();
    let gap = oracle.optimality_gap(&x);
    let lhs = d.dot(&offset);
    let rhs = gap + 0.5 * mu * offset.norm_squared() + d.norm_squared() / (2.0 * lip);
    let check = Check {
        name: "gradient_mapping_bound",
        slack: lhs - rhs,
        tolerance: CERTIFICATE_TOLERANCE * (1.0 + lhs.abs() + rhs.abs()),
        binding: true,
    };
    let factor = 1.0 / (1.0 + alpha);
    finish(
        oracle,
        state,
        Next {
            x,
            v: Some(v_next),
            y: Some(y),
            gamma: Some(gamma_next),
            alpha: StepRule::NewApg.alpha(gamma_next, lip),
            slack: Some(state.lyapunov * factor - lyapunov),
            lyapunov,
            checks: vec![check],
            factor,
        },
    )
}

/// Advances `state` by one iteration of `kind`.
pub fn step(oracle: &ProblemOracle, kind: &SolverKind, state: &SolverState) -> Result<SolverState> {
    match *kind {
        SolverKind::Ppa { alpha } => step_ppa(oracle, state, alpha),
        SolverKind::Gd { alpha } => step_gd(oracle, state, alpha),
        SolverKind::Pg { alpha } => step_pg(oracle, state, alpha),
        SolverKind::ScaledPpa { alpha } => step_scaled_ppa(oracle, state, alpha),
        SolverKind::HbGs { alpha } => step_hb_gs(oracle, state, alpha),
        SolverKind::Momentum { variant } => step_momentum(oracle, state, variant),
        SolverKind::AvdGs { .. } => step_avd(oracle, state, AvdVariant::Gs),
        SolverKind::AvdGrad => step_avd(oracle, state, AvdVariant::Grad),
        SolverKind::AvdExtrap => step_avd(oracle, state, AvdVariant::Extrap),
        SolverKind::Nag => step_nag(oracle, state),
        SolverKind::Apg => step_apg(oracle, state),
        SolverKind::ApgFastGrad => step_apg_fast_grad(oracle, state),
        SolverKind::NewApg => step_new_apg(oracle, state),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub f_gap: f64,
    /// Certified Lyapunov quantity (for NAG, `L_k - ‖∇f(x_k)‖²/(2L)`).
    pub lyapunov: f64,
    /// Closed-form rate bound `L₀·ρ_k` of the scheme, when one exists.
    pub bound: Option<f64>,
    /// Slack of the one-step inequality that produced this record.
    pub slack: Option<f64>,
    pub grad_norm: f64,
    pub alpha: f64,
    pub gamma: Option<f64>,
    /// Product of the per-step contraction factors.
    pub rho: f64,
    pub checks: Vec<Check>,
    pub flagged: bool,
}

/// Running data for the closed-form bounds.
struct BoundContext {
    l0: f64,
    gamma0: Option<f64>,
    r0: Option<f64>,
    t_sum: f64,
    log_p: f64,
}

fn closed_form_bound(
    oracle: &ProblemOracle,
    kind: &SolverKind,
    ctx: &BoundContext,
    k: usize,
) -> Option<f64> {
    let (mu, lip) = (oracle.mu(), oracle.lip());
    let kf = k as f64;
    let l0 = ctx.l0;
    match *kind {
        SolverKind::Ppa { alpha } => Some(l0 * (-kf * (mu * alpha).ln_1p()).exp()),
        SolverKind::Gd { alpha } => kind
            .is_certified(oracle)
            .then(|| l0 * (1.0 - mu * alpha).max(0.0).powf(kf)),
        SolverKind::Pg { .. } if !kind.is_certified(oracle) => None,
        SolverKind::Pg { .. } if mu > 0.0 => Some(l0 * (-kf * (mu / lip).ln_1p()).exp()),
        SolverKind::Pg { .. } => {
            let r0 = ctx.r0?;
            let alpha = 1.0 / (2.0 * lip * r0 * r0);
            sequence_decay(&DecayCase::ImplicitQuadratic { alpha }, l0, k).ok()
        }
        SolverKind::ScaledPpa { .. } => {
            let gamma0 = ctx.gamma0?;
            let growth = if mu == 0.0 {
                ctx.t_sum
            } else {
                ctx.log_p.exp_m1() / mu
            };
            Some(l0 / (1.0 + gamma0 * growth))
        }
        SolverKind::HbGs { .. } | SolverKind::AvdGs { .. } => None,
        SolverKind::Momentum { variant } => {
            let alpha = momentum_alpha(mu, lip, variant).ok()?;
            Some(l0 * (-kf * alpha.ln_1p()).exp())
        }
        _ => {
            let rule = kind.rate_rule()?;
            rho_bound(rule, ctx.gamma0?, mu, lip, k)
                .ok()
                .map(|rho| l0 * rho)
        }
    }
}

fn record(
    oracle: &ProblemOracle,
    kind: &SolverKind,
    state: &SolverState,
    ctx: &BoundContext,
    prev_lyapunov: f64,
) -> TraceRecord {
    let mut checks = state.checks.clone();
    if matches!(kind, SolverKind::ApgFastGrad) && state.k > 0 {
        let lhs = state.lyapunov + state.grad_sum / (4.0 * oracle.lip());
        let rhs = state.rho * ctx.l0;
        checks.push(Check {
            name: "accumulated_gradient",
            slack: rhs - lhs,
            tolerance: tolerance(ctx.l0),
            binding: true,
        });
    }
    let flagged = state.slack.is_some_and(|s| s < -tolerance(prev_lyapunov))
        || checks.iter().any(|c| c.binding && !c.passed());
    TraceRecord {
        k: state.k,
        f_gap: oracle.optimality_gap(&state.x),
        lyapunov: state.lyapunov,
        bound: closed_form_bound(oracle, kind, ctx, state.k),
        slack: state.slack,
        grad_norm: state.last_grad_norm,
        alpha: state.alpha,
        gamma: state.gamma,
        rho: state.rho,
        checks,
        flagged,
    }
}

/// Runs `iters` iterations from `x0` (with defaults `v₀ = x₀`, `γ₀ = L`).
pub fn run(
    oracle: &ProblemOracle,
    kind: &SolverKind,
    x0: &Vector,
    v0: Option<&Vector>,
    gamma0: Option<f64>,
    iters: usize,
) -> Result<Vec<TraceRecord>> {
    run_until(oracle, kind, x0, v0, gamma0, iters, None)
}

/// As [`run`], stopping early once the gradient-mapping norm drops below
/// `stop_tolerance`.
pub fn run_until(
    oracle: &ProblemOracle,
    kind: &SolverKind,
    x0: &Vector,
    v0: Option<&Vector>,
    gamma0: Option<f64>,
    iters: usize,
    stop_tolerance: Option<f64>,
) -> Result<Vec<TraceRecord>> {
    // the sublinear proximal-gradient certificate needs R₀ of the level set of x₀
    let with_level;
    let oracle = if matches!(kind, SolverKind::Pg { .. }) && oracle.mu() == 0.0 {
        with_level = oracle.clone().with_initial_level(x0)?;
        &with_level
    } else {
        oracle
    };
    let mut state = SolverState::initial(oracle, kind, x0.clone(), v0.cloned(), gamma0)?;
    let mut ctx = BoundContext {
        l0: state.lyapunov,
        gamma0: state.gamma,
        r0: oracle.radius_r0(),
        t_sum: 0.0,
        log_p: 0.0,
    };
    let mut trace = Vec::with_capacity(iters + 1);
    trace.push(record(oracle, kind, &state, &ctx, state.lyapunov));
    let mut flagged = 0usize;
    for _ in 0..iters {
        if stop_tolerance.is_some_and(|tol| state.last_grad_norm < tol) {
            break;
        }
        if let (SolverKind::ScaledPpa { alpha }, Some(gamma)) = (kind, state.gamma) {
            let t = alpha / gamma;
            ctx.t_sum += t;
            ctx.log_p += (t * oracle.mu()).ln_1p();
        }
        let next = step(oracle, kind, &state)?;
        let row = record(oracle, kind, &next, &ctx, state.lyapunov);
        if row.flagged {
            if flagged == 0 {
                log::warn!(
                    "{} on {}: certificate violated at k = {} (slack {:?})",
                    kind.name(),
                    oracle.name(),
                    row.k,
                    row.slack
                );
            }
            flagged += 1;
        }
        trace.push(row);
        state = next;
    }
    log::debug!(
        "{} on {}: {} iterations, final Lyapunov {:e}, {} flagged steps",
        kind.name(),
        oracle.name(),
        state.k,
        state.lyapunov,
        flagged
    );
    Ok(trace)
}
