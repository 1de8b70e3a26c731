//! Parameter sequences shared by the accelerated schemes.
//!
//! `γ` follows the implicit Euler step of `γ' = μ - γ`,
//! `γ_{k+1} = (γ_k + α_k μ)/(1 + α_k)`, and the step size `α_k` is tied to
//! `γ_k` by a quadratic `Lα² = γ(1 + Bα)`. The product
//! `ρ_k = Π 1/(1 + α_i)` is the contraction factor every certificate is
//! measured against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `γ_{k+1} = (γ_k + α_k μ)/(1 + α_k)`.
pub fn gamma_step(gamma: f64, alpha: f64, mu: f64) -> Result<f64> {
    if !(gamma > 0.0) || !(alpha > 0.0) || !(mu >= 0.0) {
        return Err(Error::Schedule(format!(
            "gamma_step needs γ > 0, α > 0, μ >= 0 (got γ = {gamma}, α = {alpha}, μ = {mu})"
        )));
    }
    Ok((gamma + alpha * mu) / (1.0 + alpha))
}

/// Closed form of `γ_k` in terms of `t_i = α_i/γ_i`:
/// `γ_k = γ₀P/(1 + γ₀(P - 1)/μ)` with `P = Π(1 + t_i μ)`, where `(P - 1)/μ`
/// is read as `Σ t_i` when `μ = 0`.
pub fn gamma_closed_form(gamma0: f64, mu: f64, t_seq: &[f64]) -> f64 {
    if mu == 0.0 {
        let total: f64 = t_seq.iter().sum();
        return gamma0 / (1.0 + gamma0 * total);
    }
    // P - 1 accumulated through log1p/expm1 keeps precision when t_i μ is small
    let log_p: f64 = t_seq.iter().map(|t| (t * mu).ln_1p()).sum();
    let p = log_p.exp();
    gamma0 * p / (1.0 + gamma0 * log_p.exp_m1() / mu)
}

/// Positive root of `Lα² = γ(1 + Bα)`.
pub fn solve_alpha_quadratic(gamma: f64, lip: f64, b_coef: f64) -> f64 {
    // -b = Bγ >= 0, so the '+' root has no cancellation
    let bg = b_coef * gamma;
    (bg + (bg * bg + 4.0 * lip * gamma).sqrt()) / (2.0 * lip)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StepRule {
    /// `Lα² = γ` (accelerated proximal gradient with splitting).
    SplitApg,
    /// `Lα² = γ(1 + α)`.
    NewApg,
    /// `Lα² = γ(2 + α)`.
    Nag,
    /// `α = √(γ/(4L))`, `β = 1/(2Lα)`.
    FastGradApg,
    /// `Lα² = γ(1 + Bα)` for an arbitrary `B >= 0`.
    General { b: f64 },
    /// `Lα² = 1 + α√γ` with `γ_{k+1} = γ_k/(1 + α_k√γ_k)`.
    Avd,
}

impl StepRule {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "split_apg" | "b0" => StepRule::SplitApg,
            "new_apg" | "b1" => StepRule::NewApg,
            "nag" => StepRule::Nag,
            "fast_grad_apg" | "fast_grad" => StepRule::FastGradApg,
            "avd" => StepRule::Avd,
            other => {
                if let Some(b) = other.strip_prefix("b=") {
                    let b: f64 = b
                        .parse()
                        .map_err(|_| Error::Configuration(format!("bad B coefficient `{b}`")))?;
                    StepRule::General { b }
                } else {
                    return Err(Error::Configuration(format!("unknown step rule `{other}`")));
                }
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            StepRule::SplitApg => "split_apg".into(),
            StepRule::NewApg => "new_apg".into(),
            StepRule::Nag => "nag".into(),
            StepRule::FastGradApg => "fast_grad_apg".into(),
            StepRule::General { b } => format!("b={b}"),
            StepRule::Avd => "avd".into(),
        }
    }

    /// Step size `α_k` for the current `γ_k`.
    pub fn alpha(&self, gamma: f64, lip: f64) -> f64 {
        match *self {
            StepRule::SplitApg => (gamma / lip).sqrt(),
            StepRule::NewApg => solve_alpha_quadratic(gamma, lip, 1.0),
            StepRule::Nag => (gamma + (gamma * gamma + 8.0 * lip * gamma).sqrt()) / (2.0 * lip),
            StepRule::FastGradApg => (gamma / (4.0 * lip)).sqrt(),
            StepRule::General { b } => solve_alpha_quadratic(gamma, lip, b),
            StepRule::Avd => avd_alpha(gamma, lip),
        }
    }

    /// Reduction to the `B`-form: returns `(B, L')` with `L'α² = γ(1 + Bα)`.
    fn canonical(&self, lip: f64) -> Option<(f64, f64)> {
        match *self {
            StepRule::SplitApg => Some((0.0, lip)),
            StepRule::NewApg => Some((1.0, lip)),
            StepRule::Nag => Some((0.5, 0.5 * lip)),
            StepRule::FastGradApg => Some((0.0, 4.0 * lip)),
            StepRule::General { b } => Some((b, lip)),
            StepRule::Avd => None,
        }
    }
}

/// Heavy-ball step sizes satisfying `Lα² <= μ(1 + α)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumVariant {
    /// `α = √(μ/L)`.
    #[default]
    Sqrt,
    /// `α = (μ + √(μ² + 4Lμ))/(2L)`.
    Root,
}

pub fn momentum_alpha(mu: f64, lip: f64, variant: MomentumVariant) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Schedule("heavy-ball step sizes need μ > 0".into()));
    }
    if mu > lip {
        return Err(Error::Schedule(format!("μ = {mu} exceeds L = {lip}")));
    }
    Ok(match variant {
        MomentumVariant::Sqrt => (mu / lip).sqrt(),
        MomentumVariant::Root => solve_alpha_quadratic(mu, lip, 1.0),
    })
}

/// Positive root of `Lα² = 1 + α√γ`.
pub fn avd_alpha(gamma: f64, lip: f64) -> f64 {
    let s = gamma.max(0.0).sqrt();
    (s + (gamma.max(0.0) + 4.0 * lip).sqrt()) / (2.0 * lip)
}

/// `γ_{k+1} = γ_k/(1 + α_k√γ_k)` for the AVD schemes.
pub fn avd_gamma_step(gamma: f64, alpha: f64) -> f64 {
    gamma / (1.0 + alpha * gamma.sqrt())
}

/// Closed-form bound on `ρ_k` for `γ₀ = rL >= μ`.
///
/// For `B = 0`: `min{((c+1)/(c+1+√r k))², (1+√(μ/L))^{-k}}` with
/// `c = √(1 + max(r, √r))`; since `α_k <= √r` the increment of `1/√ρ_k` is at
/// least `√r/(1 + √(1 + √r))`, so `c = √(1 + r)` is only valid for `r >= 1`.
/// For `B >= ½`: `min{(2/(2+√r k))², (1+√(μ/L))^{-k}}`. Named rules are
/// rescaled to one of these by their effective `L'`. The AVD rule bounds
/// `γ_k/γ₀` by `(1 + √r/(2+√r))²(2/(2+√r k))²`.
pub fn rho_bound(rule: StepRule, gamma0: f64, mu: f64, lip: f64, k: usize) -> Result<f64> {
    if !(gamma0 > 0.0 && lip > 0.0 && mu >= 0.0) {
        return Err(Error::Schedule(format!(
            "rate bound needs γ₀ > 0, L > 0, μ >= 0 (got γ₀ = {gamma0}, L = {lip}, μ = {mu})"
        )));
    }
    let kf = k as f64;
    let Some((b, lip_eff)) = rule.canonical(lip) else {
        let sr = (gamma0 / lip).sqrt();
        let front = 1.0 + sr / (2.0 + sr);
        let tail = 2.0 / (2.0 + sr * kf);
        return Ok(front * front * tail * tail);
    };
    if gamma0 < mu {
        return Err(Error::Schedule(format!(
            "accelerated rate bound assumes γ₀ >= μ (got γ₀ = {gamma0}, μ = {mu})"
        )));
    }
    let sr = (gamma0 / lip_eff).sqrt();
    let sublinear = if b == 0.0 {
        let r = gamma0 / lip_eff;
        let c = (1.0 + r.max(r.sqrt())).sqrt() + 1.0;
        (c / (c + sr * kf)).powi(2)
    } else if b >= 0.5 {
        (2.0 / (2.0 + sr * kf)).powi(2)
    } else {
        return Err(Error::UnsupportedParameter(format!(
            "no rate bound is available for B = {b} in (0, 1/2)"
        )));
    };
    let linear = (-kf * (mu / lip_eff).sqrt().ln_1p()).exp();
    Ok(sublinear.min(linear))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleState {
    pub k: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// `Π_{i<k} 1/(1 + α_i)`; for the AVD rule `Π 1/(1 + α_i√γ_i)`.
    pub rho: f64,
    /// `t_k = α_k/γ_k`.
    pub t_scaled: f64,
    /// `β_k`, only for the fast-gradient rule.
    pub beta: Option<f64>,
}

impl ScheduleState {
    pub fn new(rule: StepRule, gamma0: f64, lip: f64) -> Self {
        let alpha = rule.alpha(gamma0, lip);
        Self {
            k: 0,
            gamma: gamma0,
            alpha,
            rho: 1.0,
            t_scaled: alpha / gamma0,
            beta: matches!(rule, StepRule::FastGradApg).then(|| 1.0 / (2.0 * lip * alpha)),
        }
    }

    /// Advances `γ` and `ρ` with the current `α`, then recomputes `α`.
    pub fn advance(&self, rule: StepRule, mu: f64, lip: f64) -> Self {
        let (gamma, factor) = match rule {
            StepRule::Avd => {
                let growth = 1.0 + self.alpha * self.gamma.sqrt();
                (self.gamma / growth, growth)
            }
            _ => (
                (self.gamma + self.alpha * mu) / (1.0 + self.alpha),
                1.0 + self.alpha,
            ),
        };
        let alpha = rule.alpha(gamma, lip);
        Self {
            k: self.k + 1,
            gamma,
            alpha,
            rho: self.rho / factor,
            t_scaled: alpha / gamma,
            beta: matches!(rule, StepRule::FastGradApg).then(|| 1.0 / (2.0 * lip * alpha)),
        }
    }
}

/// Runs the schedule for `kmax` steps starting from `γ₀`.
pub fn schedule(rule: StepRule, gamma0: f64, mu: f64, lip: f64, kmax: usize) -> Vec<ScheduleState> {
    let mut out = Vec::with_capacity(kmax + 1);
    let mut state = ScheduleState::new(rule, gamma0, lip);
    out.push(state);
    for _ in 0..kmax {
        state = state.advance(rule, mu, lip);
        out.push(state);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub k: usize,
    pub rho_measured: f64,
    pub rho_bound: f64,
    /// `rho_bound - rho_measured`.
    pub slack: f64,
}

/// Measured `ρ_k` against [`rho_bound`] for `L = 1`, `γ₀ = r`, `μ = mu_over_l`.
pub fn rate_table(rule: StepRule, r: f64, mu_over_l: f64, kmax: usize) -> Result<Vec<RateRow>> {
    let (lip, gamma0, mu) = (1.0, r, mu_over_l);
    rho_bound(rule, gamma0, mu, lip, 0)?;
    schedule(rule, gamma0, mu, lip, kmax)
        .into_iter()
        .map(|s| {
            let bound = rho_bound(rule, gamma0, mu, lip, s.k)?;
            Ok(RateRow {
                k: s.k,
                rho_measured: s.rho,
                rho_bound: bound,
                slack: bound - s.rho,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn gamma_step_examples() {
        assert_eq!(gamma_step(1.0, 1.0, 0.0).unwrap(), 0.5);
        assert_eq!(gamma_step(0.7, 3.0, 0.7).unwrap(), 0.7);
        assert!(close(gamma_step(2.0, 0.5, 1.0).unwrap(), 5.0 / 3.0, 1e-15));
        assert!(matches!(gamma_step(0.0, 1.0, 0.0), Err(Error::Schedule(_))));
        assert!(gamma_step(1.0, -1.0, 0.0).is_err());
        assert!(gamma_step(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn gamma_closed_form_examples() {
        assert!(close(
            gamma_closed_form(1.0, 0.0, &[1.0, 1.0]),
            1.0 / 3.0,
            1e-15
        ));
        assert!(close(
            gamma_closed_form(1.0, 1.0, &[0.3, 2.0, 7.0]),
            1.0,
            1e-15
        ));
        assert!(close(gamma_closed_form(2.0, 0.5, &[1.0]), 1.0, 1e-15));
        assert!(close(gamma_step(2.0, 2.0, 0.5).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn alpha_roots() {
        assert_eq!(solve_alpha_quadratic(3.0, 3.0, 0.0), 1.0);
        assert!(close(
            solve_alpha_quadratic(1.0, 1.0, 1.0),
            (1.0 + 5f64.sqrt()) / 2.0,
            1e-15
        ));
        assert!(close(
            solve_alpha_quadratic(1.0, 1.0, 2.0),
            1.0 + 2f64.sqrt(),
            1e-15
        ));
        // tiny γ keeps full relative accuracy
        let a = solve_alpha_quadratic(1e-20, 1.0, 1.0);
        assert!(close(1.0 * a * a / (1e-20 * (1.0 + a)), 1.0, 1e-12));
        // named rules reproduce their defining equations
        for &(g, l) in &[(0.3, 2.0), (5.0, 1.0), (1e-6, 10.0)] {
            let a = StepRule::Nag.alpha(g, l);
            assert!(close(l * a * a, g * (2.0 + a), 1e-13));
            let a = StepRule::NewApg.alpha(g, l);
            assert!(close(l * a * a, g * (1.0 + a), 1e-13));
            let a = StepRule::FastGradApg.alpha(g, l);
            assert!(close(4.0 * l * a * a, g, 1e-13));
        }
    }

    #[test]
    fn rho_bound_examples() {
        assert_eq!(
            rho_bound(StepRule::SplitApg, 1.0, 0.0, 1.0, 0).unwrap(),
            1.0
        );
        for k in [0usize, 1, 5, 100] {
            let b = rho_bound(StepRule::NewApg, 1.0, 0.0, 1.0, k).unwrap();
            assert!(close(b, (2.0 / (2.0 + k as f64)).powi(2), 1e-15));
        }
        for k in [3usize, 10, 40] {
            let b = rho_bound(StepRule::Nag, 1.0, 1.0, 1.0, k).unwrap();
            let linear = (1.0 + 2f64.sqrt()).powi(-(k as i32));
            let sublinear = (2f64.sqrt() / (2f64.sqrt() + k as f64)).powi(2);
            assert!(close(b, linear.min(sublinear), 1e-14));
            assert!(close(b, linear, 1e-14));
        }
    }

    #[test]
    fn b0_bound_dominates_the_product_for_small_r() {
        // with c = √(1 + r) the first step already fails for r = 1/4:
        // ρ₁ = 1/(1 + 1/2) = 2/3 but ((√1.25 + 1)/(√1.25 + 1.5))² ≈ 0.6545
        let c = 1.25f64.sqrt() + 1.0;
        assert!((c / (c + 0.5)).powi(2) < 2.0 / 3.0);
        for rule in [
            StepRule::SplitApg,
            StepRule::FastGradApg,
            StepRule::NewApg,
            StepRule::Nag,
        ] {
            for r in [0.01f64, 0.25, 1.0, 4.0, 30.0] {
                for mu in [0.0, 1e-3] {
                    let rows = rate_table(rule, r.max(mu), mu, 2000).unwrap();
                    let worst = rows
                        .iter()
                        .map(|row| row.slack)
                        .fold(f64::INFINITY, f64::min);
                    assert!(worst >= -1e-15, "{} r = {r}: {worst}", rule.name());
                }
            }
        }
    }

    #[test]
    fn rho_bound_rejects_invalid_hypotheses() {
        assert!(matches!(
            rho_bound(StepRule::General { b: 0.25 }, 1.0, 0.0, 1.0, 3),
            Err(Error::UnsupportedParameter(_))
        ));
        assert!(matches!(
            rho_bound(StepRule::SplitApg, 0.5, 1.0, 1.0, 3),
            Err(Error::Schedule(_))
        ));
    }

    #[test]
    fn momentum_alpha_examples() {
        assert_eq!(
            momentum_alpha(2.0, 2.0, MomentumVariant::Sqrt).unwrap(),
            1.0
        );
        assert!(close(
            momentum_alpha(2.0, 2.0, MomentumVariant::Root).unwrap(),
            (1.0 + 5f64.sqrt()) / 2.0,
            1e-15
        ));
        let a = momentum_alpha(0.01, 1.0, MomentumVariant::Sqrt).unwrap();
        assert!(close(a, 0.1, 1e-15));
        assert!(a * a <= 0.01 * (1.0 + a));
        assert!(momentum_alpha(0.0, 1.0, MomentumVariant::Sqrt).is_err());
    }

    #[test]
    fn avd_alpha_examples() {
        assert_eq!(avd_alpha(0.0, 1.0), 1.0);
        assert!(close(avd_alpha(4.0, 1.0), 1.0 + 2f64.sqrt(), 1e-15));
        assert!(avd_alpha(1e-8, 1.0) > 1.0);
        let a = avd_alpha(0.7, 3.0);
        assert!(close(3.0 * a * a, 1.0 + a * 0.7f64.sqrt(), 1e-14));
    }

    #[test]
    fn schedule_state_tracks_products() {
        let states = schedule(StepRule::NewApg, 1.0, 0.0, 1.0, 20);
        let mut rho = 1.0;
        for pair in states.windows(2) {
            rho /= 1.0 + pair[0].alpha;
            assert!(close(pair[1].rho, rho, 1e-15));
            assert!(pair[1].rho <= pair[1].gamma / 1.0 + 1e-15);
        }
        let fast = ScheduleState::new(StepRule::FastGradApg, 1.0, 1.0);
        assert!(close(fast.alpha * fast.beta.unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn rate_table_rows() {
        let rows = rate_table(StepRule::Nag, 1.0, 0.0, 50).unwrap();
        assert_eq!(rows.len(), 51);
        assert!(rows.iter().all(|r| r.slack >= -1e-15));
        assert!(StepRule::from_name("b=0.3").is_ok());
        assert!(StepRule::from_name("nope").is_err());
    }
}
