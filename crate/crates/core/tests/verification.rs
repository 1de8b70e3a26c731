use optflow_core::flows::{continuous_decay_check, integrate, FlowKind, FlowModel, FlowState};
use optflow_core::lyapunov::{
    sequence_decay, sequence_decay_oracle, strong_condition_check, DecayCase, LyapunovKind, Pairing,
};
use optflow_core::{ProblemOracle, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn every_pairing_passes_on_its_default_problem() {
    for pairing in Pairing::ALL {
        let problem = pairing.default_problem().unwrap();
        let report = strong_condition_check(pairing, &problem, 10_000, 0, None).unwrap();
        assert_eq!(report.accepted, 10_000, "{}", pairing.name());
        assert!(
            report.passed,
            "{} min slack {}",
            pairing.name(),
            report.min_slack
        );
    }
}

#[test]
fn inflated_constant_is_refuted() {
    let problem = Pairing::HeavyBall.default_problem().unwrap();
    let report =
        strong_condition_check(Pairing::HeavyBall, &problem, 10_000, 0, Some(3.0)).unwrap();
    assert!(!report.passed);
    assert!(report.min_slack < 0.0);
}

#[test]
fn pairing_hypotheses_are_enforced() {
    let convex = ProblemOracle::logcosh(2, 1.0).unwrap();
    assert!(strong_condition_check(Pairing::HeavyBall, &convex, 10, 0, None).is_err());
    // sublevel-set pairings need a stored level
    assert!(strong_condition_check(Pairing::GradientConvex, &convex, 10, 0, None).is_err());
    let lasso = ProblemOracle::random_lasso(10, 5, 0.1, 0).unwrap();
    assert!(strong_condition_check(Pairing::Hnag, &lasso, 10, 0, None).is_err());
}

#[test]
fn verifier_is_deterministic() {
    let problem = Pairing::Avd.default_problem().unwrap();
    let a = strong_condition_check(Pairing::Avd, &problem, 500, 9, None).unwrap();
    let b = strong_condition_check(Pairing::Avd, &problem, 500, 9, None).unwrap();
    assert_eq!(a.min_slack, b.min_slack);
    assert_eq!(a.argmin_state, b.argmin_state);
}

#[test]
fn gap_bounded_by_radius_times_gradient_on_sublevel_set() {
    let problem = Pairing::GradientConvex.default_problem().unwrap();
    let r0 = problem.radius_r0().unwrap();
    let level = problem.level_f0().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut inside = 0;
    for _ in 0..5000 {
        let x = Vector::from_fn(3, |_, _| rng.random_range(-10.0..10.0));
        if problem.eval_f(&x) > level {
            continue;
        }
        inside += 1;
        let gap = problem.optimality_gap(&x);
        assert!(gap <= r0 * problem.grad_h(&x).norm() + 1e-12);
        assert!((&x - problem.x_star()).norm() <= r0 * (1.0 + 1e-10));
    }
    assert!(inside > 100);
}

#[test]
fn lyapunov_gradients_match_finite_differences() {
    let problem = ProblemOracle::logcosh(3, 0.7).unwrap();
    let kinds = [
        LyapunovKind::OptGap,
        LyapunovKind::DistSq,
        LyapunovKind::CombinedMu,
        LyapunovKind::Scaled,
        LyapunovKind::Hb,
        LyapunovKind::AvdNag,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    for _ in 0..100 {
        let x = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
        let v = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
        let gamma = rng.random_range(0.1..5.0);
        let state = FlowState::new(0.0, x).with_v(v).with_gamma(gamma);
        for kind in kinds {
            let grad = kind.gradient(&problem, &state).unwrap();
            let eval = |s: &FlowState| kind.evaluate(&problem, s).unwrap();
            let check = |analytic: f64, plus: FlowState, minus: FlowState| {
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                assert!(
                    (analytic - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "{kind:?}: {analytic} vs {fd}"
                );
            };
            for i in 0..3 {
                let (mut p, mut m) = (state.clone(), state.clone());
                p.x[i] += h;
                m.x[i] -= h;
                check(grad.x[i], p, m);
                let (mut p, mut m) = (state.clone(), state.clone());
                p.v.as_mut().unwrap()[i] += h;
                m.v.as_mut().unwrap()[i] -= h;
                check(grad.v.as_ref().unwrap()[i], p, m);
            }
            let (mut p, mut m) = (state.clone(), state.clone());
            p.gamma = Some(gamma + h);
            m.gamma = Some(gamma - h);
            check(grad.gamma.unwrap(), p, m);
        }
    }
}

#[test]
fn strong_condition_holds_along_trajectories() {
    let problem = ProblemOracle::quadratic(vec![0.5, 2.0, 6.0], vec![1.0, 0.0, -1.0]).unwrap();
    for pairing in [
        Pairing::Hnag,
        Pairing::HeavyBall,
        Pairing::GradientStrong,
        Pairing::Avd,
    ] {
        let model = FlowModel::new(pairing.flow_kind().unwrap(), &problem).unwrap();
        let state0 = model.initial_state(Vector::from_column_slice(&[3.0, -2.0, 1.0]));
        let t_end = state0.t + 5.0;
        let lyap = pairing.lyapunov();
        for state in integrate(&model, &state0, t_end, 1e-2)
            .unwrap()
            .iter()
            .step_by(10)
        {
            let lhs = -lyap
                .gradient(&problem, state)
                .unwrap()
                .dot(&model.field(state).unwrap());
            let params = pairing.strong_params(&model, state).unwrap();
            let value = lyap.evaluate(&problem, state).unwrap();
            let rhs = params.c * value + params.p_sq;
            assert!(lhs - rhs >= -1e-9 * (1.0 + value), "{}", pairing.name());
        }
    }
}

#[test]
fn scaled_gradient_flow_decays_exponentially_on_logcosh() {
    let problem = ProblemOracle::logcosh(2, 1.0).unwrap();
    let model = FlowModel::new(FlowKind::ScaledGradient, &problem).unwrap();
    let s0 = model.initial_state(Vector::from_column_slice(&[2.0, -1.0]));
    let report = continuous_decay_check(&model, Pairing::ScaledGradient, &s0, 10.0, 1e-3).unwrap();
    assert!(report.passed, "max ratio {}", report.max_ratio);
    let last = report.rows.last().unwrap();
    assert!((last.bound - report.rows[0].lyapunov * (-10.0f64).exp()).abs() < 1e-12);
}

#[test]
fn heavy_ball_decays_exponentially() {
    let problem = ProblemOracle::quadratic(vec![1.0], vec![0.0]).unwrap();
    let model = FlowModel::new(FlowKind::HeavyBall, &problem).unwrap();
    let s0 = model.initial_state(Vector::from_column_slice(&[2.0]));
    let report = continuous_decay_check(&model, Pairing::HeavyBall, &s0, 10.0, 1e-3).unwrap();
    assert!(report.passed, "max ratio {}", report.max_ratio);
}

#[test]
fn avd_decays_like_inverse_square() {
    let problem = ProblemOracle::quadratic(vec![0.1, 1.0], vec![0.5, -0.5]).unwrap();
    let model = FlowModel::new(FlowKind::AvdR3, &problem).unwrap();
    let s0 = model.initial_state(Vector::from_column_slice(&[3.0, 2.0]));
    let report = continuous_decay_check(&model, Pairing::Avd, &s0, 100.0, 1e-3).unwrap();
    assert!(report.passed, "max ratio {}", report.max_ratio);
    // ∫ 2/s ds from 1 to t gives exactly L(1)/t²
    let l1 = report.rows[0].lyapunov;
    for row in report.rows.iter().step_by(9_000) {
        assert!((row.bound - l1 / (row.t * row.t)).abs() <= 1e-6 * l1 / (row.t * row.t));
    }
}

#[test]
fn gradient_flow_convex_algebraic_decay() {
    let problem = ProblemOracle::logcosh(2, 1.0).unwrap();
    let x0 = Vector::from_column_slice(&[3.0, -2.0]);
    let problem = problem.with_initial_level(&x0).unwrap();
    let model = FlowModel::new(FlowKind::Gradient, &problem).unwrap();
    let report = continuous_decay_check(
        &model,
        Pairing::GradientConvex,
        &FlowState::new(0.0, x0),
        10.0,
        1e-3,
    )
    .unwrap();
    assert!(report.passed, "max ratio {}", report.max_ratio);
}

#[test]
fn mismatched_pairing_is_rejected() {
    let problem = ProblemOracle::quadratic(vec![1.0], vec![0.0]).unwrap();
    let model = FlowModel::new(FlowKind::Gradient, &problem).unwrap();
    let s0 = FlowState::new(0.0, Vector::from_column_slice(&[1.0]));
    assert!(continuous_decay_check(&model, Pairing::HeavyBall, &s0, 1.0, 0.1).is_err());
}

#[test]
fn sequence_bounds_dominate_all_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = 10_000;
    let explicit: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..0.9)).collect();
    let implicit: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..3.0)).collect();
    let cases = [
        (DecayCase::Explicit { alphas: explicit }, 2.0),
        (DecayCase::Implicit { alphas: implicit }, 2.0),
        (DecayCase::ExplicitQuadratic { alpha: 0.4 }, 2.0),
        (DecayCase::ImplicitQuadratic { alpha: 1.5 }, 2.0),
        (DecayCase::ImplicitQuadratic { alpha: 0.01 }, 1.0),
    ];
    for (case, a0) in &cases {
        let report = sequence_decay_oracle(case, *a0, k, 100, 3).unwrap();
        assert!(report.passed, "{report:?}");
    }
}

#[test]
fn implicit_quadratic_bound_fails_beyond_threshold() {
    // αA₀ = 10: the extremal sequence exceeds (1+δ)A₀/(1+αA₀k) already at k = 1
    let (alpha, a0) = (10.0, 1.0_f64);
    let a1 = 2.0 * a0 / (1.0 + (1.0 + 4.0 * alpha * a0).sqrt());
    let delta = alpha * a0 / (1.0 + alpha * a0);
    let claimed = (1.0 + delta) * a0 / (1.0 + alpha * a0);
    assert!(a1 > 1.5 * claimed);
    assert!(sequence_decay(&DecayCase::ImplicitQuadratic { alpha }, a0, 1).is_err());
}
