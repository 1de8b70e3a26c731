use std::path::{Path, PathBuf};

use optflow_core::flows::{
    continuous_decay_check, FlowKind, FlowModel, TrajectoryRow, DECAY_TOLERANCE,
};
use optflow_core::lyapunov::{
    strong_condition_check, Pairing, StrongConditionReport, SAMPLE_RADIUS,
};
use optflow_core::problems::ProblemSpec;
use optflow_core::schedules::{rate_table, RateRow, StepRule};
use optflow_core::solvers::run_until;
use optflow_core::{Error, ProblemOracle, Vector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{default_start, ExperimentConfig, Prepared};
use crate::error::{HarnessError, Result};
use crate::output;
use crate::report::{RateReport, Status, RATE_TOLERANCE};

fn divergence_message(err: &Error) -> Option<String> {
    matches!(err, Error::Divergence { .. }).then(|| err.to_string())
}

/// Runs a prepared experiment, writes its trace to `out` and compares it
/// with the scheme's closed-form bound.
pub fn execute(
    config: &ExperimentConfig,
    prepared: &Prepared,
    out: Option<&Path>,
) -> Result<RateReport> {
    let oracle = &prepared.oracle;
    let label = config.label();
    let trace = match run_until(
        oracle,
        &config.solver,
        &prepared.x0,
        prepared.v0.as_ref(),
        config.gamma0,
        config.iters,
        config.stop_tolerance,
    ) {
        Ok(trace) => trace,
        Err(err) => {
            let message = divergence_message(&err).ok_or(err)?;
            log::warn!("{label}: {message}");
            return Ok(RateReport::diverged(
                &label,
                config.solver.name(),
                oracle.name(),
                message,
            ));
        }
    };
    let mut report = RateReport::from_trace(&label, config.solver.name(), oracle.name(), &trace);
    if let Some(path) = out {
        output::to_file(path, |w| output::write_trace(w, &trace))?;
        report.output = Some(path.to_path_buf());
    }
    log::info!(
        "{label}: {:?} after {} steps, L_k/L_0 = {:.3e}, max violation {:?}",
        report.status,
        report.steps,
        report.final_ratio,
        report.max_violation
    );
    Ok(report)
}

pub fn cmd_run(config: &ExperimentConfig, out: Option<&Path>) -> Result<RateReport> {
    let prepared = config.prepare()?;
    execute(config, &prepared, out.or(config.output.as_deref()))
}

/// Validates every experiment, then runs them on `jobs` threads. Reports come
/// back in input order.
pub fn cmd_run_batch(
    configs: &[ExperimentConfig],
    out: Option<&Path>,
    jobs: usize,
) -> Result<Vec<RateReport>> {
    if out.is_some() && configs.len() > 1 {
        return Err(HarnessError::Usage(
            "--out applies to a single experiment; set `output` per experiment in a batch".into(),
        ));
    }
    if jobs == 0 {
        return Err(HarnessError::Usage("--jobs must be at least 1".into()));
    }
    let prepared = configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.prepare().map_err(|e| match e {
                HarnessError::Core(core) => HarnessError::Usage(format!("experiment {i}: {core}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| {
        configs
            .par_iter()
            .zip(prepared.par_iter())
            .map(|(config, prepared)| execute(config, prepared, out.or(config.output.as_deref())))
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct FlowRequest {
    pub model: FlowKind,
    pub problem: ProblemSpec,
    pub t_end: f64,
    pub dt: f64,
    /// Pairing to certify; chosen from the model and problem when absent.
    pub pairing: Option<Pairing>,
    pub x0: Option<Vec<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    pub model: String,
    pub pairing: String,
    pub problem: String,
    pub status: Status,
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub points: usize,
    pub tolerance: f64,
    /// Largest `L(t)/bound(t)`.
    pub max_ratio: Option<f64>,
    pub first_violation_t: Option<f64>,
    pub final_lyapunov: Option<f64>,
    pub output: Option<PathBuf>,
    pub error: Option<String>,
}

/// Pairing certified for a model by default.
pub fn default_pairing(model: FlowKind, oracle: &ProblemOracle) -> Pairing {
    match model {
        FlowKind::Gradient if oracle.mu() > 0.0 => Pairing::GradientStrong,
        FlowKind::Gradient => Pairing::GradientConvex,
        FlowKind::ScaledGradient => Pairing::ScaledGradient,
        FlowKind::HeavyBall => Pairing::HeavyBall,
        FlowKind::AvdR3 => Pairing::Avd,
        FlowKind::Hnag => Pairing::Hnag,
    }
}

/// Integrates a continuous model and checks the decay implied by its pairing.
/// Returns the report together with the trajectory rows.
pub fn cmd_flow(request: &FlowRequest) -> Result<(FlowReport, Vec<TrajectoryRow>)> {
    let mut oracle = request.problem.build()?;
    let x0 = match &request.x0 {
        Some(x) => Vector::from_vec(x.clone()),
        None => default_start(oracle.dim(), request.seed),
    };
    oracle.check_dim(&x0)?;
    let pairing = request
        .pairing
        .unwrap_or_else(|| default_pairing(request.model, &oracle));
    if pairing.on_sublevel_set() {
        oracle = oracle.with_initial_level(&x0)?;
    }
    pairing.check_problem(&oracle)?;
    let model = FlowModel::new(request.model, &oracle)?;
    let state0 = model.initial_state(x0);
    let mut report = FlowReport {
        model: request.model.name().into(),
        pairing: pairing.name().into(),
        problem: oracle.name().into(),
        status: Status::Diverged,
        t_start: state0.t,
        t_end: request.t_end,
        dt: request.dt,
        points: 0,
        tolerance: DECAY_TOLERANCE,
        max_ratio: None,
        first_violation_t: None,
        final_lyapunov: None,
        output: None,
        error: None,
    };
    match continuous_decay_check(&model, pairing, &state0, request.t_end, request.dt) {
        Ok(decay) => {
            report.status = if decay.passed {
                Status::Pass
            } else {
                Status::Fail
            };
            report.points = decay.rows.len();
            report.max_ratio = Some(decay.max_ratio);
            report.first_violation_t = decay.first_violation_t;
            report.final_lyapunov = decay.rows.last().map(|r| r.lyapunov);
            Ok((report, decay.rows))
        }
        Err(err) => {
            report.error = Some(divergence_message(&err).ok_or(err)?);
            Ok((report, Vec::new()))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub status: Status,
    #[serde(flatten)]
    pub check: StrongConditionReport,
}

/// Samples the strong Lyapunov condition of `pairing`. Without a problem the
/// pairing's default problem is used; pairings on a sublevel set get the level
/// of `x* + R·1`.
pub fn cmd_verify_lyapunov(
    pairing: Pairing,
    problem: Option<&ProblemSpec>,
    samples: usize,
    seed: u64,
    c_override: Option<f64>,
) -> Result<VerifyReport> {
    if samples == 0 {
        return Err(HarnessError::Usage("--samples must be positive".into()));
    }
    let oracle = match problem {
        Some(spec) => {
            let oracle = spec.build()?;
            if pairing.on_sublevel_set() {
                let x0 = oracle.x_star().add_scalar(SAMPLE_RADIUS);
                oracle.with_initial_level(&x0)?
            } else {
                oracle
            }
        }
        None => pairing.default_problem()?,
    };
    let check = strong_condition_check(pairing, &oracle, samples, seed, c_override)?;
    log::info!(
        "{}: min slack {:.3e} over {} samples, {} violations",
        check.pairing,
        check.min_slack,
        check.accepted,
        check.violations
    );
    Ok(VerifyReport {
        status: if check.passed {
            Status::Pass
        } else {
            Status::Fail
        },
        check,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesReport {
    pub rule: String,
    pub r: f64,
    pub mu_over_l: f64,
    pub kmax: usize,
    pub status: Status,
    /// Smallest `rho_bound - rho_measured`.
    pub min_slack: f64,
    pub worst_k: usize,
    pub output: Option<PathBuf>,
}

/// Tabulates the measured product `ρ_k` against the closed-form bound.
pub fn cmd_rates(
    rule: StepRule,
    r: f64,
    mu_over_l: f64,
    kmax: usize,
) -> Result<(RatesReport, Vec<RateRow>)> {
    let rows = rate_table(rule, r, mu_over_l, kmax)?;
    let worst = rows
        .iter()
        .min_by(|a, b| a.slack.total_cmp(&b.slack))
        .expect("the table has a k = 0 row");
    let passed = rows
        .iter()
        .all(|row| row.slack >= -RATE_TOLERANCE * (1.0 + row.rho_bound));
    let report = RatesReport {
        rule: rule.name(),
        r,
        mu_over_l,
        kmax,
        status: if passed { Status::Pass } else { Status::Fail },
        min_slack: worst.slack,
        worst_k: worst.k,
        output: None,
    };
    Ok((report, rows))
}
