use std::path::PathBuf;

use optflow_core::solvers::TraceRecord;
use serde::Serialize;

/// A measured ratio may exceed its bound by at most `RATE_TOLERANCE·(1 + bound)`.
pub const RATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    /// The scheme has no certificate for these parameters; nothing was compared.
    Uncertified,
    Diverged,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass | Status::Uncertified => 0,
            Status::Fail | Status::Diverged => 1,
        }
    }
}

/// Worst of several exit codes.
pub fn combined_exit_code(codes: impl IntoIterator<Item = u8>) -> u8 {
    codes.into_iter().max().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub k: usize,
    /// `L_k/L_0`.
    pub ratio: f64,
    /// Closed-form bound on `L_k/L_0`.
    pub rho: Option<f64>,
    /// `ratio - rho`.
    pub violation: Option<f64>,
}

/// Comparison of a trace against the closed-form bound of its scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub name: String,
    pub solver: String,
    pub problem: String,
    pub status: Status,
    pub steps: usize,
    pub lyapunov0: f64,
    pub final_ratio: f64,
    /// Largest `ratio - rho` over the compared steps.
    pub max_violation: Option<f64>,
    pub worst_k: Option<usize>,
    /// Steps whose one-step certificate or binding check failed.
    pub flagged_steps: usize,
    pub first_flagged: Option<usize>,
    pub output: Option<PathBuf>,
    pub error: Option<String>,
    pub rows: Vec<RatePoint>,
}

impl RateReport {
    pub fn from_trace(name: &str, solver: &str, problem: &str, trace: &[TraceRecord]) -> Self {
        let l0 = trace.first().map_or(0.0, |r| r.lyapunov);
        let scale = if l0 > 0.0 { l0 } else { 1.0 };
        let rows: Vec<RatePoint> = trace
            .iter()
            .map(|r| {
                let ratio = r.lyapunov / scale;
                let rho = r.bound.map(|b| b / scale);
                RatePoint {
                    k: r.k,
                    ratio,
                    rho,
                    violation: rho.map(|rho| ratio - rho),
                }
            })
            .collect();

        let mut max_violation: Option<f64> = None;
        let mut worst_k = None;
        let mut exceeded = false;
        for row in &rows {
            let (Some(rho), Some(v)) = (row.rho, row.violation) else {
                continue;
            };
            if max_violation.is_none_or(|m| v > m) {
                max_violation = Some(v);
                worst_k = Some(row.k);
            }
            exceeded |= !(v <= RATE_TOLERANCE * (1.0 + rho));
        }
        let flagged: Vec<usize> = trace.iter().filter(|r| r.flagged).map(|r| r.k).collect();
        let certified = trace.iter().skip(1).any(|r| r.bound.is_some());
        let status = if !certified {
            Status::Uncertified
        } else if exceeded || !flagged.is_empty() {
            Status::Fail
        } else {
            Status::Pass
        };
        RateReport {
            name: name.into(),
            solver: solver.into(),
            problem: problem.into(),
            status,
            steps: trace.len().saturating_sub(1),
            lyapunov0: l0,
            final_ratio: rows.last().map_or(0.0, |r| r.ratio),
            max_violation,
            worst_k,
            flagged_steps: flagged.len(),
            first_flagged: flagged.first().copied(),
            output: None,
            error: None,
            rows,
        }
    }

    pub fn diverged(name: &str, solver: &str, problem: &str, error: String) -> Self {
        RateReport {
            name: name.into(),
            solver: solver.into(),
            problem: problem.into(),
            status: Status::Diverged,
            steps: 0,
            lyapunov0: f64::NAN,
            final_ratio: f64::NAN,
            max_violation: None,
            worst_k: None,
            flagged_steps: 0,
            first_flagged: None,
            output: None,
            error: Some(error),
            rows: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}
