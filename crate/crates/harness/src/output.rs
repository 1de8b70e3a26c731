//! CSV emission. Floats are written with 17 significant digits so that every
//! value reads back to the identical double; absent values are empty fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use optflow_core::flows::TrajectoryRow;
use optflow_core::schedules::RateRow;
use optflow_core::solvers::TraceRecord;

use crate::error::{HarnessError, Result};

pub const TRACE_HEADER: [&str; 8] = [
    "k",
    "f_gap",
    "lyapunov",
    "bound",
    "slack",
    "grad_norm",
    "alpha",
    "gamma",
];
pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "lyapunov", "bound", "x_norm_err", "gamma"];
pub const RATES_HEADER: [&str; 4] = ["k", "rho_measured", "rho_bound", "slack"];

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn optional(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn write_rows<W, R, I>(out: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    R: IntoIterator<Item = String>,
    I: IntoIterator<Item = R>,
{
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_trace<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    write_rows(
        out,
        &TRACE_HEADER,
        trace.iter().map(|r| {
            [
                r.k.to_string(),
                float(r.f_gap),
                float(r.lyapunov),
                optional(r.bound),
                optional(r.slack),
                float(r.grad_norm),
                float(r.alpha),
                optional(r.gamma),
            ]
        }),
    )
}

pub fn write_trajectory<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<()> {
    write_rows(
        out,
        &TRAJECTORY_HEADER,
        rows.iter().map(|r| {
            [
                float(r.t),
                float(r.lyapunov),
                float(r.bound),
                float(r.x_norm_err),
                optional(r.gamma),
            ]
        }),
    )
}

pub fn write_rates<W: Write>(out: W, rows: &[RateRow]) -> Result<()> {
    write_rows(
        out,
        &RATES_HEADER,
        rows.iter().map(|r| {
            [
                r.k.to_string(),
                float(r.rho_measured),
                float(r.rho_bound),
                float(r.slack),
            ]
        }),
    )
}

/// Creates `path` and hands a buffered writer to `emit`.
pub fn to_file(path: &Path, emit: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    emit(BufWriter::new(file))
}
