use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::LevelFilter;
use optflow_core::flows::FlowKind;
use optflow_core::lyapunov::Pairing;
use optflow_core::schedules::StepRule;
use optflow_harness::commands::{self, FlowRequest};
use optflow_harness::config::{load_batch, load_problem};
use optflow_harness::report::combined_exit_code;
use optflow_harness::{output, HarnessError, Result};
use serde::Serialize;

/// Lyapunov-certified first-order methods: experiments and checks.
///
/// Reports are JSON on stdout. CSV goes to `--out` (or the experiment's
/// `output`); `rates` prints its table to stdout when `--out` is absent.
/// Exit status: 0 pass, 1 certificate failure or divergence, 2 usage error.
/// Logging on stderr is set by OPT_LOG_LEVEL = quiet | info | debug.
#[derive(Debug, Parser)]
#[command(name = "optflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment or a batch (a JSON array) and check its rate bound.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Experiments of a batch run concurrently on this many threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Integrate a continuous model with RK4 and check its decay bound.
    Flow {
        /// gradient, scaled_gradient, heavy_ball, avd_r3 or hnag.
        #[arg(long)]
        model: String,
        /// JSON problem description.
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        t_end: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        pairing: Option<String>,
        /// Comma-separated starting point; drawn from --seed when absent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the strong Lyapunov condition of a flow/Lyapunov pairing.
    VerifyLyapunov {
        #[arg(long)]
        pairing: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace the rate constant c.
        #[arg(long)]
        c: Option<f64>,
        /// JSON problem description; the pairing's default problem otherwise.
        #[arg(long)]
        problem: Option<PathBuf>,
    },
    /// Tabulate the measured ρ_k of a step-size rule against its bound (L = 1).
    Rates {
        /// split_apg (b0), new_apg (b1), nag, fast_grad_apg, avd, or b=<B>.
        #[arg(long)]
        rule: String,
        /// γ₀/L.
        #[arg(long)]
        r: f64,
        #[arg(long)]
        mu_over_l: f64,
        #[arg(long)]
        kmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_logging() -> Result<()> {
    let level = match std::env::var("OPT_LOG_LEVEL").as_deref() {
        Err(_) | Ok("info") => LevelFilter::Info,
        Ok("quiet") => LevelFilter::Off,
        Ok("debug") => LevelFilter::Debug,
        Ok(other) => {
            return Err(HarnessError::Usage(format!(
                "OPT_LOG_LEVEL must be quiet, info or debug, got `{other}`"
            )))
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    writeln!(io::stdout().lock(), "{text}").map_err(|source| HarnessError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run { config, out, jobs } => {
            let configs = load_batch(&config)?;
            let reports = commands::cmd_run_batch(&configs, out.as_deref(), jobs)?;
            let code = combined_exit_code(reports.iter().map(|r| r.status.exit_code()));
            match reports.as_slice() {
                [single] => print_json(single)?,
                many => print_json(&many)?,
            }
            Ok(code)
        }
        Command::Flow {
            model,
            problem,
            t_end,
            dt,
            pairing,
            x0,
            seed,
            out,
        } => {
            let request = FlowRequest {
                model: FlowKind::from_name(&model)?,
                problem: load_problem(&problem)?,
                t_end,
                dt,
                pairing: pairing.as_deref().map(Pairing::from_name).transpose()?,
                x0,
                seed,
            };
            let (mut report, rows) = commands::cmd_flow(&request)?;
            if let Some(path) = out.filter(|_| !rows.is_empty()) {
                output::to_file(&path, |w| output::write_trajectory(w, &rows))?;
                report.output = Some(path);
            }
            print_json(&report)?;
            Ok(report.status.exit_code())
        }
        Command::VerifyLyapunov {
            pairing,
            samples,
            seed,
            c,
            problem,
        } => {
            let pairing = Pairing::from_name(&pairing)?;
            let problem = problem.as_deref().map(load_problem).transpose()?;
            let report =
                commands::cmd_verify_lyapunov(pairing, problem.as_ref(), samples, seed, c)?;
            print_json(&report)?;
            Ok(report.status.exit_code())
        }
        Command::Rates {
            rule,
            r,
            mu_over_l,
            kmax,
            out,
        } => {
            let (mut report, rows) =
                commands::cmd_rates(StepRule::from_name(&rule)?, r, mu_over_l, kmax)?;
            match out {
                Some(path) => {
                    output::to_file(&path, |w| output::write_rates(w, &rows))?;
                    report.output = Some(path);
                    print_json(&report)?;
                }
                None => {
                    output::write_rates(io::stdout().lock(), &rows)?;
                    log::info!(
                        "{}: {:?}, min slack {:.3e}",
                        report.rule,
                        report.status,
                        report.min_slack
                    );
                }
            }
            Ok(report.status.exit_code())
        }
    }
}

#[derive(Serialize)]
struct ErrorReport {
    status: &'static str,
    error: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_logging().and_then(|()| dispatch(cli.command));
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            let status = if err.exit_code() == 1 {
                "DIVERGED"
            } else {
                "ERROR"
            };
            // the report is best effort here: stdout may be the thing that failed
            let _ = print_json(&ErrorReport {
                status,
                error: err.to_string(),
            });
            ExitCode::from(err.exit_code())
        }
    }
}
