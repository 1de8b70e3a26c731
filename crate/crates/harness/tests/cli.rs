use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn optflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optflow"))
        .args(args)
        .env("OPT_LOG_LEVEL", "quiet")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn gd_at_the_optimal_step_passes_and_writes_the_trace() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "gd.json",
        r#"{"problem": {"kind": "quadratic", "eigs": [1, 100], "b": [1, -3]},
            "solver": {"name": "gd", "alpha": 0.019801980198019802}, "iters": 200, "x0": [5, 5]}"#,
    );
    let csv = dir.path().join("gd.csv");
    let out = optflow(&["run", "--config", &config, "--out", csv.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&out);
    assert_eq!(r["status"], "PASS");
    assert_eq!(r["steps"], 200);

    let rows = csv_rows(&csv);
    assert_eq!(
        rows[0],
        [
            "k",
            "f_gap",
            "lyapunov",
            "bound",
            "slack",
            "grad_norm",
            "alpha",
            "gamma"
        ]
    );
    assert_eq!(rows.len(), 202);
    // per-step factor of the bound is 1 - μα = 99/101
    let bound = |i: usize| rows[i][3].parse::<f64>().unwrap();
    for i in 2..rows.len() {
        assert!((bound(i) / bound(i - 1) - 99.0 / 101.0).abs() < 1e-12);
    }
    assert_eq!(rows[1][4], "", "no slack at k = 0");
    assert_eq!(rows[1][7], "", "gradient descent has no γ");
}

#[test]
fn new_apg_on_lasso_passes() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "apg.json",
        r#"{"problem": {"kind": "random_lasso", "rows": 30, "cols": 60, "rho": 0.1, "seed": 2},
            "solver": {"name": "new_apg"}, "iters": 500}"#,
    );
    let out = optflow(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["status"], "PASS");
    assert_eq!(r["flagged_steps"], 0);
}

#[test]
fn out_of_range_step_is_uncertified() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "gd.json",
        r#"{"problem": {"kind": "quadratic", "eigs": [1, 100], "b": [1, -3]},
            "solver": {"name": "gd", "alpha": 0.03}, "iters": 100}"#,
    );
    let out = optflow(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["status"], "UNCERTIFIED");
}

#[test]
fn invalid_configs_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let typo = write(
        &dir,
        "typo.json",
        r#"{"problem": {"kind": "logcosh", "dim": 2}, "solver": {"name": "nag"}, "itres": 10}"#,
    );
    let out = optflow(&["run", "--config", &typo]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["status"], "ERROR");

    let mismatch = write(
        &dir,
        "mismatch.json",
        r#"{"problem": {"kind": "random_lasso", "rows": 5, "cols": 8, "rho": 0.1},
            "solver": {"name": "gd", "alpha": 0.1}, "iters": 10}"#,
    );
    assert_eq!(
        optflow(&["run", "--config", &mismatch]).status.code(),
        Some(2)
    );
    assert_eq!(
        optflow(&["run", "--config", "/nonexistent.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(optflow(&["rates", "--rule", "b0"]).status.code(), Some(2));
    assert_eq!(
        optflow(&[
            "rates",
            "--rule",
            "nope",
            "--r",
            "1",
            "--mu-over-l",
            "0",
            "--kmax",
            "3"
        ])
        .status
        .code(),
        Some(2)
    );

    let out = Command::new(env!("CARGO_BIN_EXE_optflow"))
        .args([
            "rates",
            "--rule",
            "b0",
            "--r",
            "1",
            "--mu-over-l",
            "0",
            "--kmax",
            "3",
        ])
        .env("OPT_LOG_LEVEL", "loud")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergent_runs_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "gd.json",
        r#"{"problem": {"kind": "quadratic", "eigs": [1, 100], "b": [1, -3]},
            "solver": {"name": "gd", "alpha": 1.0}, "iters": 5000}"#,
    );
    let out = optflow(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["status"], "DIVERGED");
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = TempDir::new().unwrap();
    let config = |name: &str| {
        write(
            &dir,
            &format!("{name}.json"),
            &format!(
                r#"{{"problem": {{"kind": "random_lasso", "rows": 20, "cols": 40, "rho": 0.1, "seed": 9}},
                    "solver": {{"name": "apg_fast_grad"}}, "iters": 300, "seed": 17,
                    "output": "{}"}}"#,
                dir.path().join(format!("{name}.csv")).display()
            ),
        )
    };
    for name in ["a", "b"] {
        assert_eq!(
            optflow(&["run", "--config", &config(name)]).status.code(),
            Some(0)
        );
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn batches_run_concurrently_in_order() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "batch.json",
        r#"[
            {"problem": {"kind": "logcosh", "dim": 3}, "solver": {"name": "nag"}, "iters": 100},
            {"problem": {"kind": "logcosh", "dim": 3}, "solver": {"name": "ppa", "alpha": 1}, "iters": 100},
            {"problem": {"kind": "quadratic", "eigs": [0.01, 1], "b": [1, 1]},
             "solver": {"name": "momentum", "variant": "root"}, "iters": 100}
        ]"#,
    );
    let out = optflow(&["run", "--config", &config, "--jobs", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let solvers: Vec<_> = r
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["solver"].as_str().unwrap())
        .collect();
    assert_eq!(solvers, ["nag", "ppa", "momentum"]);
}

#[test]
fn flows_decay_at_their_rates() {
    let dir = TempDir::new().unwrap();
    let logcosh = write(&dir, "logcosh.json", r#"{"kind": "logcosh", "dim": 3}"#);
    let csv = dir.path().join("flow.csv");
    let out = optflow(&[
        "flow",
        "--model",
        "scaled_gradient",
        "--problem",
        &logcosh,
        "--t-end",
        "10",
        "--dt",
        "1e-3",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["status"], "PASS");
    let rows = csv_rows(&csv);
    assert_eq!(rows[0], ["t", "lyapunov", "bound", "x_norm_err", "gamma"]);
    let last = rows.last().unwrap();
    let (t, bound): (f64, f64) = (last[0].parse().unwrap(), last[2].parse().unwrap());
    let l0: f64 = rows[1][1].parse().unwrap();
    assert_eq!(t, 10.0);
    assert!((bound - l0 * (-10f64).exp()).abs() < 1e-12 * bound);

    let quadratic = write(
        &dir,
        "q.json",
        r#"{"kind": "quadratic", "eigs": [0.5, 2, 8], "b": [1, 0, -1]}"#,
    );
    let out = optflow(&[
        "flow",
        "--model",
        "avd_r3",
        "--problem",
        &quadratic,
        "--t-end",
        "100",
        "--dt",
        "1e-3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(
        (r["status"].as_str(), r["t_start"].as_f64()),
        (Some("PASS"), Some(1.0))
    );

    let stiff = write(
        &dir,
        "stiff.json",
        r#"{"kind": "quadratic", "eigs": [1, 100], "b": [1, 1]}"#,
    );
    let out = optflow(&[
        "flow",
        "--model",
        "gradient",
        "--problem",
        &stiff,
        "--t-end",
        "100",
        "--dt",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["status"], "DIVERGED");
}

#[test]
fn strong_lyapunov_verification() {
    for pairing in ["heavy_ball", "hnag"] {
        let out = optflow(&[
            "verify-lyapunov",
            "--pairing",
            pairing,
            "--samples",
            "10000",
            "--seed",
            "0",
        ]);
        assert_eq!(out.status.code(), Some(0), "{pairing}");
        let r = report(&out);
        assert_eq!(r["status"], "PASS");
        assert!(r["min_slack"].as_f64().unwrap() >= -1e-9);
    }
    let out = optflow(&[
        "verify-lyapunov",
        "--pairing",
        "heavy_ball",
        "--samples",
        "10000",
        "--seed",
        "0",
        "--c",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["status"], "FAIL");
    assert!(r["min_slack"].as_f64().unwrap() < 0.0);
}

#[test]
fn rate_tables() {
    let out = optflow(&[
        "rates",
        "--rule",
        "b0",
        "--r",
        "1",
        "--mu-over-l",
        "0",
        "--kmax",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,rho_measured,rho_bound,slack"));
    let c = 2f64.sqrt() + 1.0;
    for (k, line) in lines.enumerate() {
        let fields: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(fields[0], k as f64);
        let expected = (c / (c + k as f64)).powi(2);
        assert!((fields[2] - expected).abs() <= 1e-14 * expected, "k = {k}");
    }

    for rule in ["split_apg", "new_apg", "nag", "fast_grad_apg", "avd", "b=2"] {
        let out = optflow(&[
            "rates",
            "--rule",
            rule,
            "--r",
            "0.5",
            "--mu-over-l",
            "0",
            "--kmax",
            "0",
        ]);
        assert_eq!(out.status.code(), Some(0), "{rule}");
        let text = String::from_utf8(out.stdout).unwrap();
        let first = text.lines().nth(1).unwrap();
        if rule == "avd" {
            // the AVD bound carries a front factor (1 + √r/(2+√r))² above one
            let front = (1.0 + 0.5f64.sqrt() / (2.0 + 0.5f64.sqrt())).powi(2);
            let fields: Vec<f64> = first.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(fields[1], 1.0);
            assert!((fields[2] - front).abs() < 1e-15);
        } else {
            assert_eq!(
                first,
                "0,1.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0"
            );
        }
    }

    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("rates.csv");
    for rule in ["b0", "b1", "nag", "fast_grad"] {
        let out = optflow(&[
            "rates",
            "--rule",
            rule,
            "--r",
            "1",
            "--mu-over-l",
            "1e-3",
            "--kmax",
            "10000",
            "--out",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let r = report(&out);
        assert_eq!(r["status"], "PASS");
        assert!(r["min_slack"].as_f64().unwrap() >= -1e-15, "{rule}");
        assert_eq!(csv_rows(&csv).len(), 10_002);
    }
}
