use std::path::Path;
use std::process::{Command, Output};

fn adagrad(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adagrad"))
        .args(args)
        .env("ADANORM_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
version = 1
name = "small"
start_dist_sq = 4.0
checks = ["avg_gap_main", "bt_deterministic"]
horizons = [10, 50]

[problem]
kind = "quadratic"
eigenvalues = [0.1, 0.5, 1.0]

[optimizer]
algorithm = "adagradnorm"
eta = 1.0
b0 = 0.1
horizon = 50
"#;

#[test]
fn run_writes_artifacts_under_the_root_override() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = adagrad(&["run", cfg.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = root.path().join("small");
    for f in ["bounds.csv", "rates.csv", "summary.csv", "trace_seed0.csv", "config.toml"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    assert!(!root.path().join(".small.partial").exists());
}

#[test]
fn failing_check_exits_one() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("bad.toml");
    // A threshold no run can meet.
    let text = SMALL.replace("checks = [", "checks = [\"rate_slope\", ")
        + "\n[rate]\nstatistic = \"average_gap\"\nt_min = 2\nt_max = 50\npoints = 5\nmax_slope = -10.0\n";
    std::fs::write(&cfg, text).unwrap();
    let out = adagrad(&["run", cfg.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rate_slope"));
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("bad.toml");
    std::fs::write(&cfg, SMALL.replace("\"bt_deterministic\"", "\"no_such_bound\"")).unwrap();
    let out = adagrad(&["run", cfg.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no_such_bound") && err.contains("checks[1]"), "{err}");

    let out = adagrad(&["run", "/nonexistent/config.toml"], root.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_three() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("huge.toml");
    // ||g||^2 exceeds the largest double on the first step.
    let text = SMALL
        .replace("checks = [\"avg_gap_main\", \"bt_deterministic\"]", "checks = []")
        .replace("horizons = [10, 50]", "")
        .replace("[0.1, 0.5, 1.0]", "[0.1, 0.5, 1e160]")
        .replace("algorithm = \"adagradnorm\"", "algorithm = \"last_power\"");
    std::fs::write(&cfg, text).unwrap();
    let out = adagrad(&["run", cfg.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    let failures = std::fs::read_to_string(root.path().join("small/failures.csv")).unwrap();
    assert_eq!(failures.lines().count(), 2);
}

#[test]
fn list_describe_and_export() {
    let root = tempfile::tempdir().unwrap();
    let out = adagrad(&["list-presets"], root.path());
    assert_eq!(out.status.code(), Some(0));
    let listing = String::from_utf8_lossy(&out.stdout);
    for p in adagrad_harness::presets::PRESETS {
        assert!(listing.contains(p.name));
    }

    let out = adagrad(&["describe", "last_limit"], root.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("last_limit"));
    let out = adagrad(&["describe", "grad_monotone"], root.path());
    assert_eq!(out.status.code(), Some(0));
    let out = adagrad(&["describe", "thm_0_0"], root.path());
    assert_eq!(out.status.code(), Some(2));

    let out = adagrad(&["export-preset", "coord_quadratic"], root.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = adagrad_harness::ExperimentConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg.name, "coord_quadratic");
}

#[test]
fn preset_runs_by_name() {
    let root = tempfile::tempdir().unwrap();
    let out = adagrad(&["run", "--preset", "acc_limit_quadratic"], root.path());
    assert_eq!(out.status.code(), Some(0));
    let bounds = std::fs::read_to_string(root.path().join("acc_limit_quadratic/bounds.csv")).unwrap();
    assert!(bounds.starts_with("seed,horizon,theorem_id,envelope,observed,margin,passed"));
    assert_eq!(bounds.lines().filter(|l| l.ends_with(",true")).count(), 2);
    assert!(root.path().join("acc_limit_quadratic/plot.svg").is_file());
}
