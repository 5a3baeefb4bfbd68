//! End-to-end acceptance run: one line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines are
//! always printed.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use adagrad_core::bounds::{check_trace_against, e_p_and_ell_p, BoundInputs, TheoremId};
use adagrad_core::linalg::norm_sq;
use adagrad_core::noise::{sigma_for_gaussian, NoiseModel};
use adagrad_core::optimizers::{run, Algorithm};
use adagrad_core::problems::{check_assumption, finite_diff_check, grid_1d, check_assumption_on_points, Assumption};
use adagrad_harness::config::{Check, NoiseConfig};
use adagrad_harness::presets::{self, PRESETS};
use adagrad_harness::suite::{check_region, required_assumptions, SuiteOutcome};
use adagrad_harness::{evaluate_suite, run_suite, SuiteStatus};

type Outcome = Result<String, String>;

fn preset(name: &str) -> SuiteOutcome {
    let cfg = presets::find(name).expect("preset exists").config();
    evaluate_suite(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn timed<T>(limit: Duration, what: &str, f: impl FnOnce() -> T) -> Result<T, String> {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    if took > limit {
        Err(format!("{what} took {took:.2?}, limit {limit:?}"))
    } else {
        Ok(out)
    }
}

/// Every bound row of `id` passes and the horizons covered are exactly `horizons`.
fn envelope_rows_pass(out: &SuiteOutcome, id: TheoremId, horizons: &[usize]) -> Outcome {
    let rows: Vec<_> = out
        .bound_rows
        .iter()
        .filter(|r| r.report.theorem_id == id.name())
        .collect();
    let seen: BTreeSet<usize> = rows.iter().map(|r| r.horizon).collect();
    let want: BTreeSet<usize> = horizons.iter().copied().collect();
    if seen != want {
        return Err(format!("{id}: horizons {seen:?}, expected {want:?}"));
    }
    if let Some(bad) = rows.iter().find(|r| !r.report.passed) {
        return Err(format!(
            "{id} at T={}: observed {:e} > envelope {:e}",
            bad.horizon, bad.report.observed, bad.report.envelope
        ));
    }
    let worst = rows
        .iter()
        .map(|r| r.report.margin / r.report.envelope)
        .fold(f64::INFINITY, f64::min);
    Ok(format!("{id} holds at T in {horizons:?} (min relative margin {worst:.3})"))
}

fn slope_of(out: &SuiteOutcome) -> Result<(f64, f64), String> {
    let v = out.verdict("rate_slope").ok_or("no rate verdict")?;
    if v.passed {
        Ok((v.value, v.threshold))
    } else {
        Err(format!("{}: slope {:.4} > {}", out.name, v.value, v.threshold))
    }
}

fn criterion_1() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = presets::find("avg_gap_main_quadratic").unwrap().config();
    let (out, path) = timed(Duration::from_secs(5), "run", || run_suite(&cfg, dir.path()))?
        .map_err(|e| e.to_string())?;
    let line = envelope_rows_pass(&out, TheoremId::AvgGapMain, &[10, 100, 1000, 10_000])?;
    let csv = std::fs::read_to_string(path.join("bounds.csv")).map_err(|e| e.to_string())?;
    let written = csv.lines().filter(|l| l.contains(",avg_gap_main,") && l.ends_with(",true")).count();
    if written != 4 {
        return Err(format!("bounds.csv has {written} passing avg_gap_main rows"));
    }
    Ok(line)
}

fn criterion_2() -> Outcome {
    let limit = Duration::from_secs(10);
    let agn = timed(limit, "average-gap rate", || preset("avg_gap_main_quadratic"))?;
    let last = timed(limit, "last-iterate rate", || preset("last_power_rate"))?;
    let acc = timed(limit, "accelerated rate", || preset("acc_power_rate"))?;
    let (s1, _) = slope_of(&agn)?;
    let (s2, _) = slope_of(&acc)?;
    let (s3, _) = slope_of(&last)?;
    if s1 > -0.9 || s2 > -1.8 || s3 > -0.9 {
        return Err(format!("slopes {s1:.3}, {s2:.3}, {s3:.3}"));
    }
    Ok(format!(
        "slopes: average gap {s1:.3} (<= -0.9), accelerated {s2:.3} (<= -1.8), last iterate {s3:.3} (<= -0.9)"
    ))
}

fn criterion_3() -> Outcome {
    let mut lines = Vec::new();
    for (name, id) in [
        ("last_power_quadratic", TheoremId::LastPower),
        ("last_exp_quadratic", TheoremId::LastExp),
        ("acc_power_quadratic", TheoremId::AccPower),
        ("acc_exp_quadratic", TheoremId::AccExp),
    ] {
        let out = preset(name);
        if out.status != SuiteStatus::Passed {
            return Err(format!("{name}: {:?} {:?}", out.status, out.failures));
        }
        lines.push(envelope_rows_pass(&out, id, &[100, 1000])?);
    }
    Ok(lines.join("; "))
}

fn criterion_4() -> Outcome {
    let out = preset("last_limit_quadratic");
    let line = envelope_rows_pass(&out, TheoremId::LastLimit, &[100, 1000, 10_000])?;
    let mono = out.verdict("grad_monotone").ok_or("no monotonicity verdict")?;
    if !mono.passed {
        return Err(format!("gradient norm increased by {:e}", mono.value));
    }
    Ok(format!("{line}; gradient norm non-increasing ({})", mono.detail))
}

fn criterion_5() -> Outcome {
    let out = preset("acc_limit_quadratic");
    envelope_rows_pass(&out, TheoremId::AccLimit, &[100, 1000])
}

fn criterion_6() -> Outcome {
    // (a) b_T envelope on every deterministic AdaGradNorm preset.
    let mut checked = Vec::new();
    for p in PRESETS {
        let cfg = p.config();
        if cfg.optimizer.algorithm != Algorithm::AdaGradNorm || cfg.noise != NoiseConfig::None {
            continue;
        }
        let spec = cfg.build_problem().map_err(|e| e.to_string())?;
        let start = cfg.start_point(&spec).map_err(|e| e.to_string())?;
        let tr = run(&spec, &NoiseModel::none(spec.dim()), &cfg.optimizer, &start).map_err(|e| e.to_string())?;
        let inputs = BoundInputs::from_run(&spec, &cfg.optimizer, &start, 0.0).map_err(|e| e.to_string())?;
        for h in cfg.check_horizons() {
            let r = check_trace_against(TheoremId::BtDeterministic, &tr.prefix(h).unwrap(), &inputs)
                .map_err(|e| e.to_string())?;
            if !r.passed {
                return Err(format!("{}: b_T {:e} > {:e} at T={h}", p.name, r.observed, r.envelope));
            }
        }
        checked.push(p.name);
    }
    // (b) joint accumulator and noise event over 200 seeds.
    let out = timed(Duration::from_secs(60), "stochastic suite", || preset("gt_stochastic_gaussian"))?;
    let v = out.verdict("gt_stochastic").ok_or("no verdict")?;
    if !v.passed || v.value < 0.9 {
        return Err(format!("event frequency {} < 0.9", v.value));
    }
    Ok(format!(
        "b_T envelope holds on {checked:?}; {} ({:.3} >= 0.9)",
        v.detail, v.value
    ))
}

fn criterion_7() -> Outcome {
    let out = preset("stochastic_rate");
    let (s, thr) = slope_of(&out)?;
    Ok(format!("mean average-gap slope over 20 seeds {s:.3} (<= {thr})"))
}

fn criterion_8() -> Outcome {
    let out = preset("coord_quadratic");
    let a = envelope_rows_pass(&out, TheoremId::CoordSum, &[1000])?;
    let b = envelope_rows_pass(&out, TheoremId::CoordGap, &[1000])?;
    Ok(format!("{a}; {b}"))
}

fn criterion_9() -> Outcome {
    let mut parts = Vec::new();
    for name in [
        "scale_avg_gap_main",
        "scale_last_exp",
        "scale_acc_exp",
        "scale_last_limit",
        "scale_last_power",
    ] {
        let out = preset(name);
        let vs: Vec<_> = out
            .verdicts
            .iter()
            .filter(|v| v.check.starts_with("scale_invariance"))
            .collect();
        if vs.len() != 2 {
            return Err(format!("{name}: expected two scale factors"));
        }
        if let Some(bad) = vs.iter().find(|v| !v.passed) {
            return Err(format!("{name} {}: deviation {:e} vs {:e}", bad.check, bad.value, bad.threshold));
        }
        let dev = vs.iter().map(|v| v.value).fold(0.0, f64::max);
        parts.push(format!("{name} max dev {dev:.1e}"));
    }
    Ok(parts.join(", "))
}

fn criterion_10() -> Outcome {
    // Gradients and assumptions on every preset instance.
    for p in PRESETS {
        let cfg = p.config();
        let spec = cfg.build_problem().map_err(|e| e.to_string())?;
        let start = cfg.start_point(&spec).map_err(|e| e.to_string())?;
        let region = check_region(&spec, &start).map_err(|e| e.to_string())?;
        let err = finite_diff_check(&spec, 100, &region, 1, 1e-6).map_err(|e| e.to_string())?;
        if !(err <= 1e-5) {
            return Err(format!("{}: finite-difference error {err:e}", p.name));
        }
        for c in cfg.parsed_checks().map_err(|e| e.to_string())? {
            let Check::Theorem(id) = c else { continue };
            for &a in required_assumptions(id) {
                let rep = check_assumption(&spec, a, 2000, &region, 1).map_err(|e| e.to_string())?;
                if !rep.holds_on_samples {
                    return Err(format!("{}: assumption {a} fails for {id}", p.name));
                }
            }
        }
    }
    // The quasar instance on a fine grid.
    let q = presets::find("foundations_quasar").unwrap().config().build_problem().unwrap();
    let grid = grid_1d(-5.0, 5.0, 10_000);
    for a in [Assumption::QuasarConvex, Assumption::WeakSmooth] {
        if !check_assumption_on_points(&q, a, &grid).unwrap().holds_on_samples {
            return Err(format!("quasar instance violates {a} on the grid"));
        }
    }

    // Monte-Carlo check of the sub-Gaussian parameter at the preset noise level.
    let s = presets::STOCHASTIC_STD;
    let noise = NoiseModel::gaussian(s, 10, 2024).unwrap();
    let sigma2 = sigma_for_gaussian(s, 10).powi(2);
    let n = 1_000_000u64;
    let mc = (0..n).map(|k| (norm_sq(&noise.noise_at(k)) / sigma2).exp()).sum::<f64>() / n as f64;
    let e = std::f64::consts::E;
    if (mc - e).abs() > 0.05 * e {
        return Err(format!("E exp(||xi||^2/sigma^2) = {mc}, expected e"));
    }

    // Both branches of e(p), against the literal closed form.
    let split = (3.0 - 5f64.sqrt()) / 2.0;
    for p in [0.1, 0.38197, 0.4] {
        let (ep, lp) = e_p_and_ell_p(p).unwrap();
        let log_e = if p < split {
            1.0
        } else {
            (p * p + (p * (p - 1.0) * (p * p - 3.0 * p + 1.0)).sqrt()) / (p * (1.0 - 2.0 * p))
        };
        if (ep.ln() - log_e).abs() > 1e-12 * log_e || (lp - 2.0 * p * log_e).abs() > 1e-12 {
            return Err(format!("e({p}) = {ep}, l({p}) = {lp}; expected log e = {log_e}"));
        }
    }
    let (e04, _) = e_p_and_ell_p(0.4).unwrap();
    if (e04.ln() - 3.224745).abs() > 1e-6 {
        return Err(format!("log e(0.4) = {}", e04.ln()));
    }
    Ok(format!(
        "gradients and assumptions certified on {} presets; Monte-Carlo E = {mc:.4} (e = {e:.4}); e(p) branches match",
        PRESETS.len()
    ))
}

fn main() -> ExitCode {
    let _ = env_logger::builder().is_test(true).try_init();
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (k, f) in criteria {
        let start = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        match res {
            Ok(msg) => println!("criterion {k:>2} PASS [{took:.2?}] {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {k:>2} FAIL [{took:.2?}] {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
