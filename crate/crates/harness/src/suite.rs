//! Suite execution: runs every seed, evaluates the requested checks and
//! writes the artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use adagrad_core::analysis::{
    average_gap, event_holds, fit_loglog_slope, geometric_grid, scale_invariance_check, RateFit,
};
use adagrad_core::bounds::{
    check_trace_against, evaluate, BoundInputs, BoundReport, TheoremId, BOUND_CSV_HEADER,
};
use adagrad_core::noise::NoiseModel;
use adagrad_core::optimizers::{fmt_f64, run, Algorithm, Trace};
use adagrad_core::problems::{
    check_assumption, finite_diff_check, Assumption, ProblemSpec, Region,
};
use rayon::prelude::*;

use crate::config::{
    Check, ExperimentConfig, NoiseConfig, PropertyCheck, RateStatistic, ScaleExpectation,
};
use crate::error::HarnessError;
use crate::svg::{emit_svg_loglog, Series};

pub const GRAD_MONOTONE_TOL: f64 = 1e-12;
pub const SCALE_INVARIANT_TOL: f64 = 1e-9;
pub const SCALE_VARIANT_MIN: f64 = 1e-3;
pub const FINITE_DIFF_TOL: f64 = 1e-5;
pub const FINITE_DIFF_SAMPLES: usize = 100;
pub const ASSUMPTION_SAMPLES: usize = 2000;

/// Overall verdict of a suite, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SuiteStatus {
    Passed,
    ChecksFailed,
    NumericFailure,
}

impl SuiteStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            SuiteStatus::Passed => 0,
            SuiteStatus::ChecksFailed => 1,
            SuiteStatus::NumericFailure => 3,
        }
    }
}

/// A bound report for one run at one prefix horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub seed: u64,
    pub horizon: usize,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub series: String,
    pub fit: Option<RateFit>,
    pub t_min: usize,
    pub t_max: usize,
    /// Only the across-seed mean carries a threshold and verdict.
    pub threshold: Option<f64>,
    pub passed: Option<bool>,
}

/// Outcome of one requested check (or one facet of it).
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

/// A numeric failure, recorded while the suite continues.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub seed: Option<u64>,
    pub stage: String,
    pub t: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: String,
    pub status: SuiteStatus,
    pub verdicts: Vec<Verdict>,
    pub bound_rows: Vec<BoundRow>,
    pub rate_rows: Vec<RateRow>,
    /// `(series, T, value)` points behind the rate fits.
    pub rate_points: Vec<(String, usize, f64)>,
    pub failures: Vec<Failure>,
    /// Per-seed trace CSV text, in seed order, for successful runs.
    pub trace_csv: Vec<(u64, String)>,
    pub svg: Option<String>,
    pub config_toml: String,
}

impl SuiteOutcome {
    pub fn verdict(&self, check: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.check == check)
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Conditions each envelope relies on.
pub fn required_assumptions(id: TheoremId) -> &'static [Assumption] {
    use Assumption::*;
    match id {
        TheoremId::AvgGapMain => &[QuasarConvex, WeakSmooth],
        TheoremId::AvgGapImproved
        | TheoremId::BtDeterministic
        | TheoremId::LastPower
        | TheoremId::LastExp => &[QuasarConvex, Smooth],
        TheoremId::GtStochastic => &[Smooth],
        TheoremId::LastLimit | TheoremId::AccPower | TheoremId::AccExp | TheoremId::AccLimit => {
            &[Convex, Smooth]
        }
        TheoremId::CoordSum | TheoremId::CoordGap => &[QuasarConvex, DiagSmooth],
    }
}

/// Sampling box around `x*` wide enough to contain the start point.
pub fn check_region(spec: &ProblemSpec, start: &[f64]) -> Result<Region, HarnessError> {
    let reach = start
        .iter()
        .zip(spec.minimizer())
        .map(|(x, s)| (x - s).abs())
        .fold(0.0, f64::max);
    let r = (1.5 * reach).max(1.0);
    let lo = spec.minimizer().iter().map(|s| s - r).collect();
    let hi = spec.minimizer().iter().map(|s| s + r).collect();
    Ok(Region::new(lo, hi)?)
}

/// Checks that every requested check can be applied to this configuration.
fn validate_pairings(cfg: &ExperimentConfig, checks: &[Check]) -> Result<(), HarnessError> {
    let opt = &cfg.optimizer;
    let alg = opt.algorithm;
    for (i, c) in checks.iter().enumerate() {
        let path = format!("checks[{i}]");
        match *c {
            Check::Theorem(id) => {
                if !id.compatible_algorithms().contains(&alg) {
                    return Err(HarnessError::config(
                        path,
                        format!("{} cannot be checked against {} runs", id, alg.name()),
                    ));
                }
                let limit = match alg {
                    Algorithm::LastPower | Algorithm::AccPower => opt.delta_big == 0.0,
                    Algorithm::LastExp | Algorithm::AccExp => opt.delta_small == 1.0,
                    _ => false,
                };
                if matches!(id, TheoremId::LastLimit | TheoremId::AccLimit) && !limit {
                    return Err(HarnessError::config(
                        path,
                        format!("{id} needs delta_big = 0 or delta_small = 1"),
                    ));
                }
                if matches!(id, TheoremId::LastExp | TheoremId::AccExp) && opt.delta_small >= 1.0 {
                    return Err(HarnessError::config(
                        path,
                        format!("{id} needs delta_small < 1; use the limit envelope"),
                    ));
                }
            }
            Check::Property(PropertyCheck::GradMonotone) if alg.is_accelerated() => {
                return Err(HarnessError::config(
                    path,
                    "grad_monotone applies to non-accelerated algorithms",
                ));
            }
            Check::Property(PropertyCheck::ScaleInvariance)
                if alg == Algorithm::AdaGradNormStochastic || cfg.is_stochastic() =>
            {
                return Err(HarnessError::config(
                    path,
                    "scale_invariance is defined for deterministic runs",
                ));
            }
            _ => {}
        }
    }
    Ok(())
}

fn noise_for(cfg: &ExperimentConfig, dim: usize, seed: u64) -> Result<NoiseModel, HarnessError> {
    match cfg.noise {
        NoiseConfig::None => Ok(NoiseModel::none(dim)),
        NoiseConfig::Gaussian { std } => NoiseModel::gaussian(std, dim, seed)
            .map_err(|e| HarnessError::config("noise", e.to_string())),
    }
}

fn numeric_reason(e: &adagrad_core::Error) -> Option<(Option<usize>, String)> {
    match e {
        adagrad_core::Error::NumericFailure { t, reason } => Some((Some(*t), reason.clone())),
        adagrad_core::Error::Domain(msg) => Some((None, msg.clone())),
        _ => None,
    }
}

/// `F(x_{T+1}) - F*` of the length-`t` prefix, or the averaged-point gap
/// for accelerated runs.
fn last_gap_at(trace: &Trace, t: usize) -> f64 {
    let rec = trace.records();
    if trace.algorithm().is_accelerated() {
        rec[t - 1].avg_gap.unwrap_or(f64::NAN)
    } else if t == rec.len() {
        trace.final_gap
    } else {
        rec[t].gap
    }
}

fn statistic_at(trace: &Trace, stat: RateStatistic, t: usize) -> Result<f64, HarnessError> {
    Ok(match stat {
        RateStatistic::AverageGap => average_gap(trace, t)?,
        RateStatistic::LastGap => last_gap_at(trace, t),
    })
}

fn stat_name(stat: RateStatistic) -> &'static str {
    match stat {
        RateStatistic::AverageGap => "average gap",
        RateStatistic::LastGap => "last gap",
    }
}

/// Runs every seed and evaluates every check, without touching the disk
/// beyond reading a referenced problem document.
pub fn evaluate_suite(cfg: &ExperimentConfig) -> Result<SuiteOutcome, HarnessError> {
    cfg.validate()?;
    let checks = cfg.parsed_checks()?;
    validate_pairings(cfg, &checks)?;
    let spec = cfg.build_problem()?;
    let start = cfg.start_point(&spec)?;
    let opt = cfg.optimizer.clone();
    if let Some(dim_b0) = match &opt.b0 {
        adagrad_core::optimizers::InitialAccumulator::Coord(v) => Some(v.len()),
        _ => None,
    } {
        if dim_b0 != spec.dim() {
            return Err(HarnessError::config(
                "optimizer.b0",
                format!("b0 has {dim_b0} entries but the problem has dimension {}", spec.dim()),
            ));
        }
    }
    opt.validate()
        .map_err(|e| HarnessError::config("optimizer", e.to_string()))?;

    let sigma = noise_for(cfg, spec.dim(), 0)?.certified_sigma();
    let inputs = BoundInputs::from_run(&spec, &opt, &start, sigma)
        .map_err(|e| HarnessError::config("problem", e.to_string()))?
        .with_fail_prob(cfg.fail_prob);

    log::info!(
        "suite {}: {} seed(s), {} on {} (d = {}), T = {}",
        cfg.name,
        cfg.seeds.len(),
        opt.algorithm.name(),
        spec.kind().name(),
        spec.dim(),
        opt.horizon
    );

    let noises = cfg
        .seeds
        .iter()
        .map(|&s| noise_for(cfg, spec.dim(), s))
        .collect::<Result<Vec<_>, _>>()?;
    let results: Vec<(u64, adagrad_core::Result<Trace>)> = cfg
        .seeds
        .par_iter()
        .zip(noises.par_iter())
        .map(|(&seed, noise)| (seed, run(&spec, noise, &opt, &start)))
        .collect();

    let mut failures = Vec::new();
    let mut traces: Vec<Trace> = Vec::with_capacity(results.len());
    for (seed, r) in results {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => match numeric_reason(&e) {
                Some((t, reason)) => {
                    log::warn!("seed {seed}: {e}");
                    failures.push(Failure {
                        seed: Some(seed),
                        stage: "run".into(),
                        t,
                        reason,
                    });
                }
                None => return Err(HarnessError::config("optimizer", e.to_string())),
            },
        }
    }

    let mut verdicts = Vec::new();
    let mut bound_rows = Vec::new();
    let mut rate_rows = Vec::new();
    let mut rate_points = Vec::new();
    let horizons = cfg.check_horizons();
    let region = check_region(&spec, &start)?;

    for check in &checks {
        match *check {
            Check::Theorem(id) => {
                let rows: Vec<adagrad_core::Result<Vec<(BoundRow, bool)>>> = traces
                    .par_iter()
                    .map(|tr| {
                        horizons
                            .iter()
                            .map(|&h| {
                                let p = tr.prefix(h)?;
                                let report = check_trace_against(id, &p, &inputs)?;
                                if !report.envelope.is_finite() {
                                    return Err(adagrad_core::Error::NumericFailure {
                                        t: h,
                                        reason: format!(
                                            "{id} envelope is not finite; rescale eta or b0"
                                        ),
                                    });
                                }
                                let event = id == TheoremId::GtStochastic
                                    && event_holds(&p, sigma, cfg.fail_prob)?;
                                Ok((
                                    BoundRow {
                                        seed: tr.seed,
                                        horizon: h,
                                        report,
                                    },
                                    event,
                                ))
                            })
                            .collect()
                    })
                    .collect();
                let mut ok_rows: Vec<(BoundRow, bool)> = Vec::new();
                let mut failed_here = cfg.seeds.len() - traces.len();
                for (tr, r) in traces.iter().zip(rows) {
                    match r {
                        Ok(v) => ok_rows.extend(v),
                        Err(e) => {
                            failed_here += 1;
                            let (t, reason) = numeric_reason(&e).unwrap_or((None, e.to_string()));
                            failures.push(Failure {
                                seed: Some(tr.seed),
                                stage: id.name().into(),
                                t,
                                reason,
                            });
                        }
                    }
                }
                let verdict = if id == TheoremId::GtStochastic {
                    // Joint event b_T <= g_T and M_T within its threshold, at the
                    // largest horizon, as a frequency over seeds.
                    let last_h = *horizons.iter().max().expect("nonempty horizons");
                    let hits = ok_rows
                        .iter()
                        .filter(|(r, ev)| r.horizon == last_h && r.report.passed && *ev)
                        .count();
                    let frac = hits as f64 / cfg.seeds.len() as f64;
                    let floor = 1.0 - cfg.fail_prob;
                    Verdict {
                        check: id.name().into(),
                        passed: frac >= floor,
                        value: frac,
                        threshold: floor,
                        detail: format!(
                            "{hits}/{} runs satisfy the envelope and the noise event at T = {last_h}",
                            cfg.seeds.len()
                        ),
                    }
                } else {
                    let worst = ok_rows
                        .iter()
                        .map(|(r, _)| r.report.margin)
                        .fold(f64::INFINITY, f64::min);
                    let bad = ok_rows.iter().filter(|(r, _)| !r.report.passed).count();
                    Verdict {
                        check: id.name().into(),
                        passed: bad == 0 && failed_here == 0 && !ok_rows.is_empty(),
                        value: worst,
                        threshold: 0.0,
                        detail: format!(
                            "{} of {} reports pass; {failed_here} run(s) failed",
                            ok_rows.len() - bad,
                            ok_rows.len()
                        ),
                    }
                };
                bound_rows.extend(ok_rows.into_iter().map(|(r, _)| r));
                verdicts.push(verdict);
            }
            Check::Property(PropertyCheck::RateSlope) => {
                let rate = cfg.rate.as_ref().expect("validated");
                let grid = geometric_grid(rate.t_min, rate.t_max, rate.points);
                let mut mean = vec![0.0; grid.len()];
                for tr in &traces {
                    let vals = grid
                        .iter()
                        .map(|&t| statistic_at(tr, rate.statistic, t))
                        .collect::<Result<Vec<_>, _>>()?;
                    for (m, v) in mean.iter_mut().zip(&vals) {
                        *m += v / traces.len() as f64;
                    }
                    let series = format!("seed{}", tr.seed);
                    rate_rows.push(RateRow {
                        series: series.clone(),
                        fit: fit_loglog_slope(&grid, &vals).ok(),
                        t_min: rate.t_min,
                        t_max: rate.t_max,
                        threshold: None,
                        passed: None,
                    });
                    rate_points.extend(grid.iter().zip(&vals).map(|(t, v)| (series.clone(), *t, *v)));
                }
                let fit = if traces.is_empty() {
                    None
                } else {
                    rate_points.extend(grid.iter().zip(&mean).map(|(t, v)| ("mean".to_string(), *t, *v)));
                    match fit_loglog_slope(&grid, &mean) {
                        Ok(f) => Some(f),
                        Err(e) => {
                            log::warn!("rate fit failed: {e}");
                            None
                        }
                    }
                };
                let slope = fit.as_ref().map_or(f64::NAN, |f| f.slope);
                let passed = slope <= rate.max_slope;
                rate_rows.push(RateRow {
                    series: "mean".into(),
                    fit,
                    t_min: rate.t_min,
                    t_max: rate.t_max,
                    threshold: Some(rate.max_slope),
                    passed: Some(passed),
                });
                verdicts.push(Verdict {
                    check: PropertyCheck::RateSlope.name().into(),
                    passed,
                    value: slope,
                    threshold: rate.max_slope,
                    detail: format!(
                        "{} over {} seed(s), T in {:?}",
                        stat_name(rate.statistic),
                        traces.len(),
                        grid
                    ),
                });
            }
            Check::Property(PropertyCheck::GradMonotone) => {
                let trigger = opt.eta * spec.smoothness() / 2.0;
                let mut worst = 0.0f64;
                let mut armed = Vec::new();
                for tr in &traces {
                    let mut norms: Vec<f64> = tr.records().iter().map(|r| r.grad_norm).collect();
                    norms.push(adagrad_core::linalg::norm(&spec.grad_at(&tr.final_iterate)));
                    let first = tr.records().iter().position(|r| {
                        r.accumulator.iter().copied().fold(f64::INFINITY, f64::min) > trigger
                    });
                    armed.push(first.map(|k| k + 1));
                    if let Some(k) = first {
                        for w in norms[k..].windows(2) {
                            let excess = (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE);
                            if w[1] > w[0] * (1.0 + GRAD_MONOTONE_TOL) {
                                worst = worst.max(excess);
                            }
                        }
                    }
                }
                let passed = worst == 0.0 && !traces.is_empty();
                verdicts.push(Verdict {
                    check: PropertyCheck::GradMonotone.name().into(),
                    passed,
                    value: worst,
                    threshold: GRAD_MONOTONE_TOL,
                    detail: format!("b_t > eta L / 2 = {trigger:.6e} from t = {armed:?}"),
                });
            }
            Check::Property(PropertyCheck::ScaleInvariance) => {
                let scale = cfg.scale.as_ref().expect("validated");
                for &c in &scale.factors {
                    let name = format!("scale_invariance[c={c}]");
                    match scale_invariance_check(&spec, &opt, &start, c) {
                        Ok(dev) => {
                            let (passed, threshold) = match scale.expect {
                                ScaleExpectation::Invariant => (dev <= SCALE_INVARIANT_TOL, SCALE_INVARIANT_TOL),
                                ScaleExpectation::Variant => (dev > SCALE_VARIANT_MIN, SCALE_VARIANT_MIN),
                            };
                            verdicts.push(Verdict {
                                check: name,
                                passed,
                                value: dev,
                                threshold,
                                detail: format!(
                                    "expected {}",
                                    match scale.expect {
                                        ScaleExpectation::Invariant => "invariant",
                                        ScaleExpectation::Variant => "variant",
                                    }
                                ),
                            });
                        }
                        Err(e) => {
                            let (t, reason) = numeric_reason(&e)
                                .ok_or_else(|| HarnessError::config("scale", e.to_string()))?;
                            failures.push(Failure {
                                seed: None,
                                stage: name,
                                t,
                                reason,
                            });
                        }
                    }
                }
            }
            Check::Property(PropertyCheck::Assumptions) => {
                let mut needed: Vec<Assumption> = checks
                    .iter()
                    .filter_map(|c| match c {
                        Check::Theorem(id) => Some(required_assumptions(*id)),
                        _ => None,
                    })
                    .flatten()
                    .copied()
                    .collect();
                if needed.is_empty() {
                    needed = vec![Assumption::QuasarConvex, Assumption::WeakSmooth, Assumption::Smooth];
                }
                let mut seen = Vec::new();
                needed.retain(|a| {
                    let fresh = !seen.contains(a);
                    seen.push(*a);
                    fresh
                });
                for a in needed {
                    let rep = check_assumption(&spec, a, ASSUMPTION_SAMPLES, &region, 0)
                        .map_err(|e| HarnessError::config("checks", e.to_string()))?;
                    verdicts.push(Verdict {
                        check: format!("assumption[{}]", a.id()),
                        passed: rep.holds_on_samples,
                        value: rep.worst_violation,
                        threshold: 0.0,
                        detail: format!("{ASSUMPTION_SAMPLES} samples around x*"),
                    });
                }
            }
            Check::Property(PropertyCheck::FiniteDiff) => {
                let err = finite_diff_check(&spec, FINITE_DIFF_SAMPLES, &region, 0, 1e-6)?;
                verdicts.push(Verdict {
                    check: PropertyCheck::FiniteDiff.name().into(),
                    passed: err <= FINITE_DIFF_TOL,
                    value: err,
                    threshold: FINITE_DIFF_TOL,
                    detail: format!("{FINITE_DIFF_SAMPLES} points, central differences h = 1e-6"),
                });
            }
        }
    }

    let svg = (cfg.svg && !traces.is_empty()).then(|| {
        let tr = &traces[0];
        let grid = geometric_grid(1, tr.len(), 30);
        let mut series = vec![
            Series::new(
                format!("average gap (seed {})", tr.seed),
                grid.iter()
                    .map(|&t| (t as f64, average_gap(tr, t).unwrap_or(f64::NAN)))
                    .collect(),
            ),
            Series::new(
                format!("last gap (seed {})", tr.seed),
                grid.iter().map(|&t| (t as f64, last_gap_at(tr, t))).collect(),
            ),
        ];
        let mean: Vec<(f64, f64)> = rate_points
            .iter()
            .filter(|(s, _, _)| s == "mean")
            .map(|(_, t, v)| (*t as f64, *v))
            .collect();
        if !mean.is_empty() {
            series.push(Series::new("rate fit points (mean)", mean));
        }
        let envelopes: Vec<Series> = checks
            .iter()
            .filter_map(|c| match c {
                Check::Theorem(id) => Some(*id),
                _ => None,
            })
            .map(|id| {
                let pts = grid
                    .iter()
                    .filter_map(|&t| {
                        evaluate(id, &inputs.with_horizon(t))
                            .ok()
                            .filter(|v| v.is_finite())
                            .map(|v| (t as f64, v))
                    })
                    .collect();
                Series::new(format!("{id} envelope"), pts)
            })
            .collect();
        emit_svg_loglog(&series, &envelopes)
    });

    let any_failed = verdicts.iter().any(|v| !v.passed);
    let status = if !failures.is_empty() {
        SuiteStatus::NumericFailure
    } else if any_failed {
        SuiteStatus::ChecksFailed
    } else {
        SuiteStatus::Passed
    };
    for v in &verdicts {
        log::info!(
            "{}: {} (value {:.6e}, threshold {:.6e}) {}",
            v.check,
            if v.passed { "pass" } else { "FAIL" },
            v.value,
            v.threshold,
            v.detail
        );
    }

    Ok(SuiteOutcome {
        name: cfg.name.clone(),
        status,
        verdicts,
        bound_rows,
        rate_rows,
        rate_points,
        failures,
        trace_csv: traces.iter().map(|t| (t.seed, t.to_csv_string())).collect(),
        svg,
        config_toml: cfg.to_toml_string(),
    })
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_csv<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| HarnessError::io(path, std::io::Error::other(e)))?;
    let wrap = |e: csv::Error| HarnessError::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn write_all(outcome: &SuiteOutcome, dir: &Path) -> Result<(), HarnessError> {
    write_file(&dir.join("config.toml"), &outcome.config_toml)?;
    for (seed, text) in &outcome.trace_csv {
        write_file(&dir.join(format!("trace_seed{seed}.csv")), text)?;
    }
    let mut bound_header = ["seed", "horizon", "", "", "", "", ""];
    bound_header[2..].copy_from_slice(&BOUND_CSV_HEADER);
    write_csv(
        &dir.join("bounds.csv"),
        bound_header,
        outcome.bound_rows.iter().map(|r| {
            let mut row = vec![r.seed.to_string(), r.horizon.to_string()];
            row.extend(r.report.csv_fields());
            row
        }),
    )?;
    write_csv(
        &dir.join("rates.csv"),
        ["series", "slope", "intercept", "r_squared", "t_min", "t_max", "threshold", "passed"],
        outcome.rate_rows.iter().map(|r| {
            vec![
                r.series.clone(),
                opt_f64(r.fit.as_ref().map(|f| f.slope)),
                opt_f64(r.fit.as_ref().map(|f| f.intercept)),
                opt_f64(r.fit.as_ref().map(|f| f.r_squared)),
                r.t_min.to_string(),
                r.t_max.to_string(),
                opt_f64(r.threshold),
                r.passed.map(|p| p.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    write_csv(
        &dir.join("rate_points.csv"),
        ["series", "t", "value"],
        outcome
            .rate_points
            .iter()
            .map(|(s, t, v)| vec![s.clone(), t.to_string(), fmt_f64(*v)]),
    )?;
    write_csv(
        &dir.join("summary.csv"),
        ["check", "passed", "value", "threshold", "detail"],
        outcome.verdicts.iter().map(|v| {
            vec![
                v.check.clone(),
                v.passed.to_string(),
                fmt_f64(v.value),
                fmt_f64(v.threshold),
                v.detail.clone(),
            ]
        }),
    )?;
    write_csv(
        &dir.join("failures.csv"),
        ["seed", "stage", "t", "reason"],
        outcome.failures.iter().map(|f| {
            vec![
                f.seed.map(|s| s.to_string()).unwrap_or_default(),
                f.stage.clone(),
                f.t.map(|t| t.to_string()).unwrap_or_default(),
                f.reason.clone(),
            ]
        }),
    )?;
    if let Some(svg) = &outcome.svg {
        write_file(&dir.join("plot.svg"), svg)?;
    }
    Ok(())
}

/// Writes all artifacts into `dir`, replacing it. Files are staged in a
/// sibling directory and moved into place at the end, so a failure never
/// leaves a partially written `dir` behind.
pub fn write_artifacts(outcome: &SuiteOutcome, dir: &Path) -> Result<(), HarnessError> {
    let parent = dir
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    let leaf = dir
        .file_name()
        .ok_or_else(|| HarnessError::config("output_dir", "output directory has no final component"))?;
    let staging = parent.join(format!(".{}.partial", leaf.to_string_lossy()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| HarnessError::io(&staging, e))?;
    }
    fs::create_dir(&staging).map_err(|e| HarnessError::io(&staging, e))?;
    if let Err(e) = write_all(outcome, &staging) {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::rename(&staging, dir).map_err(|e| HarnessError::io(dir, e))
}

/// Artifact directory for `cfg` under `root`.
pub fn output_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    root.join(cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.name)))
}

/// Evaluates the suite and writes its artifacts under `root`.
pub fn run_suite(cfg: &ExperimentConfig, root: &Path) -> Result<(SuiteOutcome, PathBuf), HarnessError> {
    let outcome = evaluate_suite(cfg)?;
    let dir = output_dir(cfg, root);
    write_artifacts(&outcome, &dir)?;
    Ok((outcome, dir))
}
