//! Trace statistics, log-log rate fits and property evaluators.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::linalg::{norm, sub};
use crate::noise::NoiseModel;
use crate::optimizers::{run, Algorithm, OptimizerConfig, Trace};
use crate::problems::ProblemSpec;
use crate::{Error, Result};

fn nonempty(trace: &Trace) -> Result<()> {
    if trace.is_empty() {
        Err(Error::InvalidInput("trace is empty".into()))
    } else {
        Ok(())
    }
}

/// `sum_{t <= upto} (F(x_t) - F*) / upto`.
pub fn average_gap(trace: &Trace, upto: usize) -> Result<f64> {
    nonempty(trace)?;
    if upto == 0 || upto > trace.len() {
        return Err(Error::OutOfRange {
            index: upto,
            len: trace.len(),
        });
    }
    Ok(trace.records()[..upto].iter().map(|r| r.gap).sum::<f64>() / upto as f64)
}

/// `F(x_{T+1}) - F*`, or `F(w_{T+1}) - F*` for accelerated traces.
pub fn last_gap(trace: &Trace) -> Result<f64> {
    nonempty(trace)?;
    if trace.algorithm().is_accelerated() {
        trace
            .records()
            .last()
            .and_then(|r| r.avg_gap)
            .ok_or_else(|| Error::InvalidInput("accelerated trace lacks averaged gaps".into()))
    } else {
        Ok(trace.final_gap)
    }
}

/// `F(x_bar_T) - F*` at the running mean `x_bar_T = sum_t x_t / T`.
pub fn avg_iterate_gap(trace: &Trace, spec: &ProblemSpec) -> Result<f64> {
    nonempty(trace)?;
    let dim = trace.records()[0].iterate.len();
    if dim != spec.dim() {
        return Err(Error::InvalidInput(format!(
            "trace has dimension {dim} but the problem has {}",
            spec.dim()
        )));
    }
    let mut mean = vec![0.0; dim];
    for r in trace.records() {
        for (m, x) in mean.iter_mut().zip(&r.iterate) {
            *m += x;
        }
    }
    let n = trace.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(spec.gap_at(&mean))
}

/// Least-squares fit of `log gap = intercept + slope log T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_range: (usize, usize),
}

pub const MIN_FIT_POINTS: usize = 5;

/// Fits a power law to `gaps[i]` observed at horizon `ts[i]`. Nonpositive gaps
/// are excluded with a warning.
pub fn fit_loglog_slope(ts: &[usize], gaps: &[f64]) -> Result<RateFit> {
    if ts.len() != gaps.len() {
        return Err(Error::InvalidInput(format!(
            "{} horizons but {} gaps",
            ts.len(),
            gaps.len()
        )));
    }
    let mut pts = Vec::with_capacity(ts.len());
    for (&t, &g) in ts.iter().zip(gaps) {
        if t == 0 {
            return Err(Error::InvalidInput("horizons must be positive".into()));
        }
        if g > 0.0 && g.is_finite() {
            pts.push(((t as f64).ln(), g.ln(), t));
        } else {
            log::warn!("excluding gap {g} at T={t} from the log-log fit");
        }
    }
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "a rate fit needs at least {MIN_FIT_POINTS} positive points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "a rate fit needs at least two distinct horizons".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot <= f64::EPSILON * n * (1.0 + my * my) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    let lo = pts.iter().map(|p| p.2).min().unwrap_or(0);
    let hi = pts.iter().map(|p| p.2).max().unwrap_or(0);
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        t_range: (lo, hi),
    })
}

/// `n` horizons spaced geometrically from `lo` to `hi` inclusive, deduplicated.
pub fn geometric_grid(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    if n <= 1 || lo >= hi {
        return vec![lo.max(1)];
    }
    let (a, b) = ((lo.max(1) as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

/// `sigma^2 log(eT/p)`, the noise threshold of the event `E(p)`.
pub fn event_threshold(sigma: f64, horizon: usize, fail_prob: f64) -> f64 {
    sigma * sigma * (std::f64::consts::E * horizon as f64 / fail_prob).ln()
}

/// Whether `M_T <= sigma^2 log(eT/p)` on this trace.
pub fn event_holds(trace: &Trace, sigma: f64, fail_prob: f64) -> Result<bool> {
    if !(fail_prob > 0.0 && fail_prob < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "failure probability must lie in (0, 1), got {fail_prob}"
        )));
    }
    if trace.noise_sigma > 0.0 && !trace.is_noisy() && !trace.is_empty() {
        return Err(Error::InvalidInput(
            "trace was run with noise but carries no noise records".into(),
        ));
    }
    let m = crate::noise::max_noise_norm_sq(trace, trace.len())?;
    Ok(m <= event_threshold(sigma, trace.len(), fail_prob))
}

pub const MIN_EVENT_TRACES: usize = 50;

/// Fraction of traces on which `M_T <= sigma^2 log(eT/p)`.
pub fn event_frequency(traces: &[Trace], sigma: f64, fail_prob: f64) -> Result<f64> {
    if traces.len() < MIN_EVENT_TRACES {
        return Err(Error::InsufficientData(format!(
            "event frequency needs at least {MIN_EVENT_TRACES} traces, got {}",
            traces.len()
        )));
    }
    let mut hits = 0usize;
    for t in traces {
        if event_holds(t, sigma, fail_prob)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / traces.len() as f64)
}

/// One-sided binomial test of `P(success) >= floor`: passes unless observing
/// at most `successes` out of `trials` would have probability below
/// `1 - confidence` when the true rate equals the floor.
pub fn binomial_floor_test(successes: usize, trials: usize, floor: f64, confidence: f64) -> Result<bool> {
    if successes > trials || trials == 0 {
        return Err(Error::InvalidInput(format!(
            "{successes} successes out of {trials} trials"
        )));
    }
    let dist = Binomial::new(floor, trials as u64)
        .map_err(|e| Error::InvalidParameter(format!("binomial floor {floor}: {e}")))?;
    Ok(dist.cdf(successes as u64) >= 1.0 - confidence)
}

/// Runs `config` on `F` and on `c F` with `b0 -> c b0` and returns
/// `max_t ||x_t - x'_t|| / (1 + ||x_t||)`, including `x_{T+1}`.
pub fn scale_invariance_check(spec: &ProblemSpec, config: &OptimizerConfig, start: &[f64], c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scale factor must be positive, got {c}"
        )));
    }
    if config.algorithm == Algorithm::AdaGradNormStochastic {
        return Err(Error::InvalidParameter(
            "scale invariance is checked on deterministic runs only".into(),
        ));
    }
    let noise = NoiseModel::none(spec.dim());
    let base = run(spec, &noise, config, start)?;
    let scaled_spec = spec.scaled(c)?;
    let mut scaled_cfg = config.clone();
    scaled_cfg.b0 = config.b0.scaled(c);
    let scaled = run(&scaled_spec, &noise, &scaled_cfg, start)?;
    let dev = |a: &[f64], b: &[f64]| norm(&sub(a, b)) / (1.0 + norm(a));
    let steps = base
        .records()
        .iter()
        .zip(scaled.records())
        .map(|(a, b)| dev(&a.iterate, &b.iterate));
    Ok(steps
        .chain(std::iter::once(dev(&base.final_iterate, &scaled.final_iterate)))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_quadratic;

    #[test]
    fn exact_power_laws() {
        let ts: Vec<usize> = vec![10, 100, 1000, 10_000, 100_000];
        for p in [1.0, 2.0, 0.5] {
            let gaps: Vec<f64> = ts.iter().map(|&t| 3.0 / (t as f64).powf(p)).collect();
            let fit = fit_loglog_slope(&ts, &gaps).unwrap();
            assert!((fit.slope + p).abs() < 1e-9);
            assert!((fit.r_squared - 1.0).abs() < 1e-12);
            assert_eq!(fit.t_range, (10, 100_000));
        }
        let flat = fit_loglog_slope(&ts, &[0.3; 5]).unwrap();
        assert!(flat.slope.abs() < 1e-12);
    }

    #[test]
    fn fit_needs_five_points() {
        let ts = [10, 100, 1000, 10_000, 100_000];
        assert!(matches!(
            fit_loglog_slope(&ts[..4], &[1.0, 0.1, 0.01, 0.001]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_loglog_slope(&ts, &[1.0, 0.0, 0.01, 0.001, 1e-4]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(100, 10_000, 5);
        assert_eq!(g, vec![100, 316, 1000, 3162, 10_000]);
    }

    #[test]
    fn average_and_last_gap() {
        let q = make_quadratic(1, &[1.0], &[0.0]).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, 0.1, 3);
        let tr = run(&q, &NoiseModel::none(1), &cfg, &[2.0]).unwrap();
        let g = tr.records();
        assert_eq!(average_gap(&tr, 2).unwrap(), (g[0].gap + g[1].gap) / 2.0);
        assert_eq!(last_gap(&tr).unwrap(), tr.final_gap);
        assert!(average_gap(&tr, 0).is_err());
        assert!(average_gap(&tr, 4).is_err());

        let acc = OptimizerConfig::new(Algorithm::AccPower, 1.0, 0.1, 3);
        let tr = run(&q, &NoiseModel::none(1), &acc, &[2.0]).unwrap();
        assert_eq!(last_gap(&tr).unwrap(), tr.records()[2].avg_gap.unwrap());

        let empty = run(&q, &NoiseModel::none(1), &cfg.with_horizon(0), &[2.0]).unwrap();
        assert!(matches!(last_gap(&empty), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn binomial_floor() {
        assert!(binomial_floor_test(180, 200, 0.9, 0.99).unwrap());
        assert!(binomial_floor_test(170, 200, 0.9, 0.99).unwrap());
        assert!(!binomial_floor_test(150, 200, 0.9, 0.99).unwrap());
    }

    #[test]
    fn noiseless_event_frequency_is_one() {
        let q = make_quadratic(2, &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, 0.1, 20);
        let tr = run(&q, &NoiseModel::none(2), &cfg, &[1.0, 1.0]).unwrap();
        let traces = vec![tr; 50];
        assert_eq!(event_frequency(&traces, 0.0, 0.5).unwrap(), 1.0);
        assert!(matches!(
            event_frequency(&traces[..10], 0.0, 0.5),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn scale_invariance_rejects_noise() {
        let q = make_quadratic(1, &[1.0], &[0.0]).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::AdaGradNormStochastic, 1.0, 0.1, 5);
        assert!(scale_invariance_check(&q, &cfg, &[1.0], 10.0).is_err());
    }
}
