//! Closed-form convergence envelopes and the glue that compares them with
//! observed traces.
//!
//! Logarithms are natural; `log+ x = max(ln x, 0)`. Every evaluator is a pure
//! function of [`BoundInputs`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{dist_sq, norm_sq};
use crate::optimizers::{fmt_f64, Algorithm, OptimizerConfig, Trace};
use crate::problems::ProblemSpec;
use crate::{Error, Result};

/// Every envelope the library can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// Average gap of AdaGradNorm under quasar convexity and weak smoothness.
    AvgGapMain,
    /// Average gap of AdaGradNorm under quasar convexity and smoothness.
    AvgGapImproved,
    /// Final accumulator of deterministic AdaGradNorm.
    BtDeterministic,
    /// High-probability envelope for the accumulator of stochastic AdaGradNorm.
    GtStochastic,
    /// Last iterate of the power variant (`D > 0`).
    LastPower,
    /// Last iterate of the interpolated-denominator variant (`d < 1`).
    LastExp,
    /// Last iterate of the shared `D = 0` / `d = 1` limit, convex case.
    LastLimit,
    /// Averaged point of the accelerated power variant.
    AccPower,
    /// Averaged point of the accelerated interpolated variant.
    AccExp,
    /// Averaged point of the accelerated limit, `O(1/T^2 + 1/T)`.
    AccLimit,
    /// Sum of per-coordinate accumulators.
    CoordSum,
    /// Average gap of per-coordinate AdaGrad.
    CoordGap,
}

impl TheoremId {
    pub const ALL: [TheoremId; 12] = [
        TheoremId::AvgGapMain,
        TheoremId::AvgGapImproved,
        TheoremId::BtDeterministic,
        TheoremId::GtStochastic,
        TheoremId::LastPower,
        TheoremId::LastExp,
        TheoremId::LastLimit,
        TheoremId::AccPower,
        TheoremId::AccExp,
        TheoremId::AccLimit,
        TheoremId::CoordSum,
        TheoremId::CoordGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::AvgGapMain => "avg_gap_main",
            TheoremId::AvgGapImproved => "avg_gap_improved",
            TheoremId::BtDeterministic => "bt_deterministic",
            TheoremId::GtStochastic => "gt_stochastic",
            TheoremId::LastPower => "last_power",
            TheoremId::LastExp => "last_exp",
            TheoremId::LastLimit => "last_limit",
            TheoremId::AccPower => "acc_power",
            TheoremId::AccExp => "acc_exp",
            TheoremId::AccLimit => "acc_limit",
            TheoremId::CoordSum => "coord_sum",
            TheoremId::CoordGap => "coord_gap",
        }
    }

    /// One-paragraph human description used by the CLI.
    pub fn describe(self) -> &'static str {
        match self {
            TheoremId::AvgGapMain => {
                "AdaGradNorm average gap, gamma-quasar convex and weakly L-smooth objective.\n\
                 sum_t (F(x_t) - F*) / T <= (2 L D^2/(g eta) + (4 eta L/g) log+(2 eta L/(g b0)) + b0)\n\
                 * (D^2/(g eta) + (2 eta/g) log+(2 eta L/(g b0))) / T\n\
                 observed: average gap; pairs with adagradnorm traces"
            }
            TheoremId::AvgGapImproved => {
                "AdaGradNorm average gap, gamma-quasar convex and L-smooth objective.\n\
                 sum_t (F(x_t) - F*) / T <= (L D^2/eta + 2 eta L log+(eta L/b0) + b0)\n\
                 * (D^2/(g eta) + (2 eta/g) log+(2 eta L/b0)) / T\n\
                 observed: average gap; pairs with adagradnorm traces"
            }
            TheoremId::BtDeterministic => {
                "Final AdaGradNorm accumulator, deterministic gradients.\n\
                 b_T <= L D^2/eta + 2 eta L log+(eta L/b0) + b0\n\
                 observed: b_T; pairs with adagradnorm traces"
            }
            TheoremId::GtStochastic => {
                "Final accumulator of stochastic AdaGradNorm on the event M_T <= sigma^2 log(eT/p).\n\
                 b_T <= 2 b0 + 4 (F(x_1) - F*)/eta + 4 eta L log+(eta L/b0)\n\
                 + 4 sigma sqrt(T log(eT/p) log(1 + 16 sigma^2 T log(eT/p)/b0^2))\n\
                 observed: b_T; the event holds with probability >= 1 - p"
            }
            TheoremId::LastPower => {
                "Last iterate of the power variant with p_t = 1/t and D > 0.\n\
                 F(x_{T+1}) - F* <= ((2/eta) K + b0^D)^(1/D) K / T, K = D^2/(g eta) + h(D) + g(D)\n\
                 observed: final gap; pairs with last_power traces"
            }
            TheoremId::LastExp => {
                "Last iterate of the interpolated-denominator variant with p_t = 1/t, d in [2/3, 1).\n\
                 F(x_{T+1}) - F* <= b0 exp(k(d)/(1 - d)) k(d) / T\n\
                 observed: final gap; pairs with last_exp traces"
            }
            TheoremId::LastLimit => {
                "Last iterate at D = 0 (equivalently d = 1), p_t = 1/t, convex L-smooth objective.\n\
                 F(x_{T+1}) - F* <= b (D^2/(2 eta) + (eta/2)(2 eta L/b0 - 1)+) / T with an explicit constant b\n\
                 observed: final gap; pairs with last_power (D = 0) or last_exp (d = 1) traces"
            }
            TheoremId::AccPower => {
                "Accelerated power variant, a_t = 2/(t+1), q_t = 2/t, convex L-smooth objective.\n\
                 F(w_{T+1}) - F* <= (2 D^2/eta^2 + 4 h(D)/eta + b0^D)^(1/D) (D^2/(2 eta) + h(D)) / (T (T+1))\n\
                 observed: gap at the averaged point; pairs with acc_power traces"
            }
            TheoremId::AccExp => {
                "Accelerated interpolated variant, a_t = 2/(t+1), q_t = 2/t, convex L-smooth objective.\n\
                 F(w_{T+1}) - F* <= b0 exp(s(d)/(1 - d)) s(d) / (T (T+1))\n\
                 observed: gap at the averaged point; pairs with acc_exp traces"
            }
            TheoremId::AccLimit => {
                "Accelerated limit D = 0 (d = 1).\n\
                 F(w_{T+1}) - F* <= 4 (b0 + 4 eta^2 L^2/b0) D# / (T (T+1)) + 16 L D#^2 / (T+1),\n\
                 D# = D^2/(2 eta) + (eta^2 L/b0) log+(eta L/b0)\n\
                 observed: gap at the averaged point; pairs with acc_power / acc_exp traces"
            }
            TheoremId::CoordSum => {
                "Per-coordinate AdaGrad accumulator sum.\n\
                 sum_j b_{T,j} <= sum_j b0_j + 2 (F(x_1) - F*)/eta + 2 eta sum_j L_j log+(eta L_j/b0_j)\n\
                 observed: sum_j b_{T,j}; pairs with adagrad_coord traces"
            }
            TheoremId::CoordGap => {
                "Per-coordinate AdaGrad average gap, gamma-quasar convex and diag(L_j)-smooth objective.\n\
                 avg gap <= S^d (||x_1 - x*||^2_{b_1}/(g eta) + (2 eta/g) sum_j (2 eta L_j/g - b0_j)+) / (T d^d prod_j b0_j)\n\
                 observed: average gap; pairs with adagrad_coord traces"
            }
        }
    }

    /// Algorithms whose traces this envelope may be checked against.
    pub fn compatible_algorithms(self) -> &'static [Algorithm] {
        use Algorithm::*;
        match self {
            TheoremId::AvgGapMain | TheoremId::AvgGapImproved | TheoremId::BtDeterministic => {
                &[AdaGradNorm, AdaGradNormStochastic]
            }
            TheoremId::GtStochastic => &[AdaGradNormStochastic, AdaGradNorm],
            TheoremId::LastPower => &[LastPower],
            TheoremId::LastExp => &[LastExp],
            TheoremId::LastLimit => &[LastPower, LastExp],
            TheoremId::AccPower => &[AccPower],
            TheoremId::AccExp => &[AccExp],
            TheoremId::AccLimit => &[AccPower, AccExp],
            TheoremId::CoordSum | TheoremId::CoordGap => &[AdagradCoord],
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown theorem id `{s}`")))
    }
}

/// Every constant appearing in an implemented envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Smoothness `L`.
    pub l: f64,
    /// Quasar-convexity `gamma`.
    pub gamma: f64,
    pub eta: f64,
    pub b0: f64,
    /// `||x_1 - x*||^2`.
    pub dist0_sq: f64,
    /// `F(x_1) - F*`.
    pub gap0: f64,
    pub sigma: f64,
    pub delta_big: f64,
    pub delta_small: f64,
    /// Horizon `T`.
    pub t: usize,
    /// Failure probability of the high-probability accumulator envelope.
    pub fail_prob: f64,
    pub coord_l: Option<Vec<f64>>,
    pub coord_b0: Option<Vec<f64>>,
    /// `||grad F(x_1)||^2`.
    pub grad1_norm_sq: f64,
    /// `sum_j b_{1,j} (x_{1,j} - x*_j)^2`.
    pub b1_vec_dist_sq: Option<f64>,
}

pub const DEFAULT_FAIL_PROB: f64 = 0.1;

impl BoundInputs {
    /// Collects the constants of a run of `config` on `spec` from `start`.
    /// `sigma` is the certified noise parameter (0 when exact).
    pub fn from_run(spec: &ProblemSpec, config: &OptimizerConfig, start: &[f64], sigma: f64) -> Result<Self> {
        if start.len() != spec.dim() {
            return Err(Error::InvalidInput(format!(
                "start point has dimension {} but the problem has {}",
                start.len(),
                spec.dim()
            )));
        }
        let g1 = spec.grad_at(start);
        let x_star = spec.minimizer();
        let (coord_b0, b1_vec_dist_sq) = if config.algorithm == Algorithm::AdagradCoord {
            let b0 = config.b0.per_coord(spec.dim());
            let weighted = b0
                .iter()
                .zip(&g1)
                .zip(start.iter().zip(x_star))
                .map(|((b, g), (x, s))| (b * b + g * g).sqrt() * (x - s) * (x - s))
                .sum();
            (Some(b0), Some(weighted))
        } else {
            (None, None)
        };
        Ok(Self {
            l: spec.smoothness(),
            gamma: spec.quasar_gamma(),
            eta: config.eta,
            b0: config.b0.scalar(),
            dist0_sq: dist_sq(start, x_star),
            gap0: spec.gap_at(start).max(0.0),
            sigma,
            delta_big: config.delta_big,
            delta_small: config.delta_small,
            t: config.horizon.max(1),
            fail_prob: DEFAULT_FAIL_PROB,
            coord_l: spec.coord_smoothness().map(|l| l.to_vec()),
            coord_b0,
            grad1_norm_sq: norm_sq(&g1),
            b1_vec_dist_sq,
        })
    }

    pub fn with_horizon(&self, t: usize) -> Self {
        Self { t, ..self.clone() }
    }

    pub fn with_fail_prob(&self, p: f64) -> Self {
        Self {
            fail_prob: p,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be nonnegative, got {v}")))
            }
        };
        positive("L", self.l)?;
        positive("eta", self.eta)?;
        positive("b0", self.b0)?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        nonneg("dist0_sq", self.dist0_sq)?;
        nonneg("gap0", self.gap0)?;
        nonneg("sigma", self.sigma)?;
        nonneg("grad1_norm_sq", self.grad1_norm_sq)?;
        if self.t == 0 {
            return Err(Error::InvalidInput("T must be positive".into()));
        }
        Ok(())
    }

    fn t(&self) -> f64 {
        self.t as f64
    }
}

/// `max(ln x, 0)`.
pub fn log_plus(x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(x.ln().max(0.0))
    } else {
        Err(Error::Domain(format!("log+ needs a positive argument, got {x}")))
    }
}

/// `(x)+`.
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Internal `log+` for arguments that are positive by construction.
fn lp(x: f64) -> f64 {
    x.ln().max(0.0)
}

fn require_delta_big(i: &BoundInputs) -> Result<f64> {
    if i.delta_big > 0.0 && i.delta_big.is_finite() {
        Ok(i.delta_big)
    } else {
        Err(Error::Domain(format!(
            "this envelope needs D > 0 (got {}); use the limit envelope for D = 0",
            i.delta_big
        )))
    }
}

fn require_delta_small(i: &BoundInputs) -> Result<f64> {
    if (2.0 / 3.0 - 1e-12..1.0).contains(&i.delta_small) {
        Ok(i.delta_small)
    } else {
        Err(Error::Domain(format!(
            "this envelope needs d in [2/3, 1) (got {}); use the limit envelope for d = 1",
            i.delta_small
        )))
    }
}

/// Which `h(D)` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMode {
    LastIterate,
    Accelerated,
}

/// `h(D)` of the last-iterate or accelerated power envelope.
pub fn h_of_delta(i: &BoundInputs, mode: HMode) -> Result<f64> {
    i.validate()?;
    let d = require_delta_big(i)?;
    let (eta, l, b0) = (i.eta, i.l, i.b0);
    Ok(match mode {
        HMode::LastIterate => {
            let log = lp(eta * l / b0);
            if d >= 1.0 {
                (2.0 + d) * eta * (eta * l).powf(d) / 2.0 * log
            } else {
                (2.0 + d) * eta * eta * l / (2.0 * b0.powf(1.0 - d)) * log
            }
        }
        HMode::Accelerated => {
            let log = lp(2.0 * eta * l / b0);
            if d >= 1.0 {
                (2.0 + d) * (2.0 * eta * l).powf(d - 1.0) * l * eta * eta / 2.0 * log
            } else {
                (2.0 + d) * l * eta * eta / (2.0 * b0.powf(1.0 - d)) * log
            }
        }
    })
}

/// `g(D) = ((2+D) eta/g) (2 eta L/g)^D log+(2 eta L/(g b0))`.
pub fn g_of_delta(i: &BoundInputs) -> Result<f64> {
    i.validate()?;
    let d = require_delta_big(i)?;
    let (eta, l, b0, g) = (i.eta, i.l, i.b0, i.gamma);
    Ok((2.0 + d) * eta / g * (2.0 * eta * l / g).powf(d) * lp(2.0 * eta * l / (g * b0)))
}

/// Second factor shared by the average-gap envelopes.
fn avg_second_factor(i: &BoundInputs, log_arg: f64) -> f64 {
    i.dist0_sq / (i.gamma * i.eta) + 2.0 * i.eta / i.gamma * lp(log_arg)
}

pub fn bound_avg_gap_main(i: &BoundInputs) -> Result<f64> {
    i.validate()?;
    let (eta, l, b0, g, d2) = (i.eta, i.l, i.b0, i.gamma, i.dist0_sq);
    let arg = 2.0 * eta * l / (g * b0);
    let first = 2.0 * l * d2 / (g * eta) + 4.0 * eta * l / g * lp(arg) + b0;
    Ok(first * avg_second_factor(i, arg) / i.t())
}

pub fn bound_avg_gap_improved(i: &BoundInputs) -> Result<f64> {
    i.validate()?;
    let (eta, l, b0) = (i.eta, i.l, i.b0);
    Ok(bound_bt_deterministic(i)? * avg_second_factor(i, 2.0 * eta * l / b0) / i.t())
}

pub fn bound_bt_deterministic(i: &BoundInputs) -> Result<f64> {
    i.validate()?;
    let (eta, l, b0) = (i.eta, i.l, i.b0);
    Ok(l * i.dist0_sq / eta + 2.0 * eta * l * lp(eta * l / b0) + b0)
}

pub fn bound_gt_stochastic(i: &BoundInputs) -> Result<f64> {
    i.validate()?;
    if !(i.fail_prob > 0.0 && i.fail_prob < 1.0) {
        return Err(Error::InvalidInput(format!(
            "failure probability must lie in (0, 1), got {}",
            i.fail_prob
        )));
    }
    let (eta, l, b0, s) = (i.eta, i.l, i.b0, i.sigma);
    let tl = i.t() * (std::f64::consts::E * i.t() / i.fail_prob).ln();
    let noise = 4.0 * s * (tl * (16.0 * s * s * tl / (b0 * b0)).ln_1p()).sqrt();
    Ok(2.0 * b0 + 4.0 * i.gap0 / eta + 4.0 * eta * l * lp(eta * l / b0) + noise)
}

/// `D^2/(g eta) + h(D) + g(D)`.
fn last_power_inner(i: &BoundInputs) -> Result<f64> {
    Ok(i.dist0_sq / (i.gamma * i.eta) + h_of_delta(i, HMode::LastIterate)? + g_of_delta(i)?)
}

pub fn bound_last_power(i: &BoundInputs) -> Result<f64> {
    let d = {
        i.validate()?;
        require_delta_big(i)?
    };
    let k = last_power_inner(i)?;
    Ok((2.0 / i.eta * k + i.b0.powf(d)).powf(1.0 / d) * k / i.t())
}

/// `k(d)` of the last-iterate interpolated envelope.
pub fn k_of_delta(i: &BoundInputs) -> Result<f64> {
    i.validate()?;
    let d = require_delta_small(i)?;
    let (eta, l, b0, g) = (i.eta, i.l, i.b0, i.gamma);
    let r = 2.0 * eta * l / (g * b0);
    Ok(i.dist0_sq / (g * eta * eta)
        + eta * l / b0 * pos(1.0 - (b0 / (eta * l)).powf(1.0 / d))
        + 2.0 / (g * d) * r.powf(2.0 / d - 2.0) * lp(r))
}

pub fn bound_last_exp(i: &BoundInputs) -> Result<f64> {
    let k = k_of_delta(i)?;
    let d = i.delta_small;
    Ok(i.b0 * (k / (1.0 - d)).exp() * k / i.t())
}

/// The constant `b` of the limit envelope, reading the distance inside the
/// third branch at `x_1`.
pub fn last_limit_b(i: &BoundInputs) -> Result<f64> {
    i.validate()?;
    let (eta, l, b0) = (i.eta, i.l, i.b0);
    let excess = pos(2.0 * eta * l / b0 - 1.0);
    let growth = (3.0 * i.dist0_sq / (eta * eta) + 3.0 * excess).exp();
    let second = (b0 * b0 + i.grad1_norm_sq).sqrt() * growth;
    let third = eta * l * (0.25 + i.dist0_sq / (eta * eta) + excess).sqrt() * growth;
    Ok((eta * l / 2.0).max(second).max(third))
}

pub fn bound_last_limit(i: &BoundInputs) -> Result<f64> {
    let b = last_limit_b(i)?;
    let (eta, l, b0) = (i.eta, i.l, i.b0);
    let excess = pos(2.0 * eta * l / b0 - 1.0);
    Ok(b * (i.dist0_sq / (2.0 * eta) + eta / 2.0 * excess) / i.t())
}

fn t_t1(i: &BoundInputs) -> f64 {
    i.t() * (i.t() + 1.0)
}

pub fn bound_acc_power(i: &BoundInputs) -> Result<f64> {
    let h = h_of_delta(i, HMode::Accelerated)?;
    let d = i.delta_big;
    let eta = i.eta;
    let base = 2.0 * i.dist0_sq / (eta * eta) + 4.0 * h / eta + i.b0.powf(d);
    Ok(base.powf(1.0 / d) * (i.dist0_sq / (2.0 * eta) + h) / t_t1(i))
}

/// `s(d)` of the accelerated interpolated envelope.
pub fn s_of_delta(i: &BoundInputs) -> Result<f64> {
    i.validate()?;
    let d = require_delta_small(i)?;
    let (eta, l, b0) = (i.eta, i.l, i.b0);
    Ok(i.dist0_sq / (2.0 * eta) + eta * eta * l / b0 * pos(1.0 - (b0 / (2.0 * eta * l)).powf(1.0 / d)))
}

pub fn bound_acc_exp(i: &BoundInputs) -> Result<f64> {
    let s = s_of_delta(i)?;
    Ok(i.b0 * (s / (1.0 - i.delta_small)).exp() * s / t_t1(i))
}

pub fn bound_acc_limit(i: &BoundInputs) -> Result<f64> {
    i.validate()?;
    let (eta, l, b0) = (i.eta, i.l, i.b0);
    let d_sharp = i.dist0_sq / (2.0 * eta) + eta * eta * l / b0 * lp(eta * l / b0);
    Ok(4.0 * (b0 + 4.0 * eta * eta * l * l / b0) * d_sharp / t_t1(i)
        + 16.0 * l * d_sharp * d_sharp / (i.t() + 1.0))
}

/// `(sum_j b_{T,j} envelope, average-gap envelope)` for per-coordinate AdaGrad.
pub fn bound_adagrad_coord(i: &BoundInputs) -> Result<(f64, f64)> {
    i.validate()?;
    let missing = |what: &str| Error::InvalidInput(format!("per-coordinate envelope needs {what}"));
    let ls = i.coord_l.as_deref().ok_or_else(|| missing("coord_l"))?;
    let b0s = i.coord_b0.as_deref().ok_or_else(|| missing("coord_b0"))?;
    let b1_dist = i.b1_vec_dist_sq.ok_or_else(|| missing("b1_vec_dist_sq"))?;
    if ls.len() != b0s.len() || ls.is_empty() {
        return Err(Error::InvalidInput(format!(
            "coord_l has {} entries but coord_b0 has {}",
            ls.len(),
            b0s.len()
        )));
    }
    if ls.iter().chain(b0s).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(
            "coord_l and coord_b0 must be positive".into(),
        ));
    }
    let (eta, g) = (i.eta, i.gamma);
    let d = ls.len() as f64;
    let sum_env = b0s.iter().sum::<f64>()
        + 2.0 * i.gap0 / eta
        + 2.0 * eta * ls.iter().zip(b0s).map(|(l, b)| l * lp(eta * l / b)).sum::<f64>();
    let second = b1_dist / (g * eta)
        + 2.0 * eta / g * ls.iter().zip(b0s).map(|(l, b)| pos(2.0 * eta * l / g - b)).sum::<f64>();
    // sum_env^d / (d^d prod b0) computed in log space to delay overflow.
    let log_ratio = d * (sum_env / d).ln() - b0s.iter().map(|b| b.ln()).sum::<f64>();
    let gap_env = log_ratio.exp() * second / i.t();
    Ok((sum_env, gap_env))
}

/// `(e(p), l(p))` of the weak-smoothness stochastic analysis.
pub fn e_p_and_ell_p(p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::Domain(format!("p must lie in (0, 1/2), got {p}")));
    }
    let split = (3.0 - 5f64.sqrt()) / 2.0;
    let log_e = if p < split {
        1.0
    } else {
        let disc = p * (p - 1.0) * (p * p - 3.0 * p + 1.0);
        (p * p + disc.max(0.0).sqrt()) / (p * (1.0 - 2.0 * p))
    };
    Ok((log_e.exp(), 2.0 * p * log_e))
}

/// Evaluates the scalar envelope for `id`; for the per-coordinate theorem
/// `CoordSum` and `CoordGap` select the respective component.
pub fn evaluate(id: TheoremId, i: &BoundInputs) -> Result<f64> {
    match id {
        TheoremId::AvgGapMain => bound_avg_gap_main(i),
        TheoremId::AvgGapImproved => bound_avg_gap_improved(i),
        TheoremId::BtDeterministic => bound_bt_deterministic(i),
        TheoremId::GtStochastic => bound_gt_stochastic(i),
        TheoremId::LastPower => bound_last_power(i),
        TheoremId::LastExp => bound_last_exp(i),
        TheoremId::LastLimit => bound_last_limit(i),
        TheoremId::AccPower => bound_acc_power(i),
        TheoremId::AccExp => bound_acc_exp(i),
        TheoremId::AccLimit => bound_acc_limit(i),
        TheoremId::CoordSum => bound_adagrad_coord(i).map(|(s, _)| s),
        TheoremId::CoordGap => bound_adagrad_coord(i).map(|(_, g)| g),
    }
}

/// Envelope versus observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem_id: String,
    pub envelope: f64,
    pub observed: f64,
    pub margin: f64,
    pub passed: bool,
}

pub const BOUND_CSV_HEADER: [&str; 5] = ["theorem_id", "envelope", "observed", "margin", "passed"];

impl BoundReport {
    pub fn new(theorem_id: impl Into<String>, envelope: f64, observed: f64) -> Self {
        let margin = envelope - observed;
        let tol = 1e-9 * (1.0 + envelope.abs());
        Self {
            theorem_id: theorem_id.into(),
            envelope,
            observed,
            margin,
            passed: margin >= -tol,
        }
    }

    pub fn csv_fields(&self) -> [String; 5] {
        [
            self.theorem_id.clone(),
            fmt_f64(self.envelope),
            fmt_f64(self.observed),
            fmt_f64(self.margin),
            self.passed.to_string(),
        ]
    }
}

/// Binds the trace statistic the theorem speaks about to its envelope. The
/// horizon used is the trace length.
pub fn check_trace_against(id: TheoremId, trace: &Trace, inputs: &BoundInputs) -> Result<BoundReport> {
    let alg = trace.algorithm();
    if !id.compatible_algorithms().contains(&alg) {
        return Err(Error::InvalidPairing(format!(
            "{} envelope cannot be checked against a {} trace",
            id,
            alg.name()
        )));
    }
    match id {
        TheoremId::LastLimit => {
            let cfg = &trace.config;
            let limit = (alg == Algorithm::LastPower && cfg.delta_big == 0.0)
                || (alg == Algorithm::LastExp && cfg.delta_small == 1.0);
            if !limit {
                return Err(Error::InvalidPairing(
                    "the limit envelope needs D = 0 or d = 1".into(),
                ));
            }
        }
        TheoremId::AccLimit => {
            let cfg = &trace.config;
            let limit = (alg == Algorithm::AccPower && cfg.delta_big == 0.0)
                || (alg == Algorithm::AccExp && cfg.delta_small == 1.0);
            if !limit {
                return Err(Error::InvalidPairing(
                    "the accelerated limit envelope needs D = 0 or d = 1".into(),
                ));
            }
        }
        _ => {}
    }
    let last = trace
        .records()
        .last()
        .ok_or_else(|| Error::InvalidInput("cannot check an empty trace".into()))?;
    let inputs = inputs.with_horizon(trace.len());
    let envelope = evaluate(id, &inputs)?;
    let observed = match id {
        TheoremId::AvgGapMain | TheoremId::AvgGapImproved | TheoremId::CoordGap => {
            trace.records().iter().map(|r| r.gap).sum::<f64>() / trace.len() as f64
        }
        TheoremId::BtDeterministic | TheoremId::GtStochastic => last.accumulator[0],
        TheoremId::CoordSum => last.accumulator.iter().sum(),
        TheoremId::LastPower | TheoremId::LastExp | TheoremId::LastLimit => trace.final_gap,
        TheoremId::AccPower | TheoremId::AccExp | TheoremId::AccLimit => last
            .avg_gap
            .ok_or_else(|| Error::InvalidInput("accelerated trace lacks averaged gaps".into()))?,
    };
    Ok(BoundReport::new(id.name(), envelope, observed))
}
