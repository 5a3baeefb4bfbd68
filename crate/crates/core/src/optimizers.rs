//! AdaGradNorm-family update rules behind one stepping interface.
//!
//! Every rule has the shape `x_{t+1} = x_t - (eta / c_t) g_t` where the
//! effective denominator `c_t` is built from an accumulator `b_t` of squared
//! gradient norms:
//!
//! | algorithm                | accumulator                                      | `c_t`                              |
//! |--------------------------|--------------------------------------------------|------------------------------------|
//! | `adagradnorm`(`_stochastic`) | `b_t^2 = b_0^2 + sum ||g_i||^2`                | `b_t`                              |
//! | `adagrad_coord`          | `b_{t,j}^2 = b_{0,j}^2 + sum g_{i,j}^2`          | `b_{t,j}` per coordinate           |
//! | `last_power`             | `b_t^{2+D} = b_0^{2+D} + sum ||g_i||^2 / p_i`    | `b_t`                              |
//! | `last_exp`               | `b_t^2 = b_0^2 + sum ||g_i||^2 / p_i`            | `b_t^d b_{t-1}^{1-d}`              |
//! | `acc_power`              | `b_t^{2+D} = b_0^{2+D} + sum ||g(v_i)||^2 / q_i^2` | `q_t b_t`                        |
//! | `acc_exp`                | `b_t^2 = b_0^2 + sum ||g(v_i)||^2 / q_i^2`       | `q_t b_t^d b_{t-1}^{1-d}`          |
//!
//! The accelerated rules query the gradient at the probe point
//! `v_t = (1 - a_t) w_t + a_t x_t` and keep the running average
//! `w_{t+1} = (1 - a_t) w_t + a_t x_{t+1}`, with `a_t = 2/(t+1)`, `q_t = 2/t`.
//!
//! The accumulator is stored in its powered form (`b^{2+D}` or `b^2`) and
//! rooted once per step.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::{self, lerp, norm, norm_sq};
use crate::noise::{NoiseKind, NoiseModel};
use crate::problems::ProblemSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[serde(rename = "adagradnorm")]
    AdaGradNorm,
    #[serde(rename = "adagradnorm_stochastic")]
    AdaGradNormStochastic,
    AdagradCoord,
    LastPower,
    LastExp,
    AccPower,
    AccExp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::AdaGradNorm,
        Algorithm::AdaGradNormStochastic,
        Algorithm::AdagradCoord,
        Algorithm::LastPower,
        Algorithm::LastExp,
        Algorithm::AccPower,
        Algorithm::AccExp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AdaGradNorm => "adagradnorm",
            Algorithm::AdaGradNormStochastic => "adagradnorm_stochastic",
            Algorithm::AdagradCoord => "adagrad_coord",
            Algorithm::LastPower => "last_power",
            Algorithm::LastExp => "last_exp",
            Algorithm::AccPower => "acc_power",
            Algorithm::AccExp => "acc_exp",
        }
    }

    pub fn is_accelerated(self) -> bool {
        matches!(self, Algorithm::AccPower | Algorithm::AccExp)
    }

    /// Accumulator exponent family: `1/(2+D)` root for the power variants.
    fn uses_power(self) -> bool {
        matches!(self, Algorithm::LastPower | Algorithm::AccPower)
    }

    fn uses_delta_small(self) -> bool {
        matches!(self, Algorithm::LastExp | Algorithm::AccExp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PSchedule {
    /// `p_t = 1/t`.
    ReciprocalT,
    /// `p_t = 1`.
    ConstantOne,
}

impl PSchedule {
    /// `1 / p_t`.
    fn inverse(self, t: usize) -> f64 {
        match self {
            PSchedule::ReciprocalT => t as f64,
            PSchedule::ConstantOne => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AqSchedule {
    /// `a_t = 2/(t+1)`, `q_t = 2/t`.
    Standard,
}

impl AqSchedule {
    pub fn a(self, t: usize) -> f64 {
        match self {
            AqSchedule::Standard => 2.0 / (t as f64 + 1.0),
        }
    }

    pub fn q(self, t: usize) -> f64 {
        match self {
            AqSchedule::Standard => 2.0 / t as f64,
        }
    }
}

/// Denominator used at `t = 1` by the `_exp` variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStepRule {
    /// `b_1^d b_0^{1-d}`, as in the analysed algorithm.
    Blended,
    /// `b_1`, which avoids a huge first step when `b_0` is tiny.
    CurrentOnly,
}

/// Initial accumulator: one value, or one per coordinate for `adagrad_coord`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialAccumulator {
    Scalar(f64),
    Coord(Vec<f64>),
}

impl InitialAccumulator {
    fn values(&self) -> Vec<f64> {
        match self {
            InitialAccumulator::Scalar(b) => vec![*b],
            InitialAccumulator::Coord(b) => b.clone(),
        }
    }

    /// Scalar view; the largest entry for a vector.
    pub fn scalar(&self) -> f64 {
        match self {
            InitialAccumulator::Scalar(b) => *b,
            InitialAccumulator::Coord(b) => b.iter().cloned().fold(f64::MIN, f64::max),
        }
    }

    /// Per-coordinate view, broadcasting a scalar.
    pub fn per_coord(&self, dim: usize) -> Vec<f64> {
        match self {
            InitialAccumulator::Scalar(b) => vec![*b; dim],
            InitialAccumulator::Coord(b) => b.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            InitialAccumulator::Scalar(b) => InitialAccumulator::Scalar(c * b),
            InitialAccumulator::Coord(b) => {
                InitialAccumulator::Coord(b.iter().map(|v| c * v).collect())
            }
        }
    }
}

impl From<f64> for InitialAccumulator {
    fn from(b: f64) -> Self {
        InitialAccumulator::Scalar(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub b0: InitialAccumulator,
    /// Power offset `D >= 0` of the `_power` variants.
    #[serde(default = "default_delta_big")]
    pub delta_big: f64,
    /// Interpolation exponent `d in [2/3, 1]` of the `_exp` variants.
    #[serde(default = "default_delta_small")]
    pub delta_small: f64,
    #[serde(default = "default_p_schedule")]
    pub p_schedule: PSchedule,
    #[serde(default = "default_aq_schedule")]
    pub aq_schedule: AqSchedule,
    #[serde(default = "default_first_step_rule")]
    pub first_step_rule: FirstStepRule,
    pub horizon: usize,
}

fn default_delta_big() -> f64 {
    1.0
}

fn default_delta_small() -> f64 {
    2.0 / 3.0
}

fn default_p_schedule() -> PSchedule {
    PSchedule::ReciprocalT
}

fn default_aq_schedule() -> AqSchedule {
    AqSchedule::Standard
}

fn default_first_step_rule() -> FirstStepRule {
    FirstStepRule::Blended
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm, eta: f64, b0: impl Into<InitialAccumulator>, horizon: usize) -> Self {
        Self {
            algorithm,
            eta,
            b0: b0.into(),
            delta_big: default_delta_big(),
            delta_small: default_delta_small(),
            p_schedule: default_p_schedule(),
            aq_schedule: default_aq_schedule(),
            first_step_rule: default_first_step_rule(),
            horizon,
        }
    }

    pub fn with_delta_big(mut self, delta_big: f64) -> Self {
        self.delta_big = delta_big;
        self
    }

    pub fn with_delta_small(mut self, delta_small: f64) -> Self {
        self.delta_small = delta_small;
        self
    }

    pub fn with_p_schedule(mut self, p: PSchedule) -> Self {
        self.p_schedule = p;
        self
    }

    pub fn with_first_step_rule(mut self, rule: FirstStepRule) -> Self {
        self.first_step_rule = rule;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        let b0 = self.b0.values();
        if b0.is_empty() || b0.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidParameter(
                "b0 must be positive in every coordinate".into(),
            ));
        }
        if matches!(self.b0, InitialAccumulator::Coord(_))
            && self.algorithm != Algorithm::AdagradCoord
        {
            return Err(Error::InvalidParameter(format!(
                "a per-coordinate b0 only applies to adagrad_coord, not {}",
                self.algorithm.name()
            )));
        }
        if self.algorithm.uses_power() && !(self.delta_big >= 0.0 && self.delta_big.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta_big must be >= 0, got {}",
                self.delta_big
            )));
        }
        if self.algorithm.uses_delta_small()
            && !(self.delta_small >= 2.0 / 3.0 - 1e-12 && self.delta_small <= 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "delta_small must lie in [2/3, 1], got {}",
                self.delta_small
            )));
        }
        Ok(())
    }

    /// Exponent of the powered accumulator.
    fn accumulator_power(&self) -> f64 {
        if self.algorithm.uses_power() {
            2.0 + self.delta_big
        } else {
            2.0
        }
    }

    /// Short stable digest of the configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        let hash = Sha256::digest(&json);
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-run optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    /// Index of the step about to be taken (starts at 1).
    pub t: usize,
    /// `x_t`.
    pub iterate: Vec<f64>,
    /// `b_t`: one entry, or one per coordinate for `adagrad_coord`.
    pub accumulator: Vec<f64>,
    /// `b_t` raised to the accumulator power.
    pub powered: Vec<f64>,
    /// `b_{t-1}`.
    pub prev_accumulator: Vec<f64>,
    /// `w_t` (accelerated variants only).
    pub avg_point: Option<Vec<f64>>,
    /// `v_t` (accelerated variants only).
    pub probe_point: Option<Vec<f64>>,
    /// `c_t` used by the last completed step.
    pub effective_denominator: Vec<f64>,
}

impl StepState {
    pub fn new(config: &OptimizerConfig, start: &[f64]) -> Result<Self> {
        config.validate()?;
        if start.is_empty() || !linalg::all_finite(start) {
            return Err(Error::InvalidInput(
                "start point must be nonempty and finite".into(),
            ));
        }
        let b0 = if config.algorithm == Algorithm::AdagradCoord {
            let b0 = config.b0.per_coord(start.len());
            if b0.len() != start.len() {
                return Err(Error::InvalidInput(format!(
                    "b0 has {} entries but the start point has {}",
                    b0.len(),
                    start.len()
                )));
            }
            b0
        } else {
            config.b0.values()
        };
        let power = config.accumulator_power();
        let powered: Vec<f64> = b0.iter().map(|b| b.powf(power)).collect();
        let (avg_point, probe_point) = if config.algorithm.is_accelerated() {
            // x_1 = w_1, and a_1 = 1 gives v_1 = x_1.
            (Some(start.to_vec()), Some(start.to_vec()))
        } else {
            (None, None)
        };
        Ok(Self {
            t: 1,
            iterate: start.to_vec(),
            accumulator: b0.clone(),
            powered,
            prev_accumulator: b0,
            avg_point,
            probe_point,
            effective_denominator: Vec::new(),
        })
    }

    /// Where the next gradient must be evaluated: `v_t` for accelerated
    /// variants, `x_t` otherwise.
    pub fn query_point(&self) -> &[f64] {
        self.probe_point.as_deref().unwrap_or(&self.iterate)
    }

    /// Scalar `b_t` (the sum over coordinates for `adagrad_coord`).
    pub fn accumulator_total(&self) -> f64 {
        self.accumulator.iter().sum()
    }
}

fn check_gradient(state: &StepState, gradient: &[f64]) -> Result<()> {
    if gradient.len() != state.iterate.len() {
        return Err(Error::InvalidInput(format!(
            "gradient has length {} but iterate has {}",
            gradient.len(),
            state.iterate.len()
        )));
    }
    if !linalg::all_finite(gradient) {
        return Err(Error::NumericFailure {
            t: state.t,
            reason: "non-finite gradient".into(),
        });
    }
    Ok(())
}

/// Adds `increment` to the scalar powered accumulator and refreshes `b_t`.
fn accumulate(state: &mut StepState, increment: f64, power: f64) -> Result<()> {
    state.prev_accumulator = state.accumulator.clone();
    let powered = state.powered[0] + increment;
    if !powered.is_finite() {
        return Err(Error::NumericFailure {
            t: state.t,
            reason: format!(
                "powered accumulator b^{power} overflowed; rescale the objective or b0"
            ),
        });
    }
    state.powered[0] = powered;
    state.accumulator[0] = root(powered, power);
    Ok(())
}

fn root(powered: f64, power: f64) -> f64 {
    if power == 2.0 {
        powered.sqrt()
    } else {
        powered.powf(1.0 / power)
    }
}

/// `b_t^d b_{t-1}^{1-d}`, or `b_1` at `t = 1` under the `current_only` rule.
fn interpolated_denominator(state: &StepState, config: &OptimizerConfig) -> f64 {
    let b = state.accumulator[0];
    if state.t == 1 && config.first_step_rule == FirstStepRule::CurrentOnly {
        return b;
    }
    let d = config.delta_small;
    b.powf(d) * state.prev_accumulator[0].powf(1.0 - d)
}

fn descend(x: &mut [f64], eta: f64, denom: f64, gradient: &[f64]) {
    let step = eta / denom;
    for (xi, gi) in x.iter_mut().zip(gradient) {
        *xi -= step * gi;
    }
}

/// AdaGradNorm step; also the stochastic variant when fed `g_hat`.
pub fn step_adagradnorm(state: &mut StepState, config: &OptimizerConfig, gradient: &[f64]) -> Result<()> {
    check_gradient(state, gradient)?;
    accumulate(state, norm_sq(gradient), 2.0)?;
    let denom = state.accumulator[0];
    descend(&mut state.iterate, config.eta, denom, gradient);
    state.effective_denominator = vec![denom];
    state.t += 1;
    Ok(())
}

/// Per-coordinate AdaGrad step.
pub fn step_adagrad_coord(state: &mut StepState, config: &OptimizerConfig, gradient: &[f64]) -> Result<()> {
    check_gradient(state, gradient)?;
    if state.accumulator.len() != gradient.len() {
        return Err(Error::InvalidInput(
            "per-coordinate step needs one accumulator per coordinate".into(),
        ));
    }
    state.prev_accumulator = state.accumulator.clone();
    for j in 0..gradient.len() {
        let powered = state.powered[j] + gradient[j] * gradient[j];
        if !powered.is_finite() {
            return Err(Error::NumericFailure {
                t: state.t,
                reason: format!("accumulator of coordinate {j} overflowed; rescale the objective or b0"),
            });
        }
        state.powered[j] = powered;
        state.accumulator[j] = powered.sqrt();
        state.iterate[j] -= config.eta / state.accumulator[j] * gradient[j];
    }
    state.effective_denominator = state.accumulator.clone();
    state.t += 1;
    Ok(())
}

/// Last-iterate variant with accumulator power `1/(2+D)`.
pub fn step_last_power(state: &mut StepState, config: &OptimizerConfig, gradient: &[f64]) -> Result<()> {
    check_gradient(state, gradient)?;
    let inc = norm_sq(gradient) * config.p_schedule.inverse(state.t);
    accumulate(state, inc, 2.0 + config.delta_big)?;
    let denom = state.accumulator[0];
    descend(&mut state.iterate, config.eta, denom, gradient);
    state.effective_denominator = vec![denom];
    state.t += 1;
    Ok(())
}

/// Last-iterate variant with square-root accumulator and interpolated
/// denominator `b_t^d b_{t-1}^{1-d}`.
pub fn step_last_exp(state: &mut StepState, config: &OptimizerConfig, gradient: &[f64]) -> Result<()> {
    check_gradient(state, gradient)?;
    let inc = norm_sq(gradient) * config.p_schedule.inverse(state.t);
    accumulate(state, inc, 2.0)?;
    let denom = interpolated_denominator(state, config);
    descend(&mut state.iterate, config.eta, denom, gradient);
    state.effective_denominator = vec![denom];
    state.t += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccVariant {
    Power,
    Exp,
}

/// Accelerated step. `gradient_at_probe` must be evaluated at
/// [`StepState::query_point`]; afterwards the probe for `t + 1` is exposed.
pub fn step_accelerated(
    state: &mut StepState,
    config: &OptimizerConfig,
    gradient_at_probe: &[f64],
    variant: AccVariant,
) -> Result<()> {
    check_gradient(state, gradient_at_probe)?;
    let t = state.t;
    let a = config.aq_schedule.a(t);
    let q = config.aq_schedule.q(t);
    let inc = norm_sq(gradient_at_probe) / (q * q);
    let denom = match variant {
        AccVariant::Power => {
            accumulate(state, inc, 2.0 + config.delta_big)?;
            q * state.accumulator[0]
        }
        AccVariant::Exp => {
            accumulate(state, inc, 2.0)?;
            q * interpolated_denominator(state, config)
        }
    };
    descend(&mut state.iterate, config.eta, denom, gradient_at_probe);
    let w_prev = state
        .avg_point
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("accelerated step without an average point".into()))?;
    let w_next = lerp(w_prev, &state.iterate, a);
    let a_next = config.aq_schedule.a(t + 1);
    state.probe_point = Some(lerp(&w_next, &state.iterate, a_next));
    state.avg_point = Some(w_next);
    state.effective_denominator = vec![denom];
    state.t += 1;
    Ok(())
}

/// Dispatches to the rule selected by `config.algorithm`.
pub fn step(state: &mut StepState, config: &OptimizerConfig, gradient: &[f64]) -> Result<()> {
    match config.algorithm {
        Algorithm::AdaGradNorm | Algorithm::AdaGradNormStochastic => {
            step_adagradnorm(state, config, gradient)
        }
        Algorithm::AdagradCoord => step_adagrad_coord(state, config, gradient),
        Algorithm::LastPower => step_last_power(state, config, gradient),
        Algorithm::LastExp => step_last_exp(state, config, gradient),
        Algorithm::AccPower => step_accelerated(state, config, gradient, AccVariant::Power),
        Algorithm::AccExp => step_accelerated(state, config, gradient, AccVariant::Exp),
    }
}

/// One iteration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// `x_t`.
    pub iterate: Vec<f64>,
    /// `F(x_t) - F*`.
    pub gap: f64,
    /// Exact gradient norm at the query point (`x_t`, or `v_t` when accelerated).
    pub grad_norm: f64,
    /// `b_t` after the update.
    pub accumulator: Vec<f64>,
    /// `c_t` used by this step.
    pub denom: Vec<f64>,
    /// `xi_t` when the run is noisy.
    pub xi: Option<Vec<f64>>,
    pub xi_norm_sq: f64,
    /// `F(v_t) - F*`.
    pub probe_gap: Option<f64>,
    /// `F(w_{t+1}) - F*`.
    pub avg_gap: Option<f64>,
    /// `w_{t+1}`.
    pub avg_point: Option<Vec<f64>>,
}

/// Full record of a fixed-horizon run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub config: OptimizerConfig,
    pub config_hash: String,
    pub seed: u64,
    /// Certified sub-Gaussian parameter of the noise used (0 when exact).
    pub noise_sigma: f64,
    pub start: Vec<f64>,
    records: Vec<StepRecord>,
    /// `x_{T+1}`.
    pub final_iterate: Vec<f64>,
    /// `F(x_{T+1}) - F*`.
    pub final_gap: f64,
    /// Gradient oracle calls issued by the run.
    pub grad_evals: usize,
}

impl Trace {
    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn is_noisy(&self) -> bool {
        self.records.iter().any(|r| r.xi.is_some())
    }

    /// The trace a run with horizon `n` would have produced. The update rules
    /// do not depend on the horizon, so this is exact.
    pub fn prefix(&self, n: usize) -> Result<Trace> {
        if n > self.len() {
            return Err(Error::OutOfRange {
                index: n,
                len: self.len(),
            });
        }
        if n == self.len() {
            return Ok(self.clone());
        }
        let next = &self.records[n];
        let config = self.config.clone().with_horizon(n);
        Ok(Trace {
            config_hash: config.digest(),
            config,
            seed: self.seed,
            noise_sigma: self.noise_sigma,
            start: self.start.clone(),
            records: self.records[..n].to_vec(),
            final_iterate: next.iterate.clone(),
            final_gap: next.gap,
            grad_evals: n,
        })
    }

    /// Writes the per-iteration CSV: `t,gap,grad_norm,b,denom,probe_gap,avg_gap,xi_norm_sq`.
    /// Vectors are joined with `;`; absent values are empty fields.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", TRACE_CSV_HEADER.join(","))?;
        for r in &self.records {
            let row = [
                r.t.to_string(),
                fmt_f64(r.gap),
                fmt_f64(r.grad_norm),
                join_f64(&r.accumulator),
                join_f64(&r.denom),
                r.probe_gap.map(fmt_f64).unwrap_or_default(),
                r.avg_gap.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.xi_norm_sq),
            ];
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

pub const TRACE_CSV_HEADER: [&str; 8] = [
    "t",
    "gap",
    "grad_norm",
    "b",
    "denom",
    "probe_gap",
    "avg_gap",
    "xi_norm_sq",
];

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

/// Runs `config.horizon` steps from `start`. Gradient noise is added whenever
/// `noise` is Gaussian; step `t` draws from noise stream `t`.
pub fn run(
    spec: &ProblemSpec,
    noise: &NoiseModel,
    config: &OptimizerConfig,
    start: &[f64],
) -> Result<Trace> {
    if start.len() != spec.dim() {
        return Err(Error::InvalidInput(format!(
            "start point has dimension {} but the problem has {}",
            start.len(),
            spec.dim()
        )));
    }
    if noise.dim() != spec.dim() {
        return Err(Error::InvalidInput(format!(
            "noise model has dimension {} but the problem has {}",
            noise.dim(),
            spec.dim()
        )));
    }
    let mut state = StepState::new(config, start)?;
    let noisy = noise.kind() == NoiseKind::Gaussian;
    let accelerated = config.algorithm.is_accelerated();
    let mut records = Vec::with_capacity(config.horizon);
    let mut grad_evals = 0usize;
    for t in 1..=config.horizon {
        let query = state.query_point().to_vec();
        let gradient = spec.grad_at(&query);
        grad_evals += 1;
        let grad_norm = norm(&gradient);
        let (used, xi) = if noisy {
            let (g_hat, xi) = noise.perturb(&gradient, t as u64)?;
            (g_hat, Some(xi))
        } else {
            (gradient, None)
        };
        let iterate = state.iterate.clone();
        let gap = spec.gap_at(&iterate);
        let probe_gap = accelerated.then(|| spec.gap_at(&query));
        step(&mut state, config, &used)?;
        let avg_point = state.avg_point.clone().filter(|_| accelerated);
        records.push(StepRecord {
            t,
            iterate,
            gap,
            grad_norm,
            accumulator: state.accumulator.clone(),
            denom: state.effective_denominator.clone(),
            xi_norm_sq: xi.as_deref().map(norm_sq).unwrap_or(0.0),
            xi,
            probe_gap,
            avg_gap: avg_point.as_deref().map(|w| spec.gap_at(w)),
            avg_point,
        });
    }
    let final_gap = spec.gap_at(&state.iterate);
    Ok(Trace {
        config_hash: config.digest(),
        config: config.clone(),
        seed: noise.seed(),
        noise_sigma: noise.certified_sigma(),
        start: start.to_vec(),
        records,
        final_iterate: state.iterate,
        final_gap,
        grad_evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_quadratic;

    fn state_with(config: &OptimizerConfig, x: &[f64]) -> StepState {
        StepState::new(config, x).unwrap()
    }

    #[test]
    fn adagradnorm_hand_step() {
        let cfg = OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, 0.1, 1);
        let mut s = state_with(&cfg, &[2.0, 0.0]);
        step_adagradnorm(&mut s, &cfg, &[2.0, 0.0]).unwrap();
        let b1 = 4.01f64.sqrt();
        assert!((s.accumulator[0] - b1).abs() < 1e-15);
        assert!((s.accumulator[0] - 2.002498).abs() < 1e-6);
        assert!((s.iterate[0] - (2.0 - 2.0 / b1)).abs() < 1e-15);
        assert!((s.iterate[0] - 1.001248).abs() < 1e-6);
        assert_eq!(s.iterate[1], 0.0);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        for alg in Algorithm::ALL {
            let cfg = OptimizerConfig::new(alg, 1.0, 0.5, 1);
            let mut s = state_with(&cfg, &[1.0, -2.0]);
            let before = s.clone();
            step(&mut s, &cfg, &[0.0, 0.0]).unwrap();
            assert_eq!(s.iterate, before.iterate, "{alg:?}");
            assert_eq!(s.accumulator, before.accumulator, "{alg:?}");
        }
    }

    #[test]
    fn non_finite_gradient_reports_iteration() {
        let cfg = OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, 0.5, 3);
        let mut s = state_with(&cfg, &[1.0]);
        step(&mut s, &cfg, &[1.0]).unwrap();
        let err = step(&mut s, &cfg, &[f64::NAN]).unwrap_err();
        assert_eq!(
            err,
            Error::NumericFailure {
                t: 2,
                reason: "non-finite gradient".into()
            }
        );
    }

    #[test]
    fn coord_hand_step() {
        let cfg = OptimizerConfig::new(
            Algorithm::AdagradCoord,
            1.0,
            InitialAccumulator::Coord(vec![0.1, 0.1]),
            1,
        );
        let mut s = state_with(&cfg, &[0.0, 0.0]);
        step_adagrad_coord(&mut s, &cfg, &[3.0, 4.0]).unwrap();
        let b = [9.01f64.sqrt(), 16.01f64.sqrt()];
        assert!((s.accumulator[0] - 3.001666).abs() < 1e-6);
        assert!((s.accumulator[1] - 4.001250).abs() < 1e-6);
        assert_eq!(s.iterate, vec![-3.0 / b[0], -4.0 / b[1]]);
    }

    #[test]
    fn last_power_hand_values() {
        // D = 1, p_1 = 1, b0 = 1, ||g||^2 = 7 -> b_1 = 8^(1/3) = 2
        let cfg = OptimizerConfig::new(Algorithm::LastPower, 1.0, 1.0, 1).with_delta_big(1.0);
        let mut s = state_with(&cfg, &[0.0]);
        step_last_power(&mut s, &cfg, &[7f64.sqrt()]).unwrap();
        assert!((s.accumulator[0] - 2.0).abs() < 1e-14);

        // D = 0, p_t = 1/t, ||g_1||^2 = ||g_2||^2 = 1 -> b_2 = sqrt(1 + 1 + 2) = 2
        let cfg = OptimizerConfig::new(Algorithm::LastPower, 1.0, 1.0, 2)
            .with_delta_big(0.0)
            .with_p_schedule(PSchedule::ReciprocalT);
        let mut s = state_with(&cfg, &[0.0]);
        step_last_power(&mut s, &cfg, &[1.0]).unwrap();
        step_last_power(&mut s, &cfg, &[1.0]).unwrap();
        assert_eq!(s.accumulator[0], 2.0);
    }

    #[test]
    fn last_exp_first_denominator() {
        let cfg = OptimizerConfig::new(Algorithm::LastExp, 1.0, 1.0, 1).with_delta_small(2.0 / 3.0);
        let mut s = state_with(&cfg, &[0.0]);
        step_last_exp(&mut s, &cfg, &[1.0]).unwrap();
        let expected = 2f64.sqrt().powf(2.0 / 3.0);
        assert!((s.effective_denominator[0] - expected).abs() < 1e-15);
        assert!((s.effective_denominator[0] - 1.259921).abs() < 1e-6);
    }

    #[test]
    fn current_only_rule_avoids_tiny_first_denominator() {
        let g = [1.0];
        let blended = OptimizerConfig::new(Algorithm::LastExp, 1.0, 1e-8, 1).with_delta_small(0.75);
        let current = blended.clone().with_first_step_rule(FirstStepRule::CurrentOnly);
        let mut a = state_with(&blended, &[0.0]);
        let mut b = state_with(&current, &[0.0]);
        step(&mut a, &blended, &g).unwrap();
        step(&mut b, &current, &g).unwrap();
        let b1 = (1e-16f64 + 1.0).sqrt();
        assert_eq!(b.effective_denominator[0], b1);
        let expected = b1.powf(0.75) * 1e-8f64.powf(0.25);
        assert!((a.effective_denominator[0] - expected).abs() < 1e-15);
        assert!(a.effective_denominator[0] < 1e-1 * b1);
    }

    #[test]
    fn accelerated_power_hand_step() {
        // D = 2, b0 -> 0+, q_1 = 2, ||g(v_1)|| = 2, eta = 1: b_1 = (4/4)^(1/4) = 1.
        let cfg = OptimizerConfig::new(Algorithm::AccPower, 1.0, 1e-12, 1).with_delta_big(2.0);
        let mut s = state_with(&cfg, &[1.0, 1.0]);
        assert_eq!(s.query_point(), &[1.0, 1.0]);
        step_accelerated(&mut s, &cfg, &[2.0, 0.0], AccVariant::Power).unwrap();
        assert!((s.accumulator[0] - 1.0).abs() < 1e-12);
        assert!((s.iterate[0] - 0.0).abs() < 1e-12);
        assert_eq!(s.iterate[1], 1.0);
        // a_1 = 1: w_2 = x_2
        assert_eq!(s.avg_point.as_deref().unwrap(), &s.iterate[..]);
    }

    #[test]
    fn first_probe_ignores_average_point() {
        let cfg = OptimizerConfig::new(Algorithm::AccExp, 1.0, 1.0, 1);
        let mut s = state_with(&cfg, &[3.0]);
        s.avg_point = Some(vec![1e6]);
        s.probe_point = Some(lerp(&[1e6], &[3.0], cfg.aq_schedule.a(1)));
        assert_eq!(s.query_point(), &[3.0]);
        step(&mut s, &cfg, &[1.0]).unwrap();
        assert_eq!(s.avg_point.as_deref().unwrap(), &s.iterate[..]);
    }

    #[test]
    fn exp_at_one_matches_power_at_zero() {
        let q = make_quadratic(3, &[0.5, 1.0, 2.0], &[0.0, 1.0, -1.0]).unwrap();
        let x1 = [2.0, -1.0, 0.5];
        let none = NoiseModel::none(3);
        let pairs = [
            (Algorithm::LastExp, Algorithm::LastPower),
            (Algorithm::AccExp, Algorithm::AccPower),
        ];
        for (e, p) in pairs {
            let ce = OptimizerConfig::new(e, 1.0, 0.3, 200).with_delta_small(1.0);
            let cp = OptimizerConfig::new(p, 1.0, 0.3, 200).with_delta_big(0.0);
            let te = run(&q, &none, &ce, &x1).unwrap();
            let tp = run(&q, &none, &cp, &x1).unwrap();
            for (a, b) in te.records().iter().zip(tp.records()) {
                assert_eq!(a.denom, b.denom);
                assert_eq!(a.iterate, b.iterate);
            }
        }
    }

    #[test]
    fn last_power_at_zero_with_unit_p_is_adagradnorm() {
        let q = make_quadratic(2, &[1.0, 3.0], &[0.5, 0.0]).unwrap();
        let none = NoiseModel::none(2);
        let a = OptimizerConfig::new(Algorithm::AdaGradNorm, 0.7, 0.2, 300);
        let b = OptimizerConfig::new(Algorithm::LastPower, 0.7, 0.2, 300)
            .with_delta_big(0.0)
            .with_p_schedule(PSchedule::ConstantOne);
        let ta = run(&q, &none, &a, &[3.0, -2.0]).unwrap();
        let tb = run(&q, &none, &b, &[3.0, -2.0]).unwrap();
        assert_eq!(ta.final_iterate, tb.final_iterate);
        for (ra, rb) in ta.records().iter().zip(tb.records()) {
            assert_eq!(ra.iterate, rb.iterate);
            assert_eq!(ra.accumulator, rb.accumulator);
        }
    }

    #[test]
    fn run_single_step_and_empty_horizon() {
        let q = make_quadratic(1, &[1.0], &[0.0]).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, 0.1, 1);
        let tr = run(&q, &NoiseModel::none(1), &cfg, &[2.0]).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.records()[0].gap, 2.0);
        assert_eq!(tr.records()[0].accumulator[0], 4.01f64.sqrt());

        let empty = run(&q, &NoiseModel::none(1), &cfg.with_horizon(0), &[2.0]).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.grad_evals, 0);
        assert_eq!(empty.final_iterate, vec![2.0]);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let bad_eta = OptimizerConfig::new(Algorithm::AdaGradNorm, 0.0, 1.0, 1);
        assert!(bad_eta.validate().is_err());
        let bad_b0 = OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, -1.0, 1);
        assert!(bad_b0.validate().is_err());
        let bad_delta = OptimizerConfig::new(Algorithm::LastExp, 1.0, 1.0, 1).with_delta_small(0.5);
        assert!(bad_delta.validate().is_err());
        let bad_power = OptimizerConfig::new(Algorithm::AccPower, 1.0, 1.0, 1).with_delta_big(-0.1);
        assert!(bad_power.validate().is_err());
        let vec_b0 = OptimizerConfig::new(
            Algorithm::AdaGradNorm,
            1.0,
            InitialAccumulator::Coord(vec![1.0, 1.0]),
            1,
        );
        assert!(vec_b0.validate().is_err());
        assert!(OptimizerConfig::new(Algorithm::LastExp, 1.0, 1.0, 1)
            .with_delta_small(1.0)
            .validate()
            .is_ok());
    }

    #[test]
    fn overflow_is_reported() {
        let cfg = OptimizerConfig::new(Algorithm::LastPower, 1.0, 1.0, 1).with_delta_big(3.0);
        let mut s = state_with(&cfg, &[0.0]);
        let err = step(&mut s, &cfg, &[1e200]).unwrap_err();
        assert!(matches!(err, Error::NumericFailure { t: 1, .. }));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let q = make_quadratic(2, &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        let cfg = OptimizerConfig::new(
            Algorithm::AdagradCoord,
            1.0,
            InitialAccumulator::Coord(vec![0.5, 0.25]),
            3,
        );
        let tr = run(&q, &NoiseModel::none(2), &cfg, &[1.0, 1.0]).unwrap();
        let csv = tr.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,gap,grad_norm,b,denom,probe_gap,avg_gap,xi_norm_sq");
        assert_eq!(lines.len(), 4);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(fields[3].split(';').count(), 2);
        assert_eq!(fields[5], "");
        // 17 significant digits round-trip exactly
        let gap: f64 = fields[1].parse().unwrap();
        assert_eq!(gap, tr.records()[0].gap);
    }

    #[test]
    fn prefix_matches_shorter_run() {
        let q = make_quadratic(2, &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::AccPower, 1.0, 0.5, 50);
        let full = run(&q, &NoiseModel::none(2), &cfg, &[1.0, 1.0]).unwrap();
        let short = run(&q, &NoiseModel::none(2), &cfg.clone().with_horizon(20), &[1.0, 1.0]).unwrap();
        assert_eq!(full.prefix(20).unwrap(), short);
        assert!(full.prefix(51).is_err());
    }
}
