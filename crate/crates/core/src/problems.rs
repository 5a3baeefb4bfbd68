//! Objective oracles with a known minimiser, and sampling verifiers for the
//! regularity conditions the convergence envelopes rely on.
//!
//! A [`ProblemSpec`] is immutable after construction: it pairs a pure
//! value/gradient oracle with the constants the envelopes consume (`L`,
//! per-coordinate `L_j`, the quasar parameter `gamma`, `x*` and `F*`).
//! Constants are declared, never estimated; [`check_assumption`] samples a box
//! and reports the worst slack of the corresponding inequality.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, dot, norm_sq};
use crate::{Error, Result};

/// Slack below `-ASSUMPTION_SLACK_TOL` counts as a violation.
pub const ASSUMPTION_SLACK_TOL: f64 = 1e-9;

/// Schema version of [`ProblemDocument`].
pub const PROBLEM_DOC_VERSION: u32 = 1;

/// Log-frequency of the non-convex quasar-convex instance.
const LOG_PERIODIC_FREQUENCY: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ProblemKind {
    /// `F(x) = 1/2 sum_j lambda_j (x_j - c_j)^2`.
    Quadratic { eigenvalues: Vec<f64>, center: Vec<f64> },
    /// Ridge-regularised logistic loss averaged over rows of `features`.
    Logistic {
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        ridge: f64,
    },
    /// One-dimensional `F(x) = x^2 (1 + a sin(w ln|x|))`: quasar convex around
    /// 0 but with intervals of negative curvature accumulating at the origin.
    LogPeriodic { amplitude: f64, frequency: f64 },
    /// `factor * inner`.
    Scaled { factor: f64, inner: Box<ProblemKind> },
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Quadratic { .. } => "quadratic",
            ProblemKind::Logistic { .. } => "logistic",
            ProblemKind::LogPeriodic { .. } => "log_periodic",
            ProblemKind::Scaled { .. } => "scaled",
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            ProblemKind::Quadratic {
                eigenvalues,
                center,
            } => {
                0.5 * eigenvalues
                    .iter()
                    .zip(center)
                    .zip(x)
                    .map(|((l, c), xi)| l * (xi - c) * (xi - c))
                    .sum::<f64>()
            }
            ProblemKind::Logistic {
                features,
                labels,
                ridge,
            } => {
                let n = features.len() as f64;
                let loss: f64 = features
                    .iter()
                    .zip(labels)
                    .map(|(a, y)| softplus(-y * dot(a, x)))
                    .sum();
                loss / n + 0.5 * ridge * norm_sq(x)
            }
            ProblemKind::LogPeriodic {
                amplitude,
                frequency,
            } => {
                let u = x[0];
                if u == 0.0 {
                    return 0.0;
                }
                u * u * (1.0 + amplitude * (frequency * u.abs().ln()).sin())
            }
            ProblemKind::Scaled { factor, inner } => factor * inner.value(x),
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ProblemKind::Quadratic {
                eigenvalues,
                center,
            } => eigenvalues
                .iter()
                .zip(center)
                .zip(x)
                .map(|((l, c), xi)| l * (xi - c))
                .collect(),
            ProblemKind::Logistic {
                features,
                labels,
                ridge,
            } => {
                let n = features.len() as f64;
                let mut g: Vec<f64> = x.iter().map(|xi| ridge * xi).collect();
                for (a, y) in features.iter().zip(labels) {
                    // d/dx log(1 + exp(-y a.x)) = -y sigmoid(-y a.x) a
                    let w = -y * sigmoid(-y * dot(a, x)) / n;
                    for (gj, aj) in g.iter_mut().zip(a) {
                        *gj += w * aj;
                    }
                }
                g
            }
            ProblemKind::LogPeriodic {
                amplitude,
                frequency,
            } => {
                let u = x[0];
                if u == 0.0 {
                    return vec![0.0];
                }
                let phase = frequency * u.abs().ln();
                // F'(u) = u (2 phi + phi'), phi = 1 + a sin(w ln|u|)
                let phi = 1.0 + amplitude * phase.sin();
                let dphi = amplitude * frequency * phase.cos();
                vec![u * (2.0 * phi + dphi)]
            }
            ProblemKind::Scaled { factor, inner } => {
                inner.gradient(x).into_iter().map(|g| factor * g).collect()
            }
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A differentiable objective with known optimum and declared constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    kind: ProblemKind,
    dim: usize,
    minimizer: Vec<f64>,
    min_value: f64,
    smoothness: f64,
    coord_smoothness: Option<Vec<f64>>,
    quasar_gamma: f64,
}

impl ProblemSpec {
    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `F(x)`.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.kind.value(x)
    }

    /// `grad F(x)`.
    pub fn grad_at(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        self.kind.gradient(x)
    }

    /// `F(x) - F*`.
    pub fn gap_at(&self, x: &[f64]) -> f64 {
        self.value_at(x) - self.min_value
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn coord_smoothness(&self) -> Option<&[f64]> {
        self.coord_smoothness.as_deref()
    }

    pub fn quasar_gamma(&self) -> f64 {
        self.quasar_gamma
    }

    /// Same oracle with a different declared `L`. Used to probe verifiers and
    /// envelopes with deliberately wrong constants.
    pub fn with_smoothness(&self, smoothness: f64) -> Result<Self> {
        if !(smoothness > 0.0 && smoothness.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "smoothness must be positive and finite, got {smoothness}"
            )));
        }
        Ok(Self {
            smoothness,
            ..self.clone()
        })
    }

    /// Same oracle with a different declared quasar parameter.
    pub fn with_quasar_gamma(&self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            quasar_gamma: gamma,
            ..self.clone()
        })
    }

    /// The instance `c * F`. Minimiser and `gamma` are unchanged; `F*`, `L`
    /// and `L_j` scale by `c`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive and finite, got {factor}"
            )));
        }
        Ok(Self {
            kind: ProblemKind::Scaled {
                factor,
                inner: Box::new(self.kind.clone()),
            },
            dim: self.dim,
            minimizer: self.minimizer.clone(),
            min_value: factor * self.min_value,
            smoothness: factor * self.smoothness,
            coord_smoothness: self
                .coord_smoothness
                .as_ref()
                .map(|l| l.iter().map(|v| factor * v).collect()),
            quasar_gamma: self.quasar_gamma,
        })
    }

    pub fn to_document(&self) -> ProblemDocument {
        let tagged = serde_json::to_value(&self.kind).expect("problem kind serialises");
        ProblemDocument {
            version: PROBLEM_DOC_VERSION,
            kind: self.kind.name().to_string(),
            dim: self.dim,
            params: tagged["params"].clone(),
            minimizer: self.minimizer.clone(),
            min_value: self.min_value,
            constants: ProblemConstants {
                smoothness: self.smoothness,
                coord_smoothness: self.coord_smoothness.clone(),
                quasar_gamma: self.quasar_gamma,
            },
        }
    }

    /// Rebuilds an instance from its document. The stored minimiser and
    /// constants are taken as instance data; no solver runs here.
    pub fn from_document(doc: &ProblemDocument) -> Result<Self> {
        if doc.version != PROBLEM_DOC_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported problem document version {} (expected {PROBLEM_DOC_VERSION})",
                doc.version
            )));
        }
        let tagged = serde_json::json!({ "kind": doc.kind, "params": doc.params });
        let kind: ProblemKind = serde_json::from_value(tagged)
            .map_err(|e| Error::InvalidInput(format!("problem params: {e}")))?;
        if doc.minimizer.len() != doc.dim {
            return Err(Error::InvalidInput(format!(
                "minimizer has length {} but dim is {}",
                doc.minimizer.len(),
                doc.dim
            )));
        }
        check_gamma(doc.constants.quasar_gamma)?;
        Ok(Self {
            kind,
            dim: doc.dim,
            minimizer: doc.minimizer.clone(),
            min_value: doc.min_value,
            smoothness: doc.constants.smoothness,
            coord_smoothness: doc.constants.coord_smoothness.clone(),
            quasar_gamma: doc.constants.quasar_gamma,
        })
    }
}

/// Versioned JSON form of a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub version: u32,
    pub kind: String,
    pub dim: usize,
    pub params: serde_json::Value,
    pub minimizer: Vec<f64>,
    pub min_value: f64,
    pub constants: ProblemConstants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConstants {
    pub smoothness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord_smoothness: Option<Vec<f64>>,
    pub quasar_gamma: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "quasar parameter must lie in (0, 1], got {gamma}"
        )))
    }
}

/// Separable quadratic `1/2 sum_j lambda_j (x_j - c_j)^2`.
pub fn make_quadratic(dim: usize, eigenvalues: &[f64], center: &[f64]) -> Result<ProblemSpec> {
    if dim == 0 {
        return Err(Error::InvalidInstance("dimension must be positive".into()));
    }
    if eigenvalues.len() != dim || center.len() != dim {
        return Err(Error::InvalidInstance(format!(
            "expected {dim} eigenvalues and center coordinates, got {} and {}",
            eigenvalues.len(),
            center.len()
        )));
    }
    if let Some(bad) = eigenvalues.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidInstance(format!(
            "eigenvalues must be positive and finite, got {bad}"
        )));
    }
    let smoothness = eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    Ok(ProblemSpec {
        kind: ProblemKind::Quadratic {
            eigenvalues: eigenvalues.to_vec(),
            center: center.to_vec(),
        },
        dim,
        minimizer: center.to_vec(),
        min_value: 0.0,
        smoothness,
        coord_smoothness: Some(eigenvalues.to_vec()),
        quasar_gamma: 1.0,
    })
}

/// Ridge-regularised logistic regression.
///
/// `L` is declared as `||A||_F^2 / (4n) + ridge`, an upper bound on the
/// operator-norm constant. The minimiser is located once here by damped
/// Newton iterations down to a gradient norm of `1e-12` and stored as
/// instance data.
pub fn make_logistic(features: &[Vec<f64>], labels: &[f64], ridge: f64) -> Result<ProblemSpec> {
    let n = features.len();
    if n == 0 {
        return Err(Error::InvalidInstance("no samples".into()));
    }
    if labels.len() != n {
        return Err(Error::InvalidInstance(format!(
            "{n} feature rows but {} labels",
            labels.len()
        )));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|a| a.len() != dim) {
        return Err(Error::InvalidInstance(
            "feature rows must share a positive length".into(),
        ));
    }
    if let Some(bad) = labels.iter().find(|y| **y != 1.0 && **y != -1.0) {
        return Err(Error::InvalidInstance(format!(
            "labels must be +1 or -1, got {bad}"
        )));
    }
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidInstance(format!(
            "ridge must be positive for a unique minimiser, got {ridge}"
        )));
    }
    let frob_sq: f64 = features.iter().map(|a| norm_sq(a)).sum();
    // diag(L_j) dominates A^T A / (4n) + ridge I when L_j is the absolute
    // row sum of that matrix.
    let per_coord: Vec<f64> = (0..dim)
        .map(|j| {
            let row: f64 = (0..dim)
                .map(|k| features.iter().map(|a| a[j] * a[k]).sum::<f64>().abs())
                .sum();
            row / (4.0 * n as f64) + ridge
        })
        .collect();
    let kind = ProblemKind::Logistic {
        features: features.to_vec(),
        labels: labels.to_vec(),
        ridge,
    };
    let minimizer = logistic_newton(&kind, dim)?;
    let min_value = kind.value(&minimizer);
    Ok(ProblemSpec {
        kind,
        dim,
        minimizer,
        min_value,
        smoothness: frob_sq / (4.0 * n as f64) + ridge,
        coord_smoothness: Some(per_coord),
        quasar_gamma: 1.0,
    })
}

fn logistic_newton(kind: &ProblemKind, dim: usize) -> Result<Vec<f64>> {
    let ProblemKind::Logistic {
        features,
        labels,
        ridge,
    } = kind
    else {
        unreachable!("newton solve is only used for logistic instances");
    };
    let n = features.len() as f64;
    let mut x = vec![0.0; dim];
    for _ in 0..200 {
        let g = kind.gradient(&x);
        if linalg::norm(&g) <= 1e-12 {
            return Ok(x);
        }
        let mut hess = vec![0.0; dim * dim];
        for i in 0..dim {
            hess[i * dim + i] = *ridge;
        }
        for (a, y) in features.iter().zip(labels) {
            let s = sigmoid(y * dot(a, &x));
            let w = s * (1.0 - s) / n;
            for i in 0..dim {
                for j in 0..dim {
                    hess[i * dim + j] += w * a[i] * a[j];
                }
            }
        }
        let dir = linalg::cholesky_solve(&hess, &g).ok_or_else(|| {
            Error::InvalidInstance("logistic Hessian is not positive definite".into())
        })?;
        // Close to the optimum the objective decrease drops below rounding, so
        // full steps are taken there; elsewhere backtracking keeps Newton
        // globally convergent.
        if linalg::norm(&g) <= 1e-6 {
            x = x.iter().zip(&dir).map(|(xi, d)| xi - d).collect();
            continue;
        }
        let f0 = kind.value(&x);
        let slope = dot(&g, &dir);
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, d)| xi - step * d).collect();
            if kind.value(&trial) <= f0 - 1e-4 * step * slope || step < 1e-12 {
                x = trial;
                break;
            }
            step *= 0.5;
        }
    }
    let g = kind.gradient(&x);
    if linalg::norm(&g) <= 1e-12 {
        Ok(x)
    } else {
        Err(Error::InvalidInstance(format!(
            "logistic minimiser not resolved: gradient norm {:e}",
            linalg::norm(&g)
        )))
    }
}

/// A one-dimensional instance that is `gamma`-quasar convex and weakly
/// smooth but not convex.
///
/// `F(x) = x^2 (1 + a sin(3 ln|x|))` with `F(0) = 0`. Writing
/// `phi(u) = 1 + a sin(3u)`, quasar convexity around 0 reduces to
/// `phi' >= (gamma - 2) phi`, which holds when `3a <= (2 - gamma)(1 - a)`;
/// `a` is taken 5% inside that limit. The curvature
/// `2 + a((2 - 9) sin + 9 cos)` dips below zero for every admissible
/// `gamma`, so the function is non-convex on each log-period.
pub fn make_quasar_instance(gamma: f64) -> Result<ProblemSpec> {
    check_gamma(gamma)?;
    let w = LOG_PERIODIC_FREQUENCY;
    let a = 0.95 * (2.0 - gamma) / (2.0 - gamma + w);
    // Weak smoothness: (2 phi + phi')^2 / (2 phi) <= (2 + 2a + a w)^2 / (2 (1 - a)).
    let weak = (2.0 + 2.0 * a + a * w).powi(2) / (2.0 * (1.0 - a));
    // |F''| <= 2 + a sqrt((2 - w^2)^2 + 9 w^2) away from the origin.
    let curvature = 2.0 + a * ((2.0 - w * w).powi(2) + 9.0 * w * w).sqrt();
    let smoothness = weak.max(curvature);
    Ok(ProblemSpec {
        kind: ProblemKind::LogPeriodic {
            amplitude: a,
            frequency: w,
        },
        dim: 1,
        minimizer: vec![0.0],
        min_value: 0.0,
        smoothness,
        coord_smoothness: Some(vec![smoothness]),
        quasar_gamma: gamma,
    })
}

/// Central finite differences, one coordinate at a time.
pub fn finite_diff_grad(spec: &ProblemSpec, point: &[f64], h: f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..point.len())
        .map(|j| {
            let orig = x[j];
            x[j] = orig + h;
            let up = spec.value_at(&x);
            x[j] = orig - h;
            let down = spec.value_at(&x);
            x[j] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `||fd - grad|| / (1 + ||grad||)` over `samples` uniform points of
/// `region`, with central differences of step `h`. Deterministic in `seed`.
pub fn finite_diff_check(
    spec: &ProblemSpec,
    samples: usize,
    region: &Region,
    seed: u64,
    h: f64,
) -> Result<f64> {
    if region.dim() != spec.dim {
        return Err(Error::InvalidInput(format!(
            "region has dimension {} but instance has {}",
            region.dim(),
            spec.dim
        )));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = region.sample(&mut rng);
        let g = spec.grad_at(&x);
        let fd = finite_diff_grad(spec, &x, h);
        let err = linalg::norm(&linalg::sub(&fd, &g)) / (1.0 + linalg::norm(&g));
        worst = if err.is_nan() { f64::NAN } else { worst.max(err) };
        if worst.is_nan() {
            break;
        }
    }
    Ok(worst)
}

/// Regularity conditions, in the order they are usually introduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Assumption {
    /// `F* >= F(x) + (1/gamma) <grad F(x), x* - x>`. Id `1`.
    QuasarConvex,
    /// Convexity. Id `1'`.
    Convex,
    /// `F(x) - F* >= ||grad F(x)||^2 / 2L`. Id `2`.
    WeakSmooth,
    /// Standard `L`-smoothness upper quadratic bound. Id `2'`.
    Smooth,
    /// Diagonal `diag(L_j)`-smoothness. Id `2''`.
    DiagSmooth,
    /// Unbiased stochastic gradients. Id `3`.
    Unbiased,
    /// Sub-Gaussian gradient noise. Id `4`.
    SubGaussian,
}

impl Assumption {
    pub const ALL: [Assumption; 7] = [
        Assumption::QuasarConvex,
        Assumption::Convex,
        Assumption::WeakSmooth,
        Assumption::Smooth,
        Assumption::DiagSmooth,
        Assumption::Unbiased,
        Assumption::SubGaussian,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Assumption::QuasarConvex => "1",
            Assumption::Convex => "1'",
            Assumption::WeakSmooth => "2",
            Assumption::Smooth => "2'",
            Assumption::DiagSmooth => "2''",
            Assumption::Unbiased => "3",
            Assumption::SubGaussian => "4",
        }
    }

    fn is_pairwise(self) -> bool {
        matches!(
            self,
            Assumption::Convex | Assumption::Smooth | Assumption::DiagSmooth
        )
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Assumption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Assumption::ALL
            .into_iter()
            .find(|a| a.id() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown assumption id `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub assumption: Assumption,
    pub holds_on_samples: bool,
    /// Most negative slack found, clamped to 0 when within tolerance.
    pub worst_violation: f64,
    /// Point (or pair) that attained the worst slack.
    pub witness: Option<Vec<Vec<f64>>>,
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParameter(
                "region bounds must be nonempty and of equal length".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
            return Err(Error::InvalidParameter(
                "region must have positive volume".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| rng.random_range(*l..*h))
            .collect()
    }
}

/// `(1/gamma) <grad F(x), x - x*> - (F(x) - F*)`; nonnegative iff the
/// quasar-convexity inequality holds at `x`.
pub fn quasar_slack(
    value: f64,
    grad: &[f64],
    x: &[f64],
    minimizer: &[f64],
    min_value: f64,
    gamma: f64,
) -> f64 {
    dot(grad, &linalg::sub(x, minimizer)) / gamma - (value - min_value)
}

/// `F(x) - F* - ||grad F(x)||^2 / 2L`.
pub fn weak_smooth_slack(value: f64, grad: &[f64], min_value: f64, smoothness: f64) -> f64 {
    value - min_value - norm_sq(grad) / (2.0 * smoothness)
}

fn point_slack(spec: &ProblemSpec, assumption: Assumption, x: &[f64]) -> f64 {
    let v = spec.value_at(x);
    let g = spec.grad_at(x);
    match assumption {
        Assumption::QuasarConvex => quasar_slack(
            v,
            &g,
            x,
            &spec.minimizer,
            spec.min_value,
            spec.quasar_gamma,
        ),
        Assumption::WeakSmooth => weak_smooth_slack(v, &g, spec.min_value, spec.smoothness),
        _ => unreachable!("pairwise assumption evaluated pointwise"),
    }
}

fn pair_slack(spec: &ProblemSpec, assumption: Assumption, x: &[f64], y: &[f64]) -> f64 {
    let fx = spec.value_at(x);
    let fy = spec.value_at(y);
    match assumption {
        // F(y) >= F(x) + <grad F(x), y - x>
        Assumption::Convex => fy - fx - dot(&spec.grad_at(x), &linalg::sub(y, x)),
        // F(x) <= F(y) + <grad F(y), x - y> + L/2 ||x - y||^2
        Assumption::Smooth => {
            fy + dot(&spec.grad_at(y), &linalg::sub(x, y))
                + 0.5 * spec.smoothness * linalg::dist_sq(x, y)
                - fx
        }
        Assumption::DiagSmooth => {
            let lj = spec
                .coord_smoothness
                .as_ref()
                .expect("checked by caller");
            let quad: f64 = x
                .iter()
                .zip(y)
                .zip(lj)
                .map(|((a, b), l)| l * (a - b) * (a - b))
                .sum();
            fy + dot(&spec.grad_at(y), &linalg::sub(x, y)) + 0.5 * quad - fx
        }
        _ => unreachable!("pointwise assumption evaluated on pairs"),
    }
}

fn validate_check(spec: &ProblemSpec, assumption: Assumption) -> Result<()> {
    match assumption {
        Assumption::Unbiased | Assumption::SubGaussian => {
            Err(Error::Delegated(assumption.id().to_string()))
        }
        Assumption::DiagSmooth if spec.coord_smoothness.is_none() => Err(Error::InvalidInput(
            "instance declares no per-coordinate smoothness".into(),
        )),
        _ => Ok(()),
    }
}

struct Worst {
    slack: f64,
    witness: Option<Vec<Vec<f64>>>,
}

impl Worst {
    fn new() -> Self {
        Self {
            slack: f64::INFINITY,
            witness: None,
        }
    }

    fn offer(&mut self, slack: f64, witness: impl FnOnce() -> Vec<Vec<f64>>) {
        // NaN slack is a violation, not something to skip.
        if slack < self.slack || (slack.is_nan() && !self.slack.is_nan()) {
            self.slack = slack;
            self.witness = Some(witness());
        }
    }

    fn into_report(self, assumption: Assumption) -> AssumptionReport {
        let holds = self.slack >= -ASSUMPTION_SLACK_TOL;
        AssumptionReport {
            assumption,
            holds_on_samples: holds,
            worst_violation: if holds { self.slack.max(0.0) } else { self.slack },
            witness: self.witness,
        }
    }
}

/// Evaluates the inequality behind `assumption` at `samples` uniform points of
/// `region` (pairs of points for the two-point conditions) and records the
/// smallest slack. Deterministic in `seed`.
pub fn check_assumption(
    spec: &ProblemSpec,
    assumption: Assumption,
    samples: usize,
    region: &Region,
    seed: u64,
) -> Result<AssumptionReport> {
    validate_check(spec, assumption)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    if region.dim() != spec.dim {
        return Err(Error::InvalidInput(format!(
            "region has dimension {} but instance has {}",
            region.dim(),
            spec.dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::new();
    for _ in 0..samples {
        if assumption.is_pairwise() {
            let x = region.sample(&mut rng);
            let y = region.sample(&mut rng);
            let s = pair_slack(spec, assumption, &x, &y);
            worst.offer(s, || vec![x.clone(), y.clone()]);
        } else {
            let x = region.sample(&mut rng);
            let s = point_slack(spec, assumption, &x);
            worst.offer(s, || vec![x.clone()]);
        }
    }
    Ok(worst.into_report(assumption))
}

/// Same as [`check_assumption`] on caller-supplied points. Two-point
/// conditions are evaluated on consecutive pairs `(p_i, p_{i+1})`.
pub fn check_assumption_on_points(
    spec: &ProblemSpec,
    assumption: Assumption,
    points: &[Vec<f64>],
) -> Result<AssumptionReport> {
    validate_check(spec, assumption)?;
    if points.is_empty() || (assumption.is_pairwise() && points.len() < 2) {
        return Err(Error::InvalidParameter("not enough points".into()));
    }
    if points.iter().any(|p| p.len() != spec.dim) {
        return Err(Error::InvalidInput("point dimension mismatch".into()));
    }
    let mut worst = Worst::new();
    if assumption.is_pairwise() {
        for w in points.windows(2) {
            let s = pair_slack(spec, assumption, &w[0], &w[1]);
            worst.offer(s, || w.to_vec());
        }
    } else {
        for p in points {
            let s = point_slack(spec, assumption, p);
            worst.offer(s, || vec![p.clone()]);
        }
    }
    Ok(worst.into_report(assumption))
}

/// `n` evenly spaced points on `[lo, hi]` in one dimension.
pub fn grid_1d(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![0.5 * (lo + hi)]];
    }
    (0..n)
        .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad14() -> ProblemSpec {
        make_quadratic(2, &[1.0, 4.0], &[0.0, 0.0]).unwrap()
    }

    #[test]
    fn quadratic_hand_values() {
        let q = make_quadratic(1, &[1.0], &[0.0]).unwrap();
        assert_eq!(q.value_at(&[2.0]), 2.0);
        assert_eq!(q.grad_at(&[2.0]), vec![2.0]);
        let q = quad14();
        assert_eq!(q.smoothness(), 4.0);
        assert_eq!(q.coord_smoothness(), Some(&[1.0, 4.0][..]));
        let shifted = make_quadratic(3, &[1.0, 2.0, 3.0], &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(shifted.value_at(&[1.0, -2.0, 0.5]), 0.0);
    }

    #[test]
    fn quadratic_rejects_nonpositive_eigenvalue() {
        assert!(matches!(
            make_quadratic(2, &[1.0, 0.0], &[0.0, 0.0]),
            Err(Error::InvalidInstance(_))
        ));
        assert!(matches!(
            make_quadratic(2, &[1.0, -3.0], &[0.0, 0.0]),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn logistic_zero_feature_minimum_is_log2() {
        let p = make_logistic(&[vec![0.0]], &[1.0], 1.0).unwrap();
        assert!(p.minimizer()[0].abs() < 1e-15);
        assert!((p.min_value() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logistic_rejects_bad_label() {
        assert!(matches!(
            make_logistic(&[vec![1.0]], &[0.0], 1.0),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn logistic_minimizer_has_tiny_gradient() {
        let feats = vec![
            vec![1.0, 0.5],
            vec![-0.3, 2.0],
            vec![0.7, -1.1],
            vec![-1.5, -0.2],
        ];
        let p = make_logistic(&feats, &[1.0, -1.0, 1.0, -1.0], 0.05).unwrap();
        assert!(linalg::norm(&p.grad_at(p.minimizer())) <= 1e-12);
    }

    #[test]
    fn quasar_gamma_out_of_range() {
        assert!(matches!(
            make_quasar_instance(0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            make_quasar_instance(1.5),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn double_well_violates_quasar_at_origin() {
        // (x^2 - 1)^2 with claimed x* = 1: grad is 0 at x = 0 but F(0) = 1 > F* = 0.
        let f = |x: f64| (x * x - 1.0).powi(2);
        let df = |x: f64| 4.0 * x * (x * x - 1.0);
        let s = quasar_slack(f(0.0), &[df(0.0)], &[0.0], &[1.0], 0.0, 1.0);
        assert_eq!(s, -1.0);
    }

    #[test]
    fn smooth_check_with_wrong_l_finds_axis_witness() {
        let q = quad14().with_smoothness(3.0).unwrap();
        let region = Region::cube(2, -1.0, 1.0).unwrap();
        let r = check_assumption(&q, Assumption::Smooth, 2000, &region, 3).unwrap();
        assert!(!r.holds_on_samples);
        assert!(r.worst_violation < 0.0);
        let w = r.witness.unwrap();
        let d: Vec<f64> = linalg::sub(&w[0], &w[1]);
        // slack = 1/2 (3 - 1) d1^2 + 1/2 (3 - 4) d2^2 < 0 needs d2^2 > 2 d1^2
        assert!(d[1].abs() > d[0].abs());
        let closed_form = 0.5 * (3.0 - 1.0) * d[0] * d[0] + 0.5 * (3.0 - 4.0) * d[1] * d[1];
        assert!((closed_form - r.worst_violation).abs() < 1e-12);
    }

    #[test]
    fn noise_assumptions_are_delegated() {
        let region = Region::cube(2, -1.0, 1.0).unwrap();
        for a in [Assumption::Unbiased, Assumption::SubGaussian] {
            assert!(matches!(
                check_assumption(&quad14(), a, 10, &region, 0),
                Err(Error::Delegated(_))
            ));
        }
        assert!(matches!(
            "5".parse::<Assumption>(),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn assumption_ids_round_trip() {
        for a in Assumption::ALL {
            assert_eq!(a.id().parse::<Assumption>().unwrap(), a);
        }
    }

    #[test]
    fn check_is_deterministic_in_seed() {
        let q = make_quasar_instance(0.7).unwrap();
        let region = Region::cube(1, -3.0, 3.0).unwrap();
        let a = check_assumption(&q, Assumption::Convex, 500, &region, 11).unwrap();
        let b = check_assumption(&q, Assumption::Convex, 500, &region, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn document_round_trip_keeps_instance_data() {
        let feats = vec![vec![1.0], vec![-1.0]];
        let p = make_logistic(&feats, &[1.0, -1.0], 0.1).unwrap();
        let doc = p.to_document();
        let json = serde_json::to_string(&doc).unwrap();
        let back: ProblemDocument = serde_json::from_str(&json).unwrap();
        let q = ProblemSpec::from_document(&back).unwrap();
        assert_eq!(p, q);
        let scaled = p.scaled(2.5).unwrap();
        assert_eq!(
            ProblemSpec::from_document(&scaled.to_document()).unwrap(),
            scaled
        );
    }

    #[test]
    fn document_rejects_unknown_fields() {
        let doc = quad14().to_document();
        let mut v = serde_json::to_value(&doc).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ProblemDocument>(v).is_err());
    }

    #[test]
    fn scaled_instance_scales_value_and_constants() {
        let q = quad14();
        let s = q.scaled(10.0).unwrap();
        let x = [0.3, -0.7];
        assert!((s.value_at(&x) - 10.0 * q.value_at(&x)).abs() < 1e-12);
        assert_eq!(s.smoothness(), 40.0);
        assert_eq!(s.minimizer(), q.minimizer());
    }
}
