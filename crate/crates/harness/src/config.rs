//! Versioned TOML experiment configuration.

use std::path::{Path, PathBuf};

use adagrad_core::bounds::TheoremId;
use adagrad_core::optimizers::OptimizerConfig;
use adagrad_core::problems::{
    make_logistic, make_quadratic, make_quasar_instance, ProblemDocument, ProblemSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    /// Directory for artifacts, relative to the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub checks: Vec<String>,
    /// Prefix horizons at which envelopes are evaluated; defaults to the run horizon.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizons: Vec<usize>,
    /// Failure probability for the high-probability accumulator check.
    #[serde(default = "default_fail_prob")]
    pub fail_prob: f64,
    /// Explicit `x_1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// `x_1 = x* + sqrt(D^2/d) (1, ..., 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_dist_sq: Option<f64>,
    #[serde(default)]
    pub svg: bool,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleConfig>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_fail_prob() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Quadratic {
        eigenvalues: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Logistic {
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        ridge: f64,
    },
    Quasar {
        gamma: f64,
    },
    /// A serialized problem document, relative to the config file.
    Document {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    #[default]
    None,
    Gaussian {
        /// Per-coordinate standard deviation; the sub-Gaussian parameter is derived.
        std: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatistic {
    /// `sum_t gap_t / T`.
    AverageGap,
    /// `F(x_{T+1}) - F*`, or the averaged point for accelerated runs.
    LastGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub statistic: RateStatistic,
    pub t_min: usize,
    pub t_max: usize,
    pub points: usize,
    pub max_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleExpectation {
    Invariant,
    Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub factors: Vec<f64>,
    pub expect: ScaleExpectation,
}

/// Checks other than theorem envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropertyCheck {
    RateSlope,
    GradMonotone,
    ScaleInvariance,
    Assumptions,
    FiniteDiff,
}

impl PropertyCheck {
    pub const ALL: [PropertyCheck; 5] = [
        PropertyCheck::RateSlope,
        PropertyCheck::GradMonotone,
        PropertyCheck::ScaleInvariance,
        PropertyCheck::Assumptions,
        PropertyCheck::FiniteDiff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropertyCheck::RateSlope => "rate_slope",
            PropertyCheck::GradMonotone => "grad_monotone",
            PropertyCheck::ScaleInvariance => "scale_invariance",
            PropertyCheck::Assumptions => "assumptions",
            PropertyCheck::FiniteDiff => "finite_diff",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            PropertyCheck::RateSlope => {
                "Least-squares slope of log statistic against log T over a geometric grid of prefix \
                 horizons (mean over seeds); passes when slope <= max_slope."
            }
            PropertyCheck::GradMonotone => {
                "Once b_t > eta L / 2 the recorded gradient norm never increases (tolerance 1e-12)."
            }
            PropertyCheck::ScaleInvariance => {
                "Runs on c F with b0 -> c b0 for each configured c; invariant runs must deviate by at \
                 most 1e-9, variant runs by more than 1e-3."
            }
            PropertyCheck::Assumptions => {
                "Samples the regularity conditions each requested envelope relies on around x* and \
                 requires every one to hold for the declared constants."
            }
            PropertyCheck::FiniteDiff => {
                "Analytic gradient versus central differences (h = 1e-6) at 100 random points, \
                 tolerance 1e-5 (1 + ||grad||)."
            }
        }
    }
}

/// A parsed entry of `checks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    Theorem(TheoremId),
    Property(PropertyCheck),
}

impl Check {
    pub fn parse(s: &str) -> Option<Check> {
        if let Ok(id) = s.parse::<TheoremId>() {
            return Some(Check::Theorem(id));
        }
        PropertyCheck::ALL
            .iter()
            .find(|p| p.name() == s)
            .map(|p| Check::Property(*p))
    }

    pub fn name(self) -> &'static str {
        match self {
            Check::Theorem(id) => id.name(),
            Check::Property(p) => p.name(),
        }
    }
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parses TOML, reporting the failing field path.
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| config_error("", e.to_string().trim().to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(path, e.into_inner().to_string().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let ProblemConfig::Document { path: doc } = &mut cfg.problem {
            if doc.is_relative() {
                if let Some(dir) = path.parent() {
                    *doc = dir.join(&*doc);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config serialises")
    }

    /// Parsed `checks`, in configuration order.
    pub fn parsed_checks(&self) -> Result<Vec<Check>, HarnessError> {
        self.checks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Check::parse(c).ok_or_else(|| {
                    config_error(format!("checks[{i}]"), format!("unknown theorem id or check `{c}`"))
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.version != CONFIG_VERSION {
            return Err(config_error(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(config_error(
                "name",
                "name must be nonempty and use only [A-Za-z0-9_-]",
            ));
        }
        let checks = self.parsed_checks()?;
        if self.seeds.is_empty() {
            return Err(config_error("seeds", "at least one seed is required"));
        }
        self.optimizer
            .validate()
            .map_err(|e| config_error("optimizer", e.to_string()))?;
        if let NoiseConfig::Gaussian { std } = self.noise {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(config_error("noise.std", "std must be nonnegative"));
            }
        }
        if !(self.fail_prob > 0.0 && self.fail_prob < 1.0) {
            return Err(config_error("fail_prob", "fail_prob must lie in (0, 1)"));
        }
        for (i, &h) in self.horizons.iter().enumerate() {
            if h == 0 || h > self.optimizer.horizon {
                return Err(config_error(
                    format!("horizons[{i}]"),
                    format!("horizon {h} must lie in 1..={}", self.optimizer.horizon),
                ));
            }
        }
        match (&self.start, self.start_dist_sq) {
            (Some(_), Some(_)) => {
                return Err(config_error(
                    "start",
                    "give either start or start_dist_sq, not both",
                ))
            }
            (None, None) => {
                return Err(config_error("start", "one of start or start_dist_sq is required"))
            }
            (None, Some(d)) if !(d >= 0.0 && d.is_finite()) => {
                return Err(config_error("start_dist_sq", "must be nonnegative"))
            }
            _ => {}
        }
        let needs = |p: PropertyCheck| checks.contains(&Check::Property(p));
        if needs(PropertyCheck::RateSlope) {
            let rate = self
                .rate
                .as_ref()
                .ok_or_else(|| config_error("rate", "rate_slope needs a [rate] section"))?;
            if rate.t_min == 0 || rate.t_min >= rate.t_max || rate.t_max > self.optimizer.horizon {
                return Err(config_error(
                    "rate",
                    format!(
                        "need 0 < t_min < t_max <= horizon ({})",
                        self.optimizer.horizon
                    ),
                ));
            }
            if rate.points < adagrad_core::analysis::MIN_FIT_POINTS {
                return Err(config_error(
                    "rate.points",
                    format!(
                        "a fit needs at least {} points",
                        adagrad_core::analysis::MIN_FIT_POINTS
                    ),
                ));
            }
        }
        if needs(PropertyCheck::ScaleInvariance) {
            let scale = self.scale.as_ref().ok_or_else(|| {
                config_error("scale", "scale_invariance needs a [scale] section")
            })?;
            if scale.factors.is_empty() || scale.factors.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return Err(config_error("scale.factors", "factors must be positive"));
            }
        }
        Ok(())
    }

    /// Builds the problem instance.
    pub fn build_problem(&self) -> Result<ProblemSpec, HarnessError> {
        let spec = match &self.problem {
            ProblemConfig::Quadratic {
                eigenvalues,
                center,
            } => {
                let center = center.clone().unwrap_or_else(|| vec![0.0; eigenvalues.len()]);
                make_quadratic(eigenvalues.len(), eigenvalues, &center)
            }
            ProblemConfig::Logistic {
                features,
                labels,
                ridge,
            } => make_logistic(features, labels, *ridge),
            ProblemConfig::Quasar { gamma } => make_quasar_instance(*gamma),
            ProblemConfig::Document { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                let doc: ProblemDocument = serde_json::from_str(&text)
                    .map_err(|e| config_error("problem.path", e.to_string()))?;
                ProblemSpec::from_document(&doc)
            }
        };
        spec.map_err(|e| config_error("problem", e.to_string()))
    }

    /// `x_1` for `spec`.
    pub fn start_point(&self, spec: &ProblemSpec) -> Result<Vec<f64>, HarnessError> {
        match (&self.start, self.start_dist_sq) {
            (Some(x), _) => {
                if x.len() != spec.dim() {
                    return Err(config_error(
                        "start",
                        format!("start has {} entries but the problem has dimension {}", x.len(), spec.dim()),
                    ));
                }
                Ok(x.clone())
            }
            (None, Some(d2)) => {
                let step = (d2 / spec.dim() as f64).sqrt();
                Ok(spec.minimizer().iter().map(|v| v + step).collect())
            }
            (None, None) => Err(config_error("start", "missing start point")),
        }
    }

    /// Horizons at which envelopes are evaluated.
    pub fn check_horizons(&self) -> Vec<usize> {
        if self.horizons.is_empty() {
            vec![self.optimizer.horizon]
        } else {
            self.horizons.clone()
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self.noise, NoiseConfig::Gaussian { std } if std > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
name = "tiny"
start = [2.0]

[problem]
kind = "quadratic"
eigenvalues = [1.0]

[optimizer]
algorithm = "adagradnorm"
eta = 1.0
b0 = 0.1
horizon = 3
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert!(cfg.checks.is_empty());
        assert_eq!(cfg.check_horizons(), vec![3]);
        let spec = cfg.build_problem().unwrap();
        assert_eq!(cfg.start_point(&spec).unwrap(), vec![2.0]);
    }

    #[test]
    fn unknown_field_reports_its_path() {
        let text = MINIMAL.replace("eta = 1.0", "eta = 1.0\nmomentum = 0.9");
        match ExperimentConfig::from_toml_str(&text) {
            Err(HarnessError::Config { path, message }) => {
                assert_eq!(path, "optimizer.momentum");
                assert!(message.contains("momentum"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_reports_its_path() {
        let text = MINIMAL.replace("eta = 1.0", "eta = \"fast\"");
        match ExperimentConfig::from_toml_str(&text) {
            Err(HarnessError::Config { path, .. }) => assert_eq!(path, "optimizer.eta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_check_is_named() {
        let text = MINIMAL.replace("start = [2.0]", "start = [2.0]\nchecks = [\"avg_gap_main\", \"thm_9_9\"]");
        match ExperimentConfig::from_toml_str(&text) {
            Err(HarnessError::Config { path, message }) => {
                assert_eq!(path, "checks[1]");
                assert!(message.contains("thm_9_9"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_and_start_are_validated() {
        let text = MINIMAL.replace("version = 1", "version = 2");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&text),
            Err(HarnessError::Config { path, .. }) if path == "version"
        ));
        let text = MINIMAL.replace("start = [2.0]", "");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = MINIMAL.replace("start = [2.0]", "start = [2.0]\nseeds = []");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = MINIMAL.replace("start = [2.0]", "start = [2.0]\nchecks = [\"rate_slope\"]");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&text),
            Err(HarnessError::Config { path, .. }) if path == "rate"
        ));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }
}
