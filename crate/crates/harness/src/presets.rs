//! Built-in suites, one per acceptance scenario. Each can be exported as
//! TOML and run like any user configuration.

use adagrad_core::optimizers::{Algorithm, OptimizerConfig, PSchedule};

use crate::config::{
    ExperimentConfig, NoiseConfig, ProblemConfig, RateConfig, RateStatistic, ScaleConfig,
    ScaleExpectation, CONFIG_VERSION,
};

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

/// `linspace(0.1, 1, 10)`.
pub fn preset_eigenvalues() -> Vec<f64> {
    (0..10).map(|i| 0.1 + 0.9 * i as f64 / 9.0).collect()
}

/// 20 eigenvalues geometric from 1e-4 to 1. The small end keeps the linear
/// phase of the last-iterate methods out of the measured window.
pub fn witness_eigenvalues() -> Vec<f64> {
    (0..20)
        .map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 19.0))
        .collect()
}

fn base(name: &str, problem: ProblemConfig, optimizer: OptimizerConfig) -> ExperimentConfig {
    ExperimentConfig {
        version: CONFIG_VERSION,
        name: name.to_string(),
        output_dir: None,
        seeds: vec![0],
        checks: Vec::new(),
        horizons: Vec::new(),
        fail_prob: 0.1,
        start: None,
        start_dist_sq: Some(4.0),
        svg: true,
        problem,
        noise: NoiseConfig::None,
        optimizer,
        rate: None,
        scale: None,
    }
}

fn quadratic() -> ProblemConfig {
    ProblemConfig::Quadratic {
        eigenvalues: preset_eigenvalues(),
        center: None,
    }
}

fn witness() -> ProblemConfig {
    ProblemConfig::Quadratic {
        eigenvalues: witness_eigenvalues(),
        center: None,
    }
}

fn checks(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn rate(statistic: RateStatistic, t_max: usize, max_slope: f64) -> Option<RateConfig> {
    Some(RateConfig {
        statistic,
        t_min: 100,
        t_max,
        points: 5,
        max_slope,
    })
}

fn avg_gap_main_quadratic() -> ExperimentConfig {
    let mut c = base(
        "avg_gap_main_quadratic",
        quadratic(),
        OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, 0.1, 10_000),
    );
    c.checks = checks(&[
        "avg_gap_main",
        "avg_gap_improved",
        "bt_deterministic",
        "rate_slope",
        "assumptions",
        "finite_diff",
    ]);
    c.horizons = vec![10, 100, 1000, 10_000];
    c.rate = rate(RateStatistic::AverageGap, 10_000, -0.9);
    c
}

fn last_power_rate() -> ExperimentConfig {
    let mut c = base(
        "last_power_rate",
        witness(),
        OptimizerConfig::new(Algorithm::LastPower, 1.0, 0.1, 10_000)
            .with_delta_big(1.0)
            .with_p_schedule(PSchedule::ReciprocalT),
    );
    c.checks = checks(&["rate_slope"]);
    c.rate = rate(RateStatistic::LastGap, 10_000, -0.9);
    c
}

fn acc_power_rate() -> ExperimentConfig {
    let mut c = base(
        "acc_power_rate",
        witness(),
        OptimizerConfig::new(Algorithm::AccPower, 1.0, 0.1, 10_000).with_delta_big(1.0),
    );
    c.checks = checks(&["rate_slope"]);
    c.rate = rate(RateStatistic::LastGap, 10_000, -1.8);
    c
}

/// Envelope presets share `b0 = 1`: with a smaller `b0` the exponential
/// envelopes overflow.
fn envelope_preset(name: &str, alg: Algorithm, check: &str) -> ExperimentConfig {
    let mut c = base(
        name,
        quadratic(),
        OptimizerConfig::new(alg, 1.0, 1.0, 1000)
            .with_delta_big(1.0)
            .with_delta_small(2.0 / 3.0),
    );
    c.checks = checks(&[check, "assumptions"]);
    c.horizons = vec![100, 1000];
    c
}

fn last_power_quadratic() -> ExperimentConfig {
    envelope_preset("last_power_quadratic", Algorithm::LastPower, "last_power")
}

fn last_exp_quadratic() -> ExperimentConfig {
    envelope_preset("last_exp_quadratic", Algorithm::LastExp, "last_exp")
}

fn acc_power_quadratic() -> ExperimentConfig {
    envelope_preset("acc_power_quadratic", Algorithm::AccPower, "acc_power")
}

fn acc_exp_quadratic() -> ExperimentConfig {
    envelope_preset("acc_exp_quadratic", Algorithm::AccExp, "acc_exp")
}

fn last_limit_quadratic() -> ExperimentConfig {
    let mut c = base(
        "last_limit_quadratic",
        quadratic(),
        OptimizerConfig::new(Algorithm::LastPower, 1.0, 1.0, 10_000)
            .with_delta_big(0.0)
            .with_p_schedule(PSchedule::ReciprocalT),
    );
    c.checks = checks(&["last_limit", "grad_monotone", "assumptions"]);
    c.horizons = vec![100, 1000, 10_000];
    c
}

fn acc_limit_quadratic() -> ExperimentConfig {
    let mut c = base(
        "acc_limit_quadratic",
        quadratic(),
        OptimizerConfig::new(Algorithm::AccPower, 1.0, 1.0, 1000).with_delta_big(0.0),
    );
    c.checks = checks(&["acc_limit", "assumptions"]);
    c.horizons = vec![100, 1000];
    c
}

/// Per-coordinate noise level shared by the stochastic presets.
pub const STOCHASTIC_STD: f64 = 0.3;

fn gt_stochastic_gaussian() -> ExperimentConfig {
    let mut c = base(
        "gt_stochastic_gaussian",
        quadratic(),
        OptimizerConfig::new(Algorithm::AdaGradNormStochastic, 1.0, 0.1, 500),
    );
    c.noise = NoiseConfig::Gaussian {
        std: STOCHASTIC_STD,
    };
    c.seeds = (0..200).collect();
    c.fail_prob = 0.1;
    c.checks = checks(&["gt_stochastic", "assumptions"]);
    c.svg = false;
    c
}

fn stochastic_rate() -> ExperimentConfig {
    let mut c = base(
        "stochastic_rate",
        quadratic(),
        OptimizerConfig::new(Algorithm::AdaGradNormStochastic, 1.0, 0.1, 10_000),
    );
    c.noise = NoiseConfig::Gaussian {
        std: STOCHASTIC_STD,
    };
    c.seeds = (0..20).collect();
    c.checks = checks(&["rate_slope"]);
    c.rate = rate(RateStatistic::AverageGap, 10_000, -0.35);
    c.svg = false;
    c
}

fn coord_quadratic() -> ExperimentConfig {
    let mut c = base(
        "coord_quadratic",
        ProblemConfig::Quadratic {
            eigenvalues: vec![0.5, 2.0, 8.0],
            center: Some(vec![1.0, -1.0, 0.5]),
        },
        OptimizerConfig::new(Algorithm::AdagradCoord, 1.0, 0.1, 1000),
    );
    c.start_dist_sq = Some(3.0);
    c.checks = checks(&["coord_sum", "coord_gap", "assumptions"]);
    c
}

fn scale_preset(name: &str, problem: ProblemConfig, opt: OptimizerConfig, expect: ScaleExpectation) -> ExperimentConfig {
    let mut c = base(name, problem, opt);
    c.checks = checks(&["scale_invariance"]);
    c.scale = Some(ScaleConfig {
        factors: vec![0.1, 10.0],
        expect,
    });
    c.svg = false;
    c
}

fn scale_avg_gap_main() -> ExperimentConfig {
    scale_preset(
        "scale_avg_gap_main",
        quadratic(),
        OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, 0.1, 500),
        ScaleExpectation::Invariant,
    )
}

fn scale_last_exp() -> ExperimentConfig {
    scale_preset(
        "scale_last_exp",
        quadratic(),
        OptimizerConfig::new(Algorithm::LastExp, 1.0, 0.1, 500),
        ScaleExpectation::Invariant,
    )
}

fn scale_acc_exp() -> ExperimentConfig {
    scale_preset(
        "scale_acc_exp",
        quadratic(),
        OptimizerConfig::new(Algorithm::AccExp, 1.0, 0.1, 500),
        ScaleExpectation::Invariant,
    )
}

fn scale_last_limit() -> ExperimentConfig {
    scale_preset(
        "scale_last_limit",
        quadratic(),
        OptimizerConfig::new(Algorithm::LastPower, 1.0, 0.1, 500).with_delta_big(0.0),
        ScaleExpectation::Invariant,
    )
}

fn scale_last_power() -> ExperimentConfig {
    scale_preset(
        "scale_last_power",
        witness(),
        OptimizerConfig::new(Algorithm::LastPower, 1.0, 0.1, 500).with_delta_big(1.0),
        ScaleExpectation::Variant,
    )
}

/// Deterministic synthetic logistic data: 40 samples, 4 features.
pub fn logistic_data() -> (Vec<Vec<f64>>, Vec<f64>) {
    let features: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let s = i as f64;
            vec![
                (1.3 * s).sin() * 2.0,
                (0.7 * s + 0.4).cos() * 2.0,
                (0.31 * s * s).sin(),
                ((2.1 * s).sin() + (0.9 * s).cos()),
            ]
        })
        .collect();
    let labels = features
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let score = a[0] + 0.5 * a[1] - a[3];
            // A few flipped labels keep the data non-separable.
            let flip = i % 7 == 3;
            if (score > 0.0) != flip {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    (features, labels)
}

fn foundations_logistic() -> ExperimentConfig {
    let (features, labels) = logistic_data();
    let mut c = base(
        "foundations_logistic",
        ProblemConfig::Logistic {
            features,
            labels,
            ridge: 0.05,
        },
        OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, 0.1, 2000),
    );
    c.checks = checks(&[
        "finite_diff",
        "assumptions",
        "avg_gap_main",
        "avg_gap_improved",
        "bt_deterministic",
    ]);
    c.horizons = vec![100, 2000];
    c
}

fn foundations_quasar() -> ExperimentConfig {
    let mut c = base(
        "foundations_quasar",
        ProblemConfig::Quasar { gamma: 0.5 },
        OptimizerConfig::new(Algorithm::AdaGradNorm, 1.0, 0.1, 2000),
    );
    c.start_dist_sq = None;
    c.start = Some(vec![3.0]);
    c.checks = checks(&[
        "finite_diff",
        "assumptions",
        "avg_gap_main",
        "avg_gap_improved",
        "bt_deterministic",
    ]);
    c.horizons = vec![100, 2000];
    c
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "avg_gap_main_quadratic",
        summary: "AdaGradNorm on the 10-d quadratic: average-gap envelopes at T = 10..1e4, b_T envelope and the -1 rate",
        build: avg_gap_main_quadratic,
    },
    Preset {
        name: "last_power_rate",
        summary: "Last-iterate power rule (D = 1, p_t = 1/t) on the ill-conditioned witness: last-gap slope <= -0.9",
        build: last_power_rate,
    },
    Preset {
        name: "acc_power_rate",
        summary: "Accelerated power rule (D = 1) on the ill-conditioned witness: averaged-point gap slope <= -1.8",
        build: acc_power_rate,
    },
    Preset {
        name: "last_power_quadratic",
        summary: "Last-iterate power envelope at T = 100, 1000",
        build: last_power_quadratic,
    },
    Preset {
        name: "last_exp_quadratic",
        summary: "Last-iterate exponent envelope (d = 2/3) at T = 100, 1000",
        build: last_exp_quadratic,
    },
    Preset {
        name: "acc_power_quadratic",
        summary: "Accelerated power envelope at T = 100, 1000",
        build: acc_power_quadratic,
    },
    Preset {
        name: "acc_exp_quadratic",
        summary: "Accelerated exponent envelope (d = 2/3) at T = 100, 1000",
        build: acc_exp_quadratic,
    },
    Preset {
        name: "last_limit_quadratic",
        summary: "Power rule at D = 0: constant-b envelope at T = 1e2..1e4 and gradient-norm monotonicity",
        build: last_limit_quadratic,
    },
    Preset {
        name: "acc_limit_quadratic",
        summary: "Accelerated power rule at D = 0: two-term envelope at T = 100, 1000",
        build: acc_limit_quadratic,
    },
    Preset {
        name: "gt_stochastic_gaussian",
        summary: "200 Gaussian-noise seeds at T = 500: b_T <= g_T jointly with the noise event on >= 90% of runs",
        build: gt_stochastic_gaussian,
    },
    Preset {
        name: "stochastic_rate",
        summary: "Stochastic AdaGradNorm, 20 seeds to T = 1e4: mean average-gap slope <= -0.35",
        build: stochastic_rate,
    },
    Preset {
        name: "coord_quadratic",
        summary: "Per-coordinate AdaGrad on a 3-d diagonal quadratic: accumulator-sum and average-gap envelopes",
        build: coord_quadratic,
    },
    Preset {
        name: "scale_avg_gap_main",
        summary: "AdaGradNorm is invariant under F -> cF, b0 -> c b0",
        build: scale_avg_gap_main,
    },
    Preset {
        name: "scale_last_exp",
        summary: "Last-iterate exponent rule is scale invariant",
        build: scale_last_exp,
    },
    Preset {
        name: "scale_acc_exp",
        summary: "Accelerated exponent rule is scale invariant",
        build: scale_acc_exp,
    },
    Preset {
        name: "scale_last_limit",
        summary: "Power rule at D = 0 is scale invariant",
        build: scale_last_limit,
    },
    Preset {
        name: "scale_last_power",
        summary: "Power rule at D = 1 is not scale invariant (deviation > 1e-3)",
        build: scale_last_power,
    },
    Preset {
        name: "foundations_logistic",
        summary: "Ridge logistic regression: gradient check, assumption certification and AdaGradNorm envelopes",
        build: foundations_logistic,
    },
    Preset {
        name: "foundations_quasar",
        summary: "Non-convex 1/2-quasar-convex instance: gradient check, assumption certification and AdaGradNorm envelopes",
        build: foundations_quasar,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for p in PRESETS {
            let cfg = p.config();
            assert_eq!(cfg.name, p.name);
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
            assert_eq!(again, cfg, "{}", p.name);
        }
    }

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), PRESETS.len());
    }
}
