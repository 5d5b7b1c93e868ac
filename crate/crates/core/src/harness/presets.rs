//! Named experiment configurations mirroring the published simulation study.

use super::grid::{GridConfig, GridSetting};
use super::ratio::RatioConfig;
use super::tightness::TightnessConfig;
use super::ExperimentSpec;
use crate::error::{Result, RrrError};
use crate::moments::DEFAULT_MC_DRAWS;
use crate::selftune::DEFAULT_EPS;
use crate::sim::{ApproxLowRank, ErrorLaw, SimScenario};

pub const PRESETS: [&str; 10] = [
    "exp1",
    "exp2",
    "exp3",
    "exp4",
    "exp5",
    "tightness",
    "ratio",
    "fit-study",
    "mc-vs-db",
    "kf-compare",
];

const BSW_CONSTANTS: [&str; 5] = ["BSW-0.7", "BSW-0.9", "BSW-1.1", "BSW-1.3", "BSW-1.5"];

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn setting(id: impl Into<String>, scenario: SimScenario, ranks: impl IntoIterator<Item = usize>) -> GridSetting {
    GridSetting {
        id: id.into(),
        scenario,
        ranks: ranks.into_iter().collect(),
        b0: vec![],
        target_snr: None,
        methods: None,
    }
}

fn grid(name: &str, settings: Vec<GridSetting>, methods: &[&str], reps: usize) -> GridConfig {
    GridConfig {
        name: name.into(),
        settings,
        methods: strings(methods),
        reps,
        seed: 0,
        eps: DEFAULT_EPS,
        mc_draws: DEFAULT_MC_DRAWS,
        snr_draws: 100,
        fit_errors: true,
    }
}

fn b0_grid(lo: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| ((lo + step * i as f64) * 1e6).round() / 1e6)
        .collect()
}

fn exp1() -> GridConfig {
    let mut methods = vec!["STRS"];
    methods.extend(BSW_CONSTANTS);
    let low = GridSetting {
        b0: vec![0.15, 0.20, 0.25],
        ..setting("low", SimScenario::new(150, 30, 20, 20, 0, 0.1, 0.25, 1), 0..=20)
    };
    let high = GridSetting {
        b0: vec![0.03, 0.05, 0.07],
        ..setting("high", SimScenario::new(100, 30, 150, 20, 0, 0.1, 0.07, 2), 0..=20)
    };
    grid("exp1", vec![low, high], &methods, 200)
}

fn exp2() -> GridConfig {
    let mut settings: Vec<GridSetting> = [143, 145, 147, 149]
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            setting(
                format!("q{q}"),
                SimScenario::new(150, 30, 200, q, 0, 0.1, 0.011, 10 + i as u64),
                0..=22,
            )
        })
        .collect();
    for (i, n) in [50usize, 100, 150].into_iter().enumerate() {
        for (j, m) in [50usize, 125, 200].into_iter().enumerate() {
            settings.push(GridSetting {
                target_snr: Some(3.5),
                methods: Some(strings(&["STRS", "BSW-1.1"])),
                ..setting(
                    format!("nq{n}-m{m}"),
                    SimScenario::new(n, m, 200, n, 0, 0.1, 0.011, 20 + (3 * i + j) as u64),
                    0..=n.min(m).min(50),
                )
            });
        }
    }
    grid("exp2", settings, &["BSW-1.1", "BSW-1.3", "STRS"], 200)
}

fn exp3() -> GridConfig {
    let settings = vec![
        setting("low", SimScenario::new(150, 30, 20, 20, 0, 0.1, 0.25, 1), 0..=20),
        setting("high", SimScenario::new(100, 30, 150, 20, 0, 0.1, 0.07, 2), 0..=20),
        setting("extended", SimScenario::new(50, 50, 300, 30, 0, 0.1, 2.0, 3), 0..=30),
    ];
    grid("exp3", settings, &["GRS", "STRS"], 200)
}

fn exp4() -> GridConfig {
    let t = |nu: f64| ErrorLaw::StudentT { nu };
    let mut settings = vec![GridSetting {
        methods: Some(strings(&["GRS", "STRS"])),
        ..setting(
            "xa-n150-q150",
            SimScenario::new(150, 100, 250, 150, 0, 0.1, 0.002, 40).with_law(t(6.0)),
            0..=15,
        )
    }];
    for nu in [6.0, 8.0, 10.0] {
        settings.push(setting(
            format!("xa-n300-q280-t{nu}"),
            SimScenario::new(300, 50, 400, 280, 0, 0.1, 0.0015, 41).with_law(t(nu)),
            0..=15,
        ));
        settings.push(setting(
            format!("xa-n80-m400-t{nu}"),
            SimScenario::new(80, 400, 150, 60, 0, 0.1, 0.003, 42).with_law(t(nu)),
            0..=15,
        ));
        settings.push(setting(
            format!("direct-n500-m80-t{nu}"),
            SimScenario::direct(500, 80, 0, 0.25, 43).with_law(t(nu)),
            0..=20,
        ));
        settings.push(setting(
            format!("direct-n80-m500-t{nu}"),
            SimScenario::direct(80, 500, 0, 0.25, 44).with_law(t(nu)),
            0..=20,
        ));
    }
    GridConfig {
        fit_errors: false,
        ..grid("exp4", settings, &["SSTRS"], 100)
    }
}

fn exp5() -> GridConfig {
    let mut settings = Vec::new();
    for nu in [6.0, 8.0, 10.0] {
        let law = ErrorLaw::StudentT { nu };
        settings.push(setting(
            format!("low-t{nu}"),
            SimScenario::new(150, 30, 30, 30, 0, 0.1, 0.15, 50).with_law(law),
            0..=20,
        ));
        settings.push(setting(
            format!("high-t{nu}"),
            SimScenario::new(100, 30, 150, 30, 0, 0.1, 0.015, 51).with_law(law),
            0..=20,
        ));
    }
    grid("exp5", settings, &["STRS"], 200)
}

fn mc_vs_db() -> GridConfig {
    let mut settings = Vec::new();
    for (tag, law) in [("uniform", ErrorLaw::Uniform), ("t6", ErrorLaw::StudentT { nu: 6.0 })] {
        settings.push(setting(
            format!("low-{tag}"),
            SimScenario::new(300, 50, 50, 50, 0, 0.1, 0.1, 60).with_law(law),
            0..=15,
        ));
        settings.push(setting(
            format!("high-{tag}"),
            SimScenario::new(200, 60, 300, 30, 0, 0.1, 0.003, 61).with_law(law),
            0..=15,
        ));
    }
    grid("mc-vs-db", settings, &["STRS", "STRS-DB"], 200)
}

fn kf_compare() -> GridConfig {
    let s = setting(
        "n300-m40-q35",
        SimScenario::new(300, 40, 35, 35, 0, 0.1, 20.0, 70),
        10..=35,
    );
    grid("kf-compare", vec![s], &["KF-2", "STRS"], 200)
}

fn fit_study() -> GridConfig {
    let approx = Some(ApproxLowRank { gamma: 0.8, beta: 1 });
    let low = SimScenario::new(200, 50, 50, 50, 10, 0.1, 0.02, 80);
    let high = SimScenario::new(150, 50, 300, 50, 10, 0.1, 0.0015, 81);
    let low_b0 = b0_grid(0.02, 0.002, 14);
    let high_b0 = b0_grid(0.0015, 0.0001, 16);
    let settings = vec![
        GridSetting {
            b0: low_b0.clone(),
            ..setting("exact-low", low.clone(), [10])
        },
        GridSetting {
            b0: high_b0.clone(),
            ..setting("exact-high", high.clone(), [10])
        },
        GridSetting {
            b0: low_b0,
            ..setting(
                "approx-low",
                SimScenario {
                    approx_low_rank: approx,
                    ..low
                },
                [10],
            )
        },
        GridSetting {
            b0: high_b0,
            ..setting(
                "approx-high",
                SimScenario {
                    approx_low_rank: approx,
                    ..high
                },
                [10],
            )
        },
    ];
    grid("fit-study", settings, &["STRS", "BSW-1.3", "KF-2"], 100)
}

fn tightness() -> TightnessConfig {
    let mut pairs = Vec::new();
    let mut seed = 0;
    for (shape, b0_scale) in [((150, 30, 20, 20), 1.0), ((100, 30, 150, 20), 0.2)] {
        let (n, m, p, q) = shape;
        for eta in [0.1, 0.5] {
            for r in [2, 5, 8] {
                for b0 in [0.1, 0.15, 0.2, 0.25, 0.3] {
                    seed += 1;
                    pairs.push(SimScenario::new(n, m, p, q, r, eta, b0 * b0_scale, seed));
                }
            }
        }
    }
    TightnessConfig {
        name: "tightness".into(),
        pairs,
        lambda_min: 1.0,
        lambda_max: 2000.0,
        lambda_step: 1.0,
        seed: 0,
    }
}

fn ratio() -> Vec<RatioConfig> {
    let law = ErrorLaw::StudentT { nu: 5.0 };
    let case = |name: &str, sc: SimScenario| RatioConfig {
        name: name.into(),
        scenario: SimScenario {
            standardize: true,
            ..sc.with_law(law)
        },
        pairs: 100,
        seed: 0,
    };
    vec![
        case("ratio-case1", SimScenario::new(150, 50, 250, 50, 0, 0.9, 1.0, 90)),
        case("ratio-case2", SimScenario::new(50, 150, 40, 40, 0, 0.9, 1.0, 91)),
    ]
}

/// The configuration registered under `name`.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    Ok(match name {
        "exp1" => ExperimentSpec::Grid(exp1()),
        "exp2" => ExperimentSpec::Grid(exp2()),
        "exp3" => ExperimentSpec::Grid(exp3()),
        "exp4" => ExperimentSpec::Grid(exp4()),
        "exp5" => ExperimentSpec::Grid(exp5()),
        "mc-vs-db" => ExperimentSpec::Grid(mc_vs_db()),
        "kf-compare" => ExperimentSpec::Grid(kf_compare()),
        "fit-study" => ExperimentSpec::Grid(fit_study()),
        "tightness" => ExperimentSpec::Tightness(tightness()),
        "ratio" => ExperimentSpec::Ratio(ratio()),
        other => {
            return Err(RrrError::ConfigError(format!(
                "unknown experiment {other:?}; known: {}",
                PRESETS.join(", ")
            )))
        }
    })
}
