//! Experiment harness: simulation grids, the tightness sweep and the ratio
//! study, with CSV and SVG output.
//!
//! An [`ExperimentSpec`] is either a named preset ([`presets::preset`]) or a
//! JSON file of the form `{"kind": "grid" | "tightness" | "ratio", "config": ...}`.

pub mod grid;
pub mod method;
pub mod presets;
pub mod ratio;
pub mod record;
pub mod report;
pub mod svg;
pub mod tightness;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use grid::{run_grid, run_grid_inspect, GridConfig, GridSetting, Replication};
pub use method::{evaluate, grs_lambda, parse_methods, Method, MethodContext, MethodOutcome};
pub use presets::{preset, PRESETS};
pub use ratio::{ratio_study, RatioConfig, RatioRow};
pub use record::{
    read_records, read_records_file, write_records, write_records_file, ReplicationRecord, SCHEMA_VERSION,
};
pub use report::{aggregate, ExperimentReport, SummaryRow};
pub use tightness::{tightness_sweep, TightnessConfig, TightnessRow};

use crate::error::{Result, RrrError};
use crate::moments::MomentsCache;
use svg::{Chart, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Grid(GridConfig),
    Tightness(TightnessConfig),
    Ratio(Vec<RatioConfig>),
}

/// Command-line overrides applied on top of a spec.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub eps: Option<f64>,
    pub mc_draws: Option<usize>,
    pub methods: Option<Vec<String>>,
}

impl ExperimentSpec {
    /// A preset name or a path to a JSON spec.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if PRESETS.contains(&name_or_path) {
            return preset(name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            return Ok(serde_json::from_str(&text)?);
        }
        preset(name_or_path)
    }

    pub fn name(&self) -> String {
        match self {
            ExperimentSpec::Grid(g) => g.name.clone(),
            ExperimentSpec::Tightness(t) => t.name.clone(),
            ExperimentSpec::Ratio(cases) => cases.first().map_or("ratio".into(), |c| c.name.clone()),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        match self {
            ExperimentSpec::Grid(g) => {
                if let Some(s) = o.seed {
                    g.seed = s;
                }
                if let Some(r) = o.reps {
                    g.reps = r;
                }
                if let Some(e) = o.eps {
                    g.eps = e;
                }
                if let Some(d) = o.mc_draws {
                    g.mc_draws = d;
                }
                if let Some(m) = &o.methods {
                    g.override_methods(m.clone());
                }
            }
            ExperimentSpec::Tightness(t) => {
                if let Some(s) = o.seed {
                    t.seed = s;
                }
            }
            ExperimentSpec::Ratio(cases) => {
                for c in cases {
                    if let Some(s) = o.seed {
                        c.seed = s;
                    }
                    if let Some(r) = o.reps {
                        c.pairs = r;
                    }
                }
            }
        }
    }
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub report: Option<ExperimentReport>,
}

type Metric = (&'static str, &'static str, fn(&SummaryRow) -> Option<f64>);

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Runs the spec and writes its CSV tables, SVG plots and a timing file to `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path, cache: &MomentsCache) -> Result<RunOutput> {
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let name = file_stem(&spec.name());
    let mut out = RunOutput::default();
    match spec {
        ExperimentSpec::Grid(cfg) => {
            let records = run_grid(cfg, cache)?;
            let path = out_dir.join(format!("{name}_records.csv"));
            write_records_file(&path, &records)?;
            out.files.push(path);
            let report = aggregate(&records, Some(cfg.reps))?;
            out.files.extend(write_report(&report, out_dir, &name)?);
            out.report = Some(report);
        }
        ExperimentSpec::Tightness(cfg) => {
            let rows = tightness_sweep(cfg)?;
            let path = out_dir.join(format!("{name}.csv"));
            tightness::write_tightness(std::fs::File::create(&path)?, &rows)?;
            out.files.push(path);
            out.files.push(plot_tightness(&rows, out_dir, &name)?);
        }
        ExperimentSpec::Ratio(cases) => {
            for case in cases {
                let rows = ratio_study(case)?;
                let stem = file_stem(&case.name);
                let path = out_dir.join(format!("{stem}.csv"));
                ratio::write_ratio(std::fs::File::create(&path)?, &rows)?;
                out.files.push(path);
                out.files.push(plot_ratio(&rows, out_dir, &stem)?);
            }
        }
    }
    let timing = out_dir.join(format!("{name}_timing.txt"));
    std::fs::write(&timing, format!("wall_seconds={:.3}\n", start.elapsed().as_secs_f64()))?;
    out.files.push(timing);
    Ok(out)
}

/// Writes the summary CSV and plots for an aggregated report.
pub fn write_report(report: &ExperimentReport, out_dir: &Path, name: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let path = out_dir.join(format!("{name}_summary.csv"));
    report.write_csv_file(&path)?;
    files.push(path);
    files.extend(plot_report(report, out_dir, name)?);
    Ok(files)
}

fn unique<T: Ord + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    items.collect::<BTreeSet<_>>().into_iter().collect()
}

fn save(chart: &Chart, path: PathBuf, files: &mut Vec<PathBuf>) -> Result<()> {
    chart.write(&path).map_err(RrrError::from)?;
    files.push(path);
    Ok(())
}

/// Recovery-rate and mean-rank curves per setting, plus a recovery-vs-SNR scatter.
pub fn plot_report(report: &ExperimentReport, out_dir: &Path, name: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let settings = unique(report.rows.iter().map(|r| r.setting.clone()));
    for setting in &settings {
        let rows: Vec<&SummaryRow> = report.rows.iter().filter(|r| &r.setting == setting).collect();
        let methods = unique(rows.iter().map(|r| r.method.clone()));
        let ranks = unique(rows.iter().map(|r| r.true_rank));
        let mut b0s: Vec<f64> = rows.iter().map(|r| r.b0).collect();
        b0s.sort_by(f64::total_cmp);
        b0s.dedup();
        let stem = format!("{name}_{}", file_stem(setting));

        if ranks.len() == 1 && b0s.len() > 1 {
            let metrics: [Metric; 4] = [
                ("recovery", "recovery rate", |r| Some(r.recovery_rate)),
                ("mean_rank", "mean selected rank", |r| r.mean_rank),
                ("fit_err", "mean fit error", |r| r.mean_fit_err),
                ("pred_err", "mean prediction error", |r| r.mean_pred_err),
            ];
            for (tag, label, get) in metrics {
                let mut chart = Chart::new(format!("{setting}, r = {}", ranks[0]), "b0", label);
                for m in &methods {
                    let pts: Vec<(f64, f64)> = rows
                        .iter()
                        .filter(|r| &r.method == m)
                        .filter_map(|r| get(r).map(|v| (r.b0, v)))
                        .collect();
                    if !pts.is_empty() {
                        chart.push(Series::line(m.clone(), pts));
                    }
                }
                if !chart.series.is_empty() {
                    save(&chart, out_dir.join(format!("{stem}_{tag}.svg")), &mut files)?;
                }
            }
        } else {
            for (bi, &b0) in b0s.iter().enumerate() {
                let suffix = if b0s.len() > 1 {
                    format!("_b{bi}")
                } else {
                    String::new()
                };
                let title = format!("{setting}, b0 = {b0}");
                let mut rec = Chart::new(title.clone(), "true rank r", "recovery rate").with_y_range(-0.02, 1.02);
                let mut mean = Chart::new(title, "true rank r", "mean selected rank");
                for m in &methods {
                    let sel: Vec<&&SummaryRow> = rows.iter().filter(|r| &r.method == m && r.b0 == b0).collect();
                    rec.push(Series::line(
                        m.clone(),
                        sel.iter().map(|r| (r.true_rank as f64, r.recovery_rate)).collect(),
                    ));
                    mean.push(Series::line(
                        m.clone(),
                        sel.iter()
                            .filter_map(|r| r.mean_rank.map(|v| (r.true_rank as f64, v)))
                            .collect(),
                    ));
                }
                let (lo, hi) = (ranks[0] as f64, ranks[ranks.len() - 1] as f64);
                mean.push(Series::reference("selected = r", vec![(lo, lo), (hi, hi)]));
                save(&rec, out_dir.join(format!("{stem}{suffix}_recovery.svg")), &mut files)?;
                save(&mean, out_dir.join(format!("{stem}{suffix}_mean_rank.svg")), &mut files)?;
            }
        }

        let mut snr =
            Chart::new(format!("{setting}: recovery vs SNR"), "SNR", "recovery rate").with_y_range(-0.02, 1.02);
        for m in &methods {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| &r.method == m)
                .filter_map(|r| r.mean_snr.map(|s| (s, r.recovery_rate)))
                .collect();
            if !pts.is_empty() {
                snr.push(Series::points(m.clone(), pts));
            }
        }
        if !snr.series.is_empty() {
            save(&snr, out_dir.join(format!("{stem}_snr.svg")), &mut files)?;
        }
    }
    Ok(files)
}

fn plot_tightness(rows: &[TightnessRow], out_dir: &Path, name: &str) -> Result<PathBuf> {
    let mut chart = Chart::new("Tightness of the signal condition", "d_r(XA)", "value");
    let hit: Vec<&TightnessRow> = rows.iter().filter(|r| r.recovered).collect();
    chart.push(Series::points(
        "sqrt(lambda) sigma_r",
        hit.iter()
            .filter_map(|r| r.sqrt_lambda_sigma_r.map(|v| (r.d_r_xa, v)))
            .collect(),
    ));
    chart.push(Series::points(
        "sqrt(lambda) sigma_r - d1(PE)",
        hit.iter().filter_map(|r| r.gap.map(|v| (r.d_r_xa, v))).collect(),
    ));
    let hi = rows.iter().map(|r| r.d_r_xa).fold(0.0, f64::max);
    chart.push(Series::reference("y = x", vec![(0.0, 0.0), (hi, hi)]));
    let path = out_dir.join(format!("{name}.svg"));
    chart.write(&path)?;
    Ok(path)
}

fn plot_ratio(rows: &[RatioRow], out_dir: &Path, stem: &str) -> Result<PathBuf> {
    let mut chart = Chart::new(stem, "j", "ratio");
    chart.push(Series::line(
        "E d_j(PE) / E d_j(Z)",
        rows.iter().map(|r| (r.j as f64, r.ratio_of_means)).collect(),
    ));
    chart.push(Series::line(
        "mean of d_j(PE)/d_j(Z)",
        rows.iter().map(|r| (r.j as f64, r.mean_of_ratios)).collect(),
    ));
    let n = rows.len() as f64;
    chart.push(Series::reference("1", vec![(1.0, 1.0), (n, 1.0)]));
    let path = out_dir.join(format!("{stem}.svg"));
    chart.write(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_and_overrides() {
        let mut spec = preset("exp3").unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.starts_with(r#"{"kind":"grid","config":"#));
        let back: ExperimentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        spec.apply(&Overrides {
            reps: Some(2),
            methods: Some(vec!["SSTRS".into()]),
            ..Default::default()
        });
        let ExperimentSpec::Grid(g) = &spec else { unreachable!() };
        assert_eq!(g.reps, 2);
        assert!(g.settings.iter().all(|s| s.methods.is_none()));
        assert!(ExperimentSpec::load("nope").is_err());
    }
}
