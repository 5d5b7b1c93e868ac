//! Aggregation of replication records into per-cell summaries.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::ReplicationRecord;
use crate::error::{Result, RrrError};

/// Aggregates for one `(setting, b₀, r, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub setting: String,
    pub b0: f64,
    pub true_rank: usize,
    pub method: String,
    pub reps: usize,
    /// Replications where the method was infeasible.
    pub na: usize,
    pub recoveries: usize,
    /// `recoveries / reps`; NA replications count as failures.
    pub recovery_rate: f64,
    pub mean_rank: Option<f64>,
    pub mean_snr: Option<f64>,
    pub mean_fit_err: Option<f64>,
    pub mean_pred_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<SummaryRow>,
}

fn cell_cmp(a: &ReplicationRecord, b: &ReplicationRecord) -> Ordering {
    a.experiment
        .cmp(&b.experiment)
        .then_with(|| a.setting.cmp(&b.setting))
        .then_with(|| a.b0.total_cmp(&b.b0))
        .then_with(|| a.true_rank.cmp(&b.true_rank))
        .then_with(|| a.method.cmp(&b.method))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Sorts records into the canonical order `(experiment, setting, b₀, r, method, rep)`.
pub fn sort_records(records: &mut [ReplicationRecord]) {
    records.sort_by(|a, b| cell_cmp(a, b).then_with(|| a.rep.cmp(&b.rep)));
}

/// Groups records into cells. With `expected_reps`, every cell must hold
/// exactly that many replications.
pub fn aggregate(records: &[ReplicationRecord], expected_reps: Option<usize>) -> Result<ExperimentReport> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut rows = Vec::new();
    for cell in sorted.chunk_by(|a, b| cell_cmp(a, b) == Ordering::Equal) {
        let head = &cell[0];
        let mut reps: Vec<u64> = cell.iter().map(|r| r.rep).collect();
        reps.dedup();
        if reps.len() != cell.len() {
            return Err(RrrError::ConfigError(format!(
                "duplicate replication indices in cell {}/{}/r={}",
                head.setting, head.method, head.true_rank
            )));
        }
        if let Some(want) = expected_reps {
            if cell.len() != want {
                return Err(RrrError::ConfigError(format!(
                    "cell {}/{}/r={} has {} replications, expected {want}",
                    head.setting,
                    head.method,
                    head.true_rank,
                    cell.len()
                )));
            }
        }
        let recoveries = cell.iter().filter(|r| r.recovered()).count();
        rows.push(SummaryRow {
            experiment: head.experiment.clone(),
            setting: head.setting.clone(),
            b0: head.b0,
            true_rank: head.true_rank,
            method: head.method.clone(),
            reps: cell.len(),
            na: cell.iter().filter(|r| r.selected.is_none()).count(),
            recoveries,
            recovery_rate: recoveries as f64 / cell.len() as f64,
            mean_rank: mean(cell.iter().filter_map(|r| r.selected.map(|k| k as f64))),
            mean_snr: mean(cell.iter().filter_map(|r| r.snr)),
            mean_fit_err: mean(cell.iter().filter_map(|r| r.fit_err)),
            mean_pred_err: mean(cell.iter().filter_map(|r| r.pred_err)),
        });
    }
    Ok(ExperimentReport { rows })
}

impl ExperimentReport {
    pub fn row(&self, setting: &str, b0: f64, true_rank: usize, method: &str) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.setting == setting && r.b0 == b0 && r.true_rank == true_rank && r.method == method)
    }

    /// Rows of one setting and method, in rank then `b₀` order.
    pub fn series<'a>(&'a self, setting: &'a str, method: &'a str) -> impl Iterator<Item = &'a SummaryRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.setting == setting && r.method == method)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
