//! Compares the singular values of `PE` with those of a `q × m` Gaussian
//! matrix `Z` over paired draws.

use std::io::Write;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RrrError};
use crate::matrix::{singular_values, ProjectionOp};
use crate::rng::{derive_seed, purpose, substream};
use crate::sim::{scenario_noise, DesignData, SimScenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioConfig {
    pub name: String,
    /// Design and error law; `r` and `b0` are unused.
    pub scenario: SimScenario,
    pub pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub j: usize,
    pub mean_d_pe: f64,
    pub mean_d_z: f64,
    /// `mean d_j(PE) / mean d_j(Z)`.
    pub ratio_of_means: f64,
    /// Mean over pairs of `d_j(PE) / d_j(Z)`.
    pub mean_of_ratios: f64,
}

/// Per-`j` summaries from paired singular-value vectors.
pub fn summarize_pairs(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<RatioRow>> {
    let Some(first) = pairs.first() else {
        return Err(RrrError::ConfigError("ratio study needs at least one pair".into()));
    };
    let len = first.0.len();
    if pairs.iter().any(|(a, b)| a.len() != len || b.len() != len) {
        return Err(RrrError::ShapeError(
            "paired singular-value vectors differ in length".into(),
        ));
    }
    let count = pairs.len() as f64;
    Ok((0..len)
        .map(|j| {
            let mean_d_pe = pairs.iter().map(|(a, _)| a[j]).sum::<f64>() / count;
            let mean_d_z = pairs.iter().map(|(_, b)| b[j]).sum::<f64>() / count;
            let mean_of_ratios = pairs.iter().map(|(a, b)| a[j] / b[j]).sum::<f64>() / count;
            RatioRow {
                j: j + 1,
                mean_d_pe,
                mean_d_z,
                ratio_of_means: mean_d_pe / mean_d_z,
                mean_of_ratios,
            }
        })
        .collect())
}

fn draw_pair(sc: &SimScenario, p: &ProjectionOp, seed: u64, i: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = substream(seed, &[purpose::REFERENCE, i, 0]);
    let e = scenario_noise(sc, &mut rng)?;
    let d_pe = singular_values(&p.coordinates(&e)?);
    let mut rng = substream(seed, &[purpose::REFERENCE, i, 1]);
    let z = DMatrix::<f64>::from_fn(p.rank(), sc.m, |_, _| StandardNormal.sample(&mut rng));
    Ok((d_pe, singular_values(&z)))
}

pub fn ratio_study(cfg: &RatioConfig) -> Result<Vec<RatioRow>> {
    if cfg.pairs == 0 {
        return Err(RrrError::ConfigError("ratio study needs at least one pair".into()));
    }
    let sc = SimScenario {
        seed: derive_seed(cfg.seed, &[cfg.scenario.seed]),
        r: 0,
        ..cfg.scenario.clone()
    };
    let design = DesignData::generate(&sc)?;
    let pairs = (0..cfg.pairs as u64)
        .into_par_iter()
        .map(|i| draw_pair(&sc, &design.p, sc.seed, i))
        .collect::<Result<Vec<_>>>()?;
    summarize_pairs(&pairs)
}

pub fn write_ratio<W: Write>(out: W, rows: &[RatioRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
