//! Empirical tightness of the signal condition: for each `(X, A)` pair, the
//! largest grid `λ` whose criterion still recovers `r`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::{select_rank, sigma_r_hat_sq, Spectrum};
use crate::error::{Result, RrrError};
use crate::matrix::singular_values;
use crate::rng::derive_seed;
use crate::sim::{Instance, SimScenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessConfig {
    pub name: String,
    /// One `(X, A)` pair per scenario; each needs `r ≥ 1`.
    pub pairs: Vec<SimScenario>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    #[serde(default)]
    pub seed: u64,
}

impl TightnessConfig {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.lambda_min >= 1.0 && self.lambda_max >= self.lambda_min && self.lambda_step > 0.0) {
            return Err(RrrError::ConfigError(
                "lambda grid needs 1 ≤ lambda_min ≤ lambda_max and a positive step".into(),
            ));
        }
        let count = ((self.lambda_max - self.lambda_min) / self.lambda_step + 1e-9).floor() as usize;
        Ok((0..=count)
            .map(|i| self.lambda_min + i as f64 * self.lambda_step)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessRow {
    pub pair: usize,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub eta: f64,
    pub b0: f64,
    pub recovered: bool,
    /// Largest recovering grid point; empty when none recovers.
    pub lambda: Option<f64>,
    pub d_r_xa: f64,
    pub d1_pe: f64,
    /// `λ σ̂_r`.
    pub lambda_sigma_r: Option<f64>,
    /// `√λ σ̂_r`.
    pub sqrt_lambda_sigma_r: Option<f64>,
    /// `√λ σ̂_r − d_1(PE)`, never above `d_r(XA)`.
    pub gap: Option<f64>,
}

/// Largest `λ` in `grid` with `k̂(λ) = r`.
pub fn largest_recovering_lambda(spec: &Spectrum, r: usize, grid: &[f64]) -> Option<f64> {
    grid.iter()
        .rev()
        .copied()
        .find(|&lambda| select_rank(spec, lambda).k_hat == r)
}

fn evaluate_pair(idx: usize, sc: &SimScenario, grid: &[f64]) -> Result<TightnessRow> {
    if sc.r == 0 {
        return Err(RrrError::ConfigError(format!("tightness pair {idx} needs r ≥ 1")));
    }
    let inst = Instance::generate(sc)?;
    let (y, e) = inst.replicate(0)?;
    let spec = Spectrum::from_data(&y, &inst.p)?;
    let d1_pe = singular_values(&inst.p.coordinates(&e)?)
        .first()
        .copied()
        .unwrap_or(0.0);
    let d_r_xa = inst.d_r();
    let lambda = largest_recovering_lambda(&spec, sc.r, grid);
    let (lambda_sigma_r, sqrt_lambda_sigma_r, gap) = match lambda {
        Some(l) => {
            let sigma_r = sigma_r_hat_sq(&spec, l, sc.r)?.sqrt();
            let s = l.sqrt() * sigma_r;
            let gap = s - d1_pe;
            if gap > d_r_xa * (1.0 + 1e-9) + 1e-9 {
                return Err(RrrError::TraceViolation(format!(
                    "pair {idx}: √λσ̂_r − d_1(PE) = {gap} exceeds d_r(XA) = {d_r_xa}"
                )));
            }
            (Some(l * sigma_r), Some(s), Some(gap))
        }
        None => (None, None, None),
    };
    Ok(TightnessRow {
        pair: idx,
        n: sc.n,
        m: sc.m,
        p: sc.p,
        q: sc.q,
        r: sc.r,
        eta: sc.eta,
        b0: sc.b0,
        recovered: lambda.is_some(),
        lambda,
        d_r_xa,
        d1_pe,
        lambda_sigma_r,
        sqrt_lambda_sigma_r,
        gap,
    })
}

pub fn tightness_sweep(cfg: &TightnessConfig) -> Result<Vec<TightnessRow>> {
    let grid = cfg.grid()?;
    cfg.pairs
        .par_iter()
        .enumerate()
        .map(|(i, sc)| {
            let sc = SimScenario {
                seed: derive_seed(cfg.seed, &[sc.seed, i as u64]),
                ..sc.clone()
            };
            evaluate_pair(i, &sc, &grid)
        })
        .collect()
}

pub fn write_tightness<W: Write>(out: W, rows: &[TightnessRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
