//! Comparator rank selectors: the fixed-threshold rule with a plug-in noise
//! variance (BSW) and the self-normalized KF criterion.

use serde::{Deserialize, Serialize};

use crate::criterion::{smallest_argmin, Spectrum};
use crate::error::{Result, RrrError};
use crate::matrix::{DataMatrix, ProjectionOp};
use crate::moments::{GNormTable, SingularMoments};

/// `σ̃² = ‖Y − PY‖² / ((n − q) m)`.
pub fn sigma_tilde_sq(y: &DataMatrix, p: &ProjectionOp) -> Result<f64> {
    sigma_tilde_sq_spectrum(&Spectrum::from_data(y, p)?)
}

pub fn sigma_tilde_sq_spectrum(spec: &Spectrum) -> Result<f64> {
    if spec.n() <= spec.q() {
        return Err(RrrError::InfeasibleVarianceEstimate {
            n: spec.n(),
            q: spec.q(),
        });
    }
    Ok(spec.resid_sq() / ((spec.n() - spec.q()) * spec.m()) as f64)
}

/// `#{k : d_k²(PY) ≥ μ}`.
pub fn bsw_select(d_sq: &[f64], mu: f64) -> usize {
    assert!(mu > 0.0, "threshold must be positive");
    d_sq.iter().filter(|&&d| d >= mu).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMode {
    /// `μ = C · E[d_1²(Z)] · σ̃²` with the expectation from the moments table.
    McExpectedD1sq,
    /// `μ = C · (m + q) · σ̃²`.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BswConfig {
    pub c: f64,
    pub mu_mode: MuMode,
}

impl BswConfig {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(RrrError::ConfigError(format!("BSW constant must be positive, got {c}")));
        }
        Ok(BswConfig {
            c,
            mu_mode: MuMode::McExpectedD1sq,
        })
    }

    pub fn deterministic(c: f64) -> Result<Self> {
        Ok(BswConfig {
            mu_mode: MuMode::Deterministic,
            ..Self::new(c)?
        })
    }

    /// Threshold `μ` for the given spectrum.
    pub fn mu(&self, spec: &Spectrum, moments: Option<&SingularMoments>) -> Result<f64> {
        let sigma_sq = sigma_tilde_sq_spectrum(spec)?;
        let scale = match self.mu_mode {
            MuMode::McExpectedD1sq => {
                let s = moments
                    .ok_or_else(|| RrrError::ConfigError("BSW with MC threshold needs a moments table".into()))?;
                s.s(1)
            }
            MuMode::Deterministic => (spec.m() + spec.q()) as f64,
        };
        Ok(self.c * scale * sigma_sq)
    }
}

/// BSW rank for a spectrum. Fails when `σ̃²` is infeasible (`n = q`).
pub fn bsw_rank(spec: &Spectrum, cfg: &BswConfig, moments: Option<&SingularMoments>) -> Result<usize> {
    let mu = cfg.mu(spec, moments)?;
    if mu <= 0.0 {
        // σ̃² = 0: Y lies in col(X); every nonzero direction is signal
        return Ok(spec.d_sq_all().iter().filter(|&&d| d > 0.0).count());
    }
    Ok(bsw_select(spec.d_sq_all(), mu))
}

/// KF criterion configuration: constant `C` and the `(E‖G‖_(2,k))²` table.
#[derive(Debug, Clone, PartialEq)]
pub struct KfConfig {
    pub c: f64,
    pub g_norm_sq: GNormTable,
}

impl KfConfig {
    pub fn new(c: f64, g_norm_sq: GNormTable) -> Result<Self> {
        if !(c > 0.0) {
            return Err(RrrError::ConfigError(format!("KF constant must be positive, got {c}")));
        }
        Ok(KfConfig { c, g_norm_sq })
    }

    /// Ranks `k ∈ 0..=N` with `nm − 1 − C·g(k) ≥ 1`.
    pub fn admissible(&self, n: usize, m: usize) -> Vec<usize> {
        let nm = (n * m) as f64;
        (0..=self.g_norm_sq.len())
            .filter(|&k| nm - 1.0 - self.c * self.g_norm_sq.get(k) >= 1.0)
            .collect()
    }
}

/// Smallest minimizer of `‖Y − (PY)_k‖² / (nm − 1 − C(E‖G‖_(2,k))²)`.
pub fn kf_select(spec: &Spectrum, cfg: &KfConfig) -> Result<usize> {
    let table = &cfg.g_norm_sq;
    if table.len() < spec.len() {
        return Err(RrrError::ShapeError(format!(
            "G-norm table has {} entries, spectrum needs {}",
            table.len(),
            spec.len()
        )));
    }
    let nm = spec.nm();
    let values: Vec<(usize, f64)> = cfg
        .admissible(spec.n(), spec.m())
        .into_iter()
        .filter(|&k| k <= spec.len())
        .map(|k| (k, spec.residual_sq(k) / (nm - 1.0 - cfg.c * table.get(k))))
        .collect();
    if values.is_empty() {
        return Err(RrrError::NoAdmissibleRank);
    }
    smallest_argmin(&values, spec.total_sq() / nm).ok_or(RrrError::NoAdmissibleRank)
}
