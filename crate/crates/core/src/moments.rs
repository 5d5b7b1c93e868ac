//! Monte-Carlo tables of Gaussian singular-value moments.
//!
//! [`SingularMoments`] holds `S_j = E[d_j²(Z)]` for a q × m matrix `Z` of
//! i.i.d. standard normals; the self-tuning updates read it. [`GNormTable`]
//! holds `(E‖G‖_(2,k))²` with `‖G‖_(2,k)² = Σ_{i≤k} d_i²(G)` for the KF
//! comparator. Both are estimated from the same kind of draws and cached in
//! one CSV schema: `q,m,j,S_j,mc_draws,seed`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RrrError};
use crate::matrix::singular_values;
use crate::rng::{purpose, substream};

/// Default number of Monte-Carlo draws.
pub const DEFAULT_MC_DRAWS: usize = 500;

/// Environment variable overriding the cache location.
pub const CACHE_ENV: &str = "RRR_MOMENTS_CACHE";

/// `S_j = E[d_j²(Z)]`, `Z ∈ R^{q×m}` standard Gaussian, `j = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularMoments {
    q: usize,
    m: usize,
    values: Vec<f64>,
    mc_draws: usize,
    seed: u64,
}

impl SingularMoments {
    pub fn from_values(q: usize, m: usize, values: Vec<f64>, mc_draws: usize, seed: u64) -> Result<Self> {
        if values.len() != q.min(m) {
            return Err(RrrError::ShapeError(format!(
                "{} moments for a {q}x{m} table",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RrrError::InvalidMatrix("moments must be finite and nonnegative".into()));
        }
        Ok(SingularMoments {
            q,
            m,
            values,
            mc_draws,
            seed,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_values(&self) -> usize {
        self.values.len()
    }

    pub fn mc_draws(&self) -> usize {
        self.mc_draws
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `S_j` for `j ≥ 1`, with `S_j = 0` for `j > N`.
    pub fn s(&self, j: usize) -> f64 {
        assert!(j >= 1, "moments are 1-indexed");
        self.values.get(j - 1).copied().unwrap_or(0.0)
    }

    /// `Σ_{j=from}^{N} S_j`.
    pub fn tail_sum(&self, from: usize) -> f64 {
        self.values.iter().skip(from.saturating_sub(1)).sum()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn draw_gaussian(q: usize, m: usize, seed: u64, stream_path: &[u64]) -> DMatrix<f64> {
    let mut rng = substream(seed, stream_path);
    DMatrix::from_fn(q, m, |_, _| StandardNormal.sample(&mut rng))
}

/// Per-draw squared singular values, computed in parallel. Draw `i` uses its
/// own substream so the result does not depend on thread scheduling.
fn squared_spectra(q: usize, m: usize, mc_draws: usize, seed: u64, tag: u64) -> Vec<Vec<f64>> {
    (0..mc_draws)
        .into_par_iter()
        .map(|i| {
            let z = draw_gaussian(q, m, seed, &[purpose::MOMENTS, tag, q as u64, m as u64, i as u64]);
            singular_values(&z).into_iter().map(|d| d * d).collect()
        })
        .collect()
}

/// Estimates `S_j` by averaging `d_j²(Z)` over `mc_draws` Gaussian draws.
pub fn estimate_moments(q: usize, m: usize, mc_draws: usize, seed: u64) -> Result<SingularMoments> {
    if mc_draws == 0 {
        return Err(RrrError::ConfigError("mc_draws must be at least 1".into()));
    }
    if q == 0 || m == 0 {
        return Err(RrrError::ShapeError("moment table needs q, m ≥ 1".into()));
    }
    let n = q.min(m);
    let spectra = squared_spectra(q, m, mc_draws, seed, 0);
    let mut values = vec![0.0; n];
    for spectrum in &spectra {
        for (acc, v) in values.iter_mut().zip(spectrum) {
            *acc += v;
        }
    }
    for v in &mut values {
        *v /= mc_draws as f64;
    }
    SingularMoments::from_values(q, m, values, mc_draws, seed)
}

/// `(E‖G‖_(2,k))²` for `k = 1..=N`, `G ∈ R^{q×m}` standard Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GNormTable {
    q: usize,
    m: usize,
    values: Vec<f64>,
    mc_draws: usize,
    seed: u64,
}

impl GNormTable {
    pub fn from_values(q: usize, m: usize, values: Vec<f64>, mc_draws: usize, seed: u64) -> Result<Self> {
        if values.len() != q.min(m) {
            return Err(RrrError::ShapeError(format!(
                "{} entries for a {q}x{m} table",
                values.len()
            )));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(RrrError::InvalidMatrix(
                "G-norm table must be nondecreasing in k".into(),
            ));
        }
        Ok(GNormTable {
            q,
            m,
            values,
            mc_draws,
            seed,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mc_draws(&self) -> usize {
        self.mc_draws
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry for `k ≥ 1`; `k = 0` gives 0.
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Estimates `(E‖G‖_(2,k))²` as the squared MC mean of `√(Σ_{i≤k} d_i²(G))`.
pub fn estimate_g_norms(q: usize, m: usize, mc_draws: usize, seed: u64) -> Result<GNormTable> {
    if mc_draws == 0 {
        return Err(RrrError::ConfigError("mc_draws must be at least 1".into()));
    }
    let n = q.min(m);
    let spectra = squared_spectra(q, m, mc_draws, seed, 1);
    let mut means = vec![0.0; n];
    for spectrum in &spectra {
        let mut partial = 0.0;
        for (k, v) in spectrum.iter().enumerate() {
            partial += v;
            means[k] += partial.sqrt();
        }
    }
    let values = means.into_iter().map(|s| (s / mc_draws as f64).powi(2)).collect();
    GNormTable::from_values(q, m, values, mc_draws, seed)
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRow {
    q: usize,
    m: usize,
    j: usize,
    #[serde(rename = "S_j", serialize_with = "ser_f64_17", deserialize_with = "de_f64")]
    s_j: f64,
    mc_draws: usize,
    seed: u64,
}

fn ser_f64_17<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{x:.16e}"))
}

fn de_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let s = String::deserialize(d)?;
    s.trim().parse::<f64>().map_err(serde::de::Error::custom)
}

type TableKey = (usize, usize, usize, u64);

/// Writes tables as CSV rows `q,m,j,S_j,mc_draws,seed` (values at 17 significant digits).
pub fn write_table_csv(path: &Path, tables: &[(TableKey, Vec<f64>)]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    for ((q, m, draws, seed), values) in tables {
        for (i, v) in values.iter().enumerate() {
            w.serialize(CacheRow {
                q: *q,
                m: *m,
                j: i + 1,
                s_j: *v,
                mc_draws: *draws,
                seed: *seed,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads every table in a cache file, keyed by `(q, m, mc_draws, seed)`.
pub fn read_table_csv(path: &Path) -> Result<BTreeMap<TableKey, Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: BTreeMap<TableKey, Vec<(usize, f64)>> = BTreeMap::new();
    for row in r.deserialize() {
        let row: CacheRow = row?;
        out.entry((row.q, row.m, row.mc_draws, row.seed))
            .or_default()
            .push((row.j, row.s_j));
    }
    out.into_iter()
        .map(|(key, mut rows)| {
            rows.sort_by_key(|&(j, _)| j);
            let expected = key.0.min(key.1);
            if rows.len() != expected || rows.iter().enumerate().any(|(i, &(j, _))| j != i + 1) {
                return Err(RrrError::Io(format!(
                    "incomplete table for q={}, m={} in {}",
                    key.0,
                    key.1,
                    path.display()
                )));
            }
            Ok((key, rows.into_iter().map(|(_, v)| v).collect()))
        })
        .collect()
}

/// Persistent cache of moment tables.
///
/// Singular moments and G-norm tables live in sibling files
/// `<dir>/moments.csv` and `<dir>/gnorm.csv`.
#[derive(Debug, Clone)]
pub struct MomentsCache {
    dir: Option<PathBuf>,
}

impl MomentsCache {
    /// Cache rooted at `dir`.
    pub fn at(dir: impl Into<PathBuf>) -> Self {
        MomentsCache { dir: Some(dir.into()) }
    }

    /// No persistence; every lookup estimates afresh.
    pub fn disabled() -> Self {
        MomentsCache { dir: None }
    }

    /// `$RRR_MOMENTS_CACHE` if set, else `./.rrr-cache`.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::at(dir),
            _ => Self::at(".rrr-cache"),
        }
    }

    pub fn moments_path(&self) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join("moments.csv"))
    }

    pub fn gnorm_path(&self) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join("gnorm.csv"))
    }

    fn lookup(path: &Path, key: TableKey) -> Result<Option<Vec<f64>>> {
        if !path.exists() {
            return Ok(None);
        }
        Ok(read_table_csv(path)?.remove(&key))
    }

    fn store(path: &Path, key: TableKey, values: &[f64]) -> Result<()> {
        let mut all = if path.exists() {
            read_table_csv(path)?
        } else {
            BTreeMap::new()
        };
        all.insert(key, values.to_vec());
        let tables: Vec<_> = all.into_iter().collect();
        // write-then-rename so concurrent readers never see a partial file
        let tmp = path.with_extension(format!("csv.{}.tmp", std::process::id()));
        write_table_csv(&tmp, &tables)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Cached moments for `(q, m, mc_draws, seed)`, estimating on a miss.
    pub fn moments(&self, q: usize, m: usize, mc_draws: usize, seed: u64) -> Result<SingularMoments> {
        let key = (q, m, mc_draws, seed);
        if let Some(path) = self.moments_path() {
            if let Some(values) = Self::lookup(&path, key)? {
                return SingularMoments::from_values(q, m, values, mc_draws, seed);
            }
            let table = estimate_moments(q, m, mc_draws, seed)?;
            Self::store(&path, key, table.values())?;
            return Ok(table);
        }
        estimate_moments(q, m, mc_draws, seed)
    }

    /// Cached G-norm table for `(q, m, mc_draws, seed)`.
    pub fn g_norms(&self, q: usize, m: usize, mc_draws: usize, seed: u64) -> Result<GNormTable> {
        let key = (q, m, mc_draws, seed);
        if let Some(path) = self.gnorm_path() {
            if let Some(values) = Self::lookup(&path, key)? {
                return GNormTable::from_values(q, m, values, mc_draws, seed);
            }
            let table = estimate_g_norms(q, m, mc_draws, seed)?;
            Self::store(&path, key, table.values())?;
            return Ok(table);
        }
        estimate_g_norms(q, m, mc_draws, seed)
    }

    /// Every cached singular-moment table.
    pub fn list(&self) -> Result<Vec<SingularMoments>> {
        let Some(path) = self.moments_path() else {
            return Ok(vec![]);
        };
        if !path.exists() {
            return Ok(vec![]);
        }
        read_table_csv(&path)?
            .into_iter()
            .map(|((q, m, draws, seed), v)| SingularMoments::from_values(q, m, v, draws, seed))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_case_is_chi_square_mean() {
        let draws = 4000;
        let s = estimate_moments(1, 1, draws, 3).unwrap();
        assert!((s.s(1) - 1.0).abs() < 3.0 * 2f64.sqrt() / (draws as f64).sqrt());
    }

    #[test]
    fn trace_identity_and_ordering() {
        let draws = 400;
        let s = estimate_moments(5, 8, draws, 11).unwrap();
        assert_eq!(s.n_values(), 5);
        let tol = 3.0 * 40.0 / (draws as f64).sqrt();
        assert!((s.total() - 40.0).abs() < tol, "total {}", s.total());
        assert!(s.values().windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(s.s(6), 0.0);
        assert!((s.tail_sum(2) - (s.total() - s.s(1))).abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = estimate_moments(4, 6, 50, 9).unwrap();
        let b = estimate_moments(4, 6, 50, 9).unwrap();
        let c = estimate_moments(4, 6, 50, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn zero_draws_rejected() {
        assert!(estimate_moments(2, 2, 0, 1).is_err());
    }

    #[test]
    fn g_norms_nondecreasing_and_bounded_by_moments() {
        let g = estimate_g_norms(6, 9, 300, 4).unwrap();
        assert!(g.values().windows(2).all(|w| w[0] <= w[1]));
        // Jensen: (E‖G‖)² ≤ E‖G‖² = Σ_{i≤k} S_i
        let s = estimate_moments(6, 9, 300, 4).unwrap();
        let full: f64 = s.values().iter().sum();
        assert!(g.get(6) <= full * 1.05);
        assert_eq!(g.get(0), 0.0);
    }

    #[test]
    fn cache_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = MomentsCache::at(dir.path());
        let first = cache.moments(3, 7, 60, 5).unwrap();
        let path = cache.moments_path().unwrap();
        assert!(path.exists());
        let header = fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("q,m,j,S_j,mc_draws,seed\n"));
        let again = cache.moments(3, 7, 60, 5).unwrap();
        assert_eq!(first, again);
        cache.moments(2, 2, 60, 5).unwrap();
        assert_eq!(cache.list().unwrap().len(), 2);
        let g = cache.g_norms(3, 7, 60, 5).unwrap();
        assert_eq!(g, cache.g_norms(3, 7, 60, 5).unwrap());
    }
}
