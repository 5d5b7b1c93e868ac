//! The variable-threshold rank criterion
//!
//! ```text
//! σ̂_k² = ‖Y − (PY)_k‖² / (nm − λk),   k = 0, …, K_λ
//! ```
//!
//! and its closed-form minimizer `k̂ = #{k ≤ K_λ : d_k²(PY) ≥ λ σ̂_k²}`.
//!
//! Everything here works from a [`Spectrum`]: the squared singular values of
//! `PY` and the residual `‖Y − PY‖²`. One SVD feeds every `λ`, and each trace
//! costs O(N) via suffix sums.

use nalgebra::DMatrix;

use crate::error::{Result, RrrError};
use crate::matrix::{singular_values, svd_of, DataMatrix, ProjectionOp, SvdFactors};

/// Relative slack used when comparing criterion values for ties.
pub const TIE_SLACK: f64 = 1e-12;

/// Squared singular values of `PY` plus the dimensions the criterion needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    d_sq: Vec<f64>,
    tail: Vec<f64>,
    resid_sq: f64,
    n: usize,
    m: usize,
    q: usize,
}

impl Spectrum {
    /// Builds the spectrum from raw parts. `d_sq` must be nonincreasing and
    /// nonnegative with at most `q ∧ m` entries; missing entries are zeros.
    pub fn from_parts(d_sq: Vec<f64>, resid_sq: f64, n: usize, m: usize, q: usize) -> Result<Self> {
        let cap = q.min(m);
        if n == 0 || m == 0 {
            return Err(RrrError::ShapeError("n and m must be positive".into()));
        }
        if q > n {
            return Err(RrrError::ShapeError(format!("rank q = {q} exceeds n = {n}")));
        }
        if d_sq.len() > cap {
            return Err(RrrError::ShapeError(format!(
                "{} squared singular values for N = q ∧ m = {cap}",
                d_sq.len()
            )));
        }
        if d_sq.iter().any(|d| !d.is_finite() || *d < 0.0) || !resid_sq.is_finite() || resid_sq < 0.0 {
            return Err(RrrError::InvalidMatrix(
                "squared singular values and residual must be finite and nonnegative".into(),
            ));
        }
        if d_sq.windows(2).any(|w| w[0] < w[1]) {
            return Err(RrrError::InvalidMatrix(
                "squared singular values must be nonincreasing".into(),
            ));
        }
        let mut d_sq = d_sq;
        d_sq.resize(cap, 0.0);
        let mut tail = vec![0.0; cap + 1];
        for k in (0..cap).rev() {
            tail[k] = tail[k + 1] + d_sq[k];
        }
        Ok(Spectrum {
            d_sq,
            tail,
            resid_sq,
            n,
            m,
            q,
        })
    }

    /// Spectrum of `PY` for response `y` and projector `p`.
    pub fn from_data(y: &DataMatrix, p: &ProjectionOp) -> Result<Self> {
        let coords = p.coordinates(y)?;
        let resid = y.as_matrix() - p.lift(&coords);
        let d_sq = if coords.nrows() == 0 {
            vec![]
        } else {
            singular_values(&coords).iter().map(|d| d * d).collect()
        };
        Self::from_parts(d_sq, resid.norm_squared(), y.rows(), y.cols(), p.rank())
    }

    /// Spectrum of `Y` itself (the design is the identity, `q = n`).
    pub fn direct(y: &DataMatrix) -> Result<Self> {
        let d_sq = singular_values(y.as_matrix()).iter().map(|d| d * d).collect();
        Self::from_parts(d_sq, 0.0, y.rows(), y.cols(), y.rows())
    }

    /// Spectrum plus the SVD of the coordinates `UᵀY`, for callers that
    /// also need `(PY)_k`.
    pub fn with_factors(y: &DataMatrix, p: &ProjectionOp) -> Result<(Self, ProjectedFactors)> {
        let coords = p.coordinates(y)?;
        let resid = y.as_matrix() - p.lift(&coords);
        let factors = if coords.nrows() == 0 {
            SvdFactors {
                singular_values: vec![],
                left: DMatrix::zeros(0, 0),
                right: DMatrix::zeros(y.cols(), 0),
            }
        } else {
            svd_of(&coords)
        };
        let d_sq = factors.squared();
        let spec = Self::from_parts(d_sq, resid.norm_squared(), y.rows(), y.cols(), p.rank())?;
        Ok((
            spec,
            ProjectedFactors {
                basis: p.basis().clone(),
                coords: factors,
            },
        ))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `N = q ∧ m`.
    pub fn len(&self) -> usize {
        self.d_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_sq.is_empty()
    }

    pub fn nm(&self) -> f64 {
        (self.n * self.m) as f64
    }

    /// `d_k²(PY)` for `k ≥ 1`; zero beyond `N`.
    pub fn d_sq(&self, k: usize) -> f64 {
        assert!(k >= 1, "singular values are 1-indexed");
        self.d_sq.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn d_sq_all(&self) -> &[f64] {
        &self.d_sq
    }

    /// `‖Y − PY‖²`.
    pub fn resid_sq(&self) -> f64 {
        self.resid_sq
    }

    /// `‖Y − (PY)_k‖² = ‖Y − PY‖² + Σ_{j>k} d_j²(PY)`.
    pub fn residual_sq(&self, k: usize) -> f64 {
        self.resid_sq + self.tail[k.min(self.len())]
    }

    /// `‖Y‖²`.
    pub fn total_sq(&self) -> f64 {
        self.residual_sq(0)
    }

    /// `σ̂_k²` at penalty `lambda`. The denominator must be positive.
    pub fn sigma_sq(&self, k: usize, lambda: f64) -> f64 {
        let denom = self.nm() - lambda * k as f64;
        debug_assert!(denom > 0.0, "nonpositive denominator at k = {k}");
        self.residual_sq(k) / denom
    }

    /// Same spectrum for `c · Y`.
    pub fn scaled(&self, c: f64) -> Self {
        let c2 = c * c;
        Self::from_parts(
            self.d_sq.iter().map(|d| d * c2).collect(),
            self.resid_sq * c2,
            self.n,
            self.m,
            self.q,
        )
        .expect("scaling preserves the invariants")
    }
}

/// SVD of `UᵀY` together with the basis `U`, so that `(PY)_k = U (UᵀY)_k`.
#[derive(Debug, Clone)]
pub struct ProjectedFactors {
    basis: DMatrix<f64>,
    coords: SvdFactors,
}

impl ProjectedFactors {
    /// `(PY)_k`.
    pub fn truncate(&self, k: usize) -> Result<DataMatrix> {
        let n = self.basis.nrows();
        let m = self.coords.right.nrows();
        if k == 0 {
            return Ok(DataMatrix::zeros(n, m));
        }
        let low = self.coords.truncate(k)?;
        Ok(DataMatrix::from_trusted(&self.basis * low.as_matrix()))
    }
}

/// `K_λ = ⌊(nm − 1)/λ⌋ ∧ m ∧ q`.
pub fn k_cap(n: usize, m: usize, q: usize, lambda: f64) -> usize {
    assert!(lambda > 0.0, "lambda must be positive");
    let nm = (n * m) as f64;
    let by_lambda = ((nm - 1.0) / lambda).floor();
    let by_lambda = if by_lambda < 0.0 { 0 } else { by_lambda as usize };
    by_lambda.min(m).min(q)
}

/// `σ̂_k²` for `k = 0..=K_λ`.
pub fn criterion_trace(spec: &Spectrum, lambda: f64) -> Vec<f64> {
    let cap = k_cap(spec.n, spec.m, spec.q, lambda);
    (0..=cap).map(|k| spec.sigma_sq(k, lambda)).collect()
}

/// Smallest minimizer of `trace[i]` over `i ∈ lo..=hi`, treating values
/// within `TIE_SLACK · scale` of the minimum as ties.
pub(crate) fn smallest_argmin(values: &[(usize, f64)], scale: f64) -> Option<usize> {
    let min = values.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let slack = TIE_SLACK * scale;
    values.iter().find(|&&(_, v)| v <= min + slack).map(|&(k, _)| k)
}

/// Selected rank with the full criterion trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSelection {
    /// Smallest minimizer of the trace.
    pub k_hat: usize,
    /// `#{1 ≤ k ≤ K : d_k² ≥ λ σ̂_k²}`.
    pub closed_form: usize,
    /// `σ̂_k²` for `k = 0..=K`.
    pub sigma_sq_trace: Vec<f64>,
    /// `K_λ`.
    pub cap: usize,
    pub lambda: f64,
}

impl RankSelection {
    /// True when the closed-form count and the smallest argmin disagree,
    /// which happens only on inputs with exact ties such as noiseless data.
    pub fn degenerate_tie(&self) -> bool {
        self.k_hat != self.closed_form
    }
}

/// Closed-form count `#{1 ≤ k ≤ K : d_k²(PY) ≥ λ σ̂_k²}`.
pub fn closed_form_rank(spec: &Spectrum, lambda: f64) -> usize {
    let cap = k_cap(spec.n, spec.m, spec.q, lambda);
    (1..=cap)
        .filter(|&k| spec.d_sq(k) >= lambda * spec.sigma_sq(k, lambda))
        .count()
}

/// Minimizes the criterion over `0..=K_λ` at fixed `lambda`.
pub fn select_rank(spec: &Spectrum, lambda: f64) -> RankSelection {
    let trace = criterion_trace(spec, lambda);
    let cap = trace.len() - 1;
    let indexed: Vec<(usize, f64)> = trace.iter().copied().enumerate().collect();
    let k_hat = smallest_argmin(&indexed, trace[0]).unwrap_or(0);
    RankSelection {
        k_hat,
        closed_form: closed_form_rank(spec, lambda),
        sigma_sq_trace: trace,
        cap,
        lambda,
    }
}

/// `σ̂_r² = ‖Y − (PY)_r‖² / (nm − λr)`.
pub fn sigma_r_hat_sq(spec: &Spectrum, lambda: f64, r: usize) -> Result<f64> {
    let cap = k_cap(spec.n, spec.m, spec.q, lambda);
    if r > cap {
        return Err(RrrError::RankOutOfRange { rank: r, max: cap });
    }
    Ok(spec.sigma_sq(r, lambda))
}

/// Largest rank satisfying `r < δ/(1+δ) · nm/λ`, `r ≤ m`, `r ≤ q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleRank {
    pub rank: usize,
    /// `nm / (nm − λ·rank)`, at most `1 + δ`.
    pub rho_bound: f64,
}

pub fn max_admissible_rank(n: usize, m: usize, q: usize, lambda: f64, delta: f64) -> AdmissibleRank {
    assert!(lambda > 0.0 && delta > 0.0);
    let nm = (n * m) as f64;
    let bound = if delta.is_infinite() {
        nm / lambda
    } else {
        delta / (1.0 + delta) * nm / lambda
    };
    // strict inequality: largest integer below `bound`
    let strict = (bound.ceil() - 1.0).max(0.0) as usize;
    let rank = strict.min(m).min(q);
    AdmissibleRank {
        rank,
        rho_bound: nm / (nm - lambda * rank as f64),
    }
}

/// Penalty-level diagnostics for one `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub k_lambda: usize,
    /// `ρ = nm / (nm − λK_λ)`.
    pub rho: f64,
    pub max_admissible_rank: usize,
    pub sigma_r_hat_sq: Option<f64>,
}

pub fn diagnostics(spec: &Spectrum, lambda: f64, delta: f64, r: Option<usize>) -> DiagnosticsReport {
    let k_lambda = k_cap(spec.n, spec.m, spec.q, lambda);
    let nm = spec.nm();
    let admissible = max_admissible_rank(spec.n, spec.m, spec.q, lambda, delta);
    DiagnosticsReport {
        k_lambda,
        rho: nm / (nm - lambda * k_lambda as f64),
        max_admissible_rank: admissible.rank.min(k_lambda),
        sigma_r_hat_sq: r.and_then(|r| sigma_r_hat_sq(spec, lambda, r).ok()),
    }
}

/// Fit-error bounds evaluated where the mean `XA` and noise `E` are known.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// `‖(PY)_k̂ − XA‖²`.
    pub lhs: f64,
    /// `4 r d_1²(PE)`; the bound is asserted only when `k̂ = r`.
    pub rank_bound: f64,
    pub rank_bound_applies: bool,
    pub rank_bound_holds: bool,
    /// General oracle right-hand side for the given constant `C > 2`.
    pub general_bound: f64,
    /// Whether `λ ≥ C d_1²(PE) / σ̂²` with `σ̂² = ‖E‖²/(nm)`.
    pub general_event: bool,
    pub general_bound_holds: bool,
    pub rho: f64,
}

/// Evaluates both oracle inequalities for one replication.
///
/// `c` is the constant of the general inequality and must exceed 2.
#[allow(clippy::too_many_arguments)]
pub fn oracle_bounds(
    y: &DataMatrix,
    p: &ProjectionOp,
    xa: &DataMatrix,
    e: &DataMatrix,
    k_hat: usize,
    r: usize,
    lambda: f64,
    c: f64,
) -> Result<OracleReport> {
    if !(c > 2.0) {
        return Err(RrrError::ConfigError(format!(
            "oracle constant C must exceed 2, got {c}"
        )));
    }
    let (spec, factors) = Spectrum::with_factors(y, p)?;
    if k_hat > spec.len() {
        return Err(RrrError::RankOutOfRange {
            rank: k_hat,
            max: spec.len(),
        });
    }
    let fitted = factors.truncate(k_hat)?;
    let lhs = fitted.sub(xa)?.frobenius_sq();

    let pe = p.apply(e)?;
    let d1_pe_sq = pe.operator_norm().powi(2);
    let rank_bound = 4.0 * r as f64 * d1_pe_sq;
    let rank_bound_applies = k_hat == r;

    let nm = spec.nm();
    let cap = k_cap(spec.n(), spec.m(), spec.q(), lambda);
    let rho = nm / (nm - lambda * cap as f64);
    let sigma_sq = e.frobenius_sq() / nm;
    let xa_sq: Vec<f64> = singular_values(xa.as_matrix()).iter().map(|d| d * d).collect();
    let tail = |k: usize| xa_sq.iter().skip(k).sum::<f64>();
    let ratio = (c + 2.0) / (c - 2.0);
    let inner = (0..=cap)
        .map(|k| (ratio + 8.0 * (rho - 1.0)) * tail(k) + 3.0 * rho * lambda * sigma_sq * k as f64)
        .fold(f64::INFINITY, f64::min);
    let general_bound = ratio * inner;
    let general_event = lambda * sigma_sq >= c * d1_pe_sq;

    let slack = 1e-9 * (1.0 + lhs);
    Ok(OracleReport {
        lhs,
        rank_bound,
        rank_bound_applies,
        rank_bound_holds: lhs <= rank_bound + slack,
        general_bound,
        general_event,
        general_bound_holds: lhs <= general_bound + slack,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use crate::matrix::{projection, svd, DEFAULT_RANK_TOL};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DataMatrix {
        DataMatrix::new(DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))).unwrap()
    }

    #[test]
    fn k_cap_examples() {
        let lambda = 2.0 * (50f64.sqrt() + 30f64.sqrt()).powi(2);
        assert_relative_eq!(lambda, 314.919, epsilon = 1e-3);
        assert_eq!(k_cap(50, 50, 30, lambda), 7);
        assert_eq!(k_cap(10, 10, 10, 99.0), 1);
        assert_eq!(k_cap(10, 10, 10, 100.0), 0);
        assert_eq!(k_cap(150, 30, 20, 198.0), 20);
    }

    #[test]
    fn zero_response_selects_zero() {
        let spec = Spectrum::from_parts(vec![0.0; 3], 0.0, 6, 4, 3).unwrap();
        let sel = select_rank(&spec, 2.0);
        assert!(sel.sigma_sq_trace.iter().all(|&s| s == 0.0));
        assert_eq!(sel.k_hat, 0);
    }

    #[test]
    fn trace_matches_direct_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = gaussian(8, 3, &mut rng);
        let y = gaussian(8, 5, &mut rng);
        let p = projection(&x, DEFAULT_RANK_TOL).unwrap();
        let spec = Spectrum::from_data(&y, &p).unwrap();
        let lambda = 4.5;
        let trace = criterion_trace(&spec, lambda);
        // independent route: dense projector, fresh SVD, explicit truncation
        let xm = x.as_matrix();
        let dense_p = xm * (xm.tr_mul(xm)).try_inverse().unwrap() * xm.transpose();
        let py = DataMatrix::new(&dense_p * y.as_matrix()).unwrap();
        let f = svd(&py).unwrap();
        for (k, s) in trace.iter().enumerate() {
            let direct = y.sub(&f.truncate(k).unwrap()).unwrap().frobenius_sq() / (40.0 - lambda * k as f64);
            assert_relative_eq!(*s, direct, max_relative = 1e-10);
        }
        assert_relative_eq!(trace[0], y.frobenius_sq() / 40.0, max_relative = 1e-12);
    }

    #[test]
    fn noiseless_plateau_selects_true_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian(12, 6, &mut rng);
        let a = gaussian(6, 3, &mut rng).matmul(&gaussian(3, 8, &mut rng)).unwrap();
        let y = x.matmul(&a).unwrap();
        let p = projection(&x, DEFAULT_RANK_TOL).unwrap();
        let spec = Spectrum::from_data(&y, &p).unwrap();
        for lambda in [0.5, 3.0, 11.0] {
            let sel = select_rank(&spec, lambda);
            assert!(sel.cap >= 3);
            assert_eq!(sel.k_hat, 3, "lambda {lambda}");
            assert!(sigma_r_hat_sq(&spec, lambda, 3).unwrap() < 1e-20 * spec.total_sq());
        }
    }

    #[test]
    fn sigma_r_hat_edges() {
        let spec = Spectrum::from_parts(vec![9.0, 4.0, 1.0], 2.0, 5, 4, 3).unwrap();
        assert_relative_eq!(sigma_r_hat_sq(&spec, 2.0, 0).unwrap(), 16.0 / 20.0);
        assert_relative_eq!(sigma_r_hat_sq(&spec, 2.0, 2).unwrap(), 3.0 / 16.0);
        assert_eq!(
            sigma_r_hat_sq(&spec, 10.0, 2).unwrap_err(),
            RrrError::RankOutOfRange { rank: 2, max: 1 }
        );
    }

    #[test]
    fn admissible_rank_examples() {
        assert_eq!(max_admissible_rank(50, 50, 30, 315.0, 4.0).rank, 6);
        let r = max_admissible_rank(50, 50, 30, 315.0, 4.0);
        assert!(r.rho_bound <= 5.0);
        assert_eq!(max_admissible_rank(50, 50, 30, 315.0, 1e-6).rank, 0);
        // δ → ∞: r < nm/λ = 7.94 → 7
        assert_eq!(max_admissible_rank(50, 50, 30, 315.0, f64::INFINITY).rank, 7);
        assert_eq!(max_admissible_rank(50, 50, 30, 250.0, f64::INFINITY).rank, 9);
        assert_eq!(max_admissible_rank(50, 50, 3, 1.0, 1e9).rank, 3);
    }

    #[test]
    fn diagnostics_rho_at_least_one() {
        let spec = Spectrum::from_parts(vec![9.0, 4.0, 1.0], 2.0, 5, 4, 3).unwrap();
        let d = diagnostics(&spec, 3.0, 4.0, Some(1));
        assert_eq!(d.k_lambda, 3);
        assert!(d.rho >= 1.0);
        assert!(d.max_admissible_rank <= d.k_lambda);
        assert!(d.sigma_r_hat_sq.is_some());
    }

    #[test]
    fn rejects_bad_spectrum() {
        assert!(Spectrum::from_parts(vec![1.0, 2.0], 0.0, 4, 4, 2).is_err());
        assert!(Spectrum::from_parts(vec![1.0; 3], 0.0, 4, 2, 4).is_err());
        assert!(Spectrum::from_parts(vec![-1.0], 0.0, 4, 2, 1).is_err());
    }

    #[test]
    fn oracle_noise_free_and_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian(10, 4, &mut rng);
        let a = gaussian(4, 2, &mut rng).matmul(&gaussian(2, 6, &mut rng)).unwrap();
        let xa = x.matmul(&a).unwrap();
        let p = projection(&x, DEFAULT_RANK_TOL).unwrap();
        let zero = DataMatrix::zeros(10, 6);
        let rep = oracle_bounds(&xa, &p, &xa, &zero, 2, 2, 3.0, 3.0).unwrap();
        assert!(rep.lhs < 1e-18 * xa.frobenius_sq());
        assert!(rep.rank_bound_applies && rep.rank_bound_holds);

        let e = gaussian(10, 6, &mut rng);
        let rep = oracle_bounds(&e, &p, &zero, &e, 0, 0, 3.0, 3.0).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert!(oracle_bounds(&e, &p, &zero, &e, 0, 0, 3.0, 2.0).is_err());
    }
}
