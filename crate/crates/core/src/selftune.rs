//! Self-tuning rank selection.
//!
//! All three variants share one iteration: start from a conservative `λ_0`,
//! select `k_0` by minimizing the criterion, then repeatedly shrink `λ` using
//! the previously selected rank and re-minimize over `k ≥ k_t`, stopping once
//! the rank stops growing. They differ only in how `λ_{t+1}` is computed
//! from `k_t`:
//!
//! * [`Variant::Strs`] uses Monte-Carlo singular moments `S_j`;
//! * [`Variant::Sstrs`] uses the closed forms `2(1+ε)(m∨q)` and `(m∧q)/2`;
//! * [`Variant::Db`] uses deterministic bounds on the `S_j`.
//!
//! Only one SVD is needed per data set; every step reuses the [`Spectrum`].

use serde::{Deserialize, Serialize};

use crate::criterion::{smallest_argmin, Spectrum};
use crate::error::{Result, RrrError};
use crate::matrix::{DataMatrix, ProjectionOp};
use crate::moments::SingularMoments;

/// Default `ε`.
pub const DEFAULT_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "STRS")]
    Strs,
    #[serde(rename = "SSTRS")]
    Sstrs,
    #[serde(rename = "STRS-DB")]
    Db,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Strs => "STRS",
            Variant::Sstrs => "SSTRS",
            Variant::Db => "STRS-DB",
        }
    }
}

/// One iteration of a self-tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub lambda: f64,
    /// `⌊nm/λ⌋ ∧ N`.
    pub cap: usize,
    /// `R_{t-1}`, the residual-mass term that produced this `λ` (none at `t = 0`).
    pub r_term: Option<f64>,
    /// `U_{t-1}`, the leading-moment term that produced this `λ` (none at `t = 0`).
    pub u_term: Option<f64>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTuneTrace {
    pub variant: Variant,
    pub epsilon: f64,
    pub steps: Vec<TraceStep>,
    pub converged: bool,
}

impl SelfTuneTrace {
    pub fn rank(&self) -> usize {
        self.steps.last().map_or(0, |s| s.k)
    }

    pub fn initial_lambda(&self) -> f64 {
        self.steps[0].lambda
    }

    pub fn final_lambda(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.lambda)
    }

    /// Checks monotonicity, the stop rule and the step bound against `N`.
    ///
    /// An SSTRS trace may end on a step whose `λ` did not decrease, provided
    /// that step repeats the rank.
    pub fn check_invariants(&self, n_max: usize) -> Result<()> {
        let steps = &self.steps;
        if steps.is_empty() {
            return Err(RrrError::TraceViolation("empty trace".into()));
        }
        let last_t = steps.len() - 1;
        for w in steps.windows(2) {
            let exempt = self.variant == Variant::Sstrs && w[1].t == last_t && w[1].k == w[0].k;
            if !(w[1].lambda < w[0].lambda) && !exempt {
                return Err(RrrError::TraceViolation(format!(
                    "lambda not strictly decreasing at t = {}: {} -> {}",
                    w[1].t, w[0].lambda, w[1].lambda
                )));
            }
            if w[1].k < w[0].k {
                return Err(RrrError::TraceViolation(format!(
                    "rank decreased at t = {}: {} -> {}",
                    w[1].t, w[0].k, w[1].k
                )));
            }
        }
        let last = steps.last().unwrap();
        let stopped = if steps.len() == 1 {
            last.k == 0
        } else {
            steps[steps.len() - 2].k == last.k
        };
        if self.converged && !stopped {
            return Err(RrrError::TraceViolation("terminal step did not repeat the rank".into()));
        }
        if steps.len() > n_max + 1 {
            return Err(RrrError::TraceViolation(format!(
                "{} steps exceed N + 1 = {}",
                steps.len(),
                n_max + 1
            )));
        }
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(RrrError::ConfigError(format!("epsilon must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

/// `λ` update rule of one variant.
trait Schedule {
    fn initial(&self) -> f64;
    /// `(λ_{t+1}, R_t, U_t)` given `k_t ≥ 1`.
    fn update(&self, k: usize) -> (f64, Option<f64>, Option<f64>);
}

struct McSchedule<'a> {
    n: usize,
    m: usize,
    q: usize,
    eps: f64,
    moments: &'a SingularMoments,
}

impl Schedule for McSchedule<'_> {
    fn initial(&self) -> f64 {
        2.0 * (1.0 + self.eps) * self.moments.s(1)
    }

    fn update(&self, k: usize) -> (f64, Option<f64>, Option<f64>) {
        let s = self.moments;
        let r_term = ((self.n - self.q) * self.m) as f64 + s.tail_sum(2 * k + 1);
        let u_term = s.s(1).max(s.s(2 * k + 1) + s.s(2 * k + 2));
        let nm = (self.n * self.m) as f64;
        let lambda = nm / ((1.0 - self.eps) * r_term / u_term + k as f64);
        (lambda, Some(r_term), Some(u_term))
    }
}

struct SimplifiedSchedule {
    n: usize,
    m: usize,
    q: usize,
    eps: f64,
}

impl Schedule for SimplifiedSchedule {
    fn initial(&self) -> f64 {
        2.0 * (1.0 + self.eps) * self.m.max(self.q) as f64
    }

    fn update(&self, k: usize) -> (f64, Option<f64>, Option<f64>) {
        let nm = (self.n * self.m) as f64;
        let bracket = (self.m.min(self.q) as f64 / 2.0 - k as f64).max(0.0);
        let lambda = nm / ((1.0 - self.eps) * bracket + k as f64);
        (lambda, Some(bracket), None)
    }
}

struct DbSchedule {
    n: usize,
    m: usize,
    q: usize,
    eps: f64,
}

impl DbSchedule {
    fn edge(&self) -> f64 {
        ((self.m as f64).sqrt() + (self.q as f64).sqrt()).powi(2)
    }
}

impl Schedule for DbSchedule {
    fn initial(&self) -> f64 {
        2.0 * (1.0 + self.eps) * self.edge()
    }

    fn update(&self, k: usize) -> (f64, Option<f64>, Option<f64>) {
        let (n, m, q) = (self.n, self.m, self.q);
        let nm = (n * m) as f64;
        let big = m.max(q) as f64;
        let small = m.min(q);
        let upper = |j: usize| (big.sqrt() + (small as f64 - j as f64 + 1.0).max(0.0).sqrt()).powi(2);
        let resid_mass = ((n - q) * m) as f64;
        if 2 * k >= small {
            let u_term = self.edge() + 1.0;
            let lambda = nm / ((1.0 - self.eps) * resid_mass / u_term + k as f64);
            return (lambda, Some(resid_mass), Some(u_term));
        }
        let head: f64 = (1..=2 * k).map(upper).sum();
        let lower_tail: f64 = (2 * k + 1..=small)
            .map(|j| (big.sqrt() - (j as f64).sqrt()).powi(2))
            .sum();
        let r_term = (nm - head - 2.0 * k as f64).max(resid_mass + lower_tail);
        let u_term = (self.edge() + 1.0).max(upper(2 * k + 1) + upper(2 * k + 2) + 2.0);
        let lambda = nm / ((1.0 - self.eps) * r_term / u_term + k as f64);
        (lambda, Some(r_term), Some(u_term))
    }
}

/// `⌊nm/λ⌋ ∧ N`.
fn step_cap(spec: &Spectrum, lambda: f64) -> usize {
    let by_lambda = (spec.nm() / lambda).floor();
    let by_lambda = if by_lambda < 0.0 { 0 } else { by_lambda as usize };
    by_lambda.min(spec.len())
}

/// Smallest minimizer over `lo..=cap`, keeping only `k` with `nm − λk ≥ 1`.
/// Falls back to `lo` when the guard leaves nothing.
fn restricted_argmin(spec: &Spectrum, lambda: f64, lo: usize, cap: usize) -> usize {
    let nm = spec.nm();
    let values: Vec<(usize, f64)> = (lo..=cap.max(lo))
        .filter(|&k| nm - lambda * k as f64 >= 1.0)
        .map(|k| (k, spec.sigma_sq(k, lambda)))
        .collect();
    smallest_argmin(&values, spec.total_sq() / nm).unwrap_or(lo)
}

fn run(spec: &Spectrum, schedule: &dyn Schedule, variant: Variant, eps: f64) -> SelfTuneTrace {
    let lambda0 = schedule.initial();
    let cap0 = step_cap(spec, lambda0);
    let k0 = restricted_argmin(spec, lambda0, 0, cap0);
    let mut steps = vec![TraceStep {
        t: 0,
        lambda: lambda0,
        cap: cap0,
        r_term: None,
        u_term: None,
        k: k0,
    }];
    if k0 == 0 {
        return SelfTuneTrace {
            variant,
            epsilon: eps,
            steps,
            converged: true,
        };
    }
    let mut k = k0;
    let mut converged = false;
    // k grows by at least one per non-terminal step and never exceeds N
    while steps.len() <= spec.len() {
        let (lambda, r_term, u_term) = schedule.update(k);
        let cap = step_cap(spec, lambda);
        let next = restricted_argmin(spec, lambda, k, cap);
        steps.push(TraceStep {
            t: steps.len(),
            lambda,
            cap,
            r_term,
            u_term,
            k: next,
        });
        if next == k {
            converged = true;
            break;
        }
        k = next;
    }
    SelfTuneTrace {
        variant,
        epsilon: eps,
        steps,
        converged,
    }
}

/// Monte-Carlo self-tuning on a precomputed spectrum.
pub fn strs_spectrum(spec: &Spectrum, eps: f64, moments: &SingularMoments) -> Result<SelfTuneTrace> {
    check_eps(eps)?;
    if moments.q() != spec.q() || moments.m() != spec.m() {
        return Err(RrrError::ShapeError(format!(
            "moments are for {}x{}, problem has q = {}, m = {}",
            moments.q(),
            moments.m(),
            spec.q(),
            spec.m()
        )));
    }
    let schedule = McSchedule {
        n: spec.n(),
        m: spec.m(),
        q: spec.q(),
        eps,
        moments,
    };
    Ok(run(spec, &schedule, Variant::Strs, eps))
}

/// Monte-Carlo self-tuning rank selection for `Y` with projector `P`.
pub fn strs(y: &DataMatrix, p: &ProjectionOp, eps: f64, moments: &SingularMoments) -> Result<SelfTuneTrace> {
    strs_spectrum(&Spectrum::from_data(y, p)?, eps, moments)
}

/// Simplified self-tuning on a precomputed spectrum; `q` is the spectrum's rank.
pub fn sstrs_spectrum(spec: &Spectrum, eps: f64) -> Result<SelfTuneTrace> {
    check_eps(eps)?;
    let schedule = SimplifiedSchedule {
        n: spec.n(),
        m: spec.m(),
        q: spec.q(),
        eps,
    };
    Ok(run(spec, &schedule, Variant::Sstrs, eps))
}

/// Simplified self-tuning applied to `Y` directly (model `Y = A + E`, `q = n`).
pub fn sstrs(y: &DataMatrix, eps: f64) -> Result<SelfTuneTrace> {
    sstrs_spectrum(&Spectrum::direct(y)?, eps)
}

/// Simplified self-tuning for `Y = XA + E`, criterion on `(PY)_k`.
pub fn sstrs_projected(y: &DataMatrix, p: &ProjectionOp, eps: f64) -> Result<SelfTuneTrace> {
    sstrs_spectrum(&Spectrum::from_data(y, p)?, eps)
}

/// Deterministic-bounds self-tuning on a precomputed spectrum.
pub fn strs_db_spectrum(spec: &Spectrum, eps: f64) -> Result<SelfTuneTrace> {
    check_eps(eps)?;
    let schedule = DbSchedule {
        n: spec.n(),
        m: spec.m(),
        q: spec.q(),
        eps,
    };
    Ok(run(spec, &schedule, Variant::Db, eps))
}

pub fn strs_db(y: &DataMatrix, p: &ProjectionOp, eps: f64) -> Result<SelfTuneTrace> {
    strs_db_spectrum(&Spectrum::from_data(y, p)?, eps)
}

/// `λ̂_0 = 2(1+ε)S_1`.
pub fn strs_initial_lambda(moments: &SingularMoments, eps: f64) -> f64 {
    2.0 * (1.0 + eps) * moments.s(1)
}

/// `λ` produced by the Monte-Carlo update from rank `k ≥ 1`.
pub fn strs_update_lambda(n: usize, m: usize, q: usize, eps: f64, moments: &SingularMoments, k: usize) -> f64 {
    McSchedule { n, m, q, eps, moments }.update(k).0
}

/// `λ` produced by the simplified update from rank `k ≥ 1`.
pub fn sstrs_update_lambda(n: usize, m: usize, q: usize, eps: f64, k: usize) -> f64 {
    SimplifiedSchedule { n, m, q, eps }.update(k).0
}

/// `λ̃_0 = 2(1+ε)(√m+√q)²`.
pub fn db_initial_lambda(m: usize, q: usize, eps: f64) -> f64 {
    DbSchedule { n: q, m, q, eps }.initial()
}

/// `λ` produced by the deterministic-bounds update from rank `k ≥ 1`.
pub fn db_update_lambda(n: usize, m: usize, q: usize, eps: f64, k: usize) -> f64 {
    DbSchedule { n, m, q, eps }.update(k).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::estimate_moments;
    use approx::assert_relative_eq;

    fn flat_spectrum(n: usize, m: usize, q: usize) -> Spectrum {
        Spectrum::from_parts(vec![0.0; q.min(m)], 0.0, n, m, q).unwrap()
    }

    #[test]
    fn zero_response_stops_immediately() {
        let spec = flat_spectrum(30, 10, 8);
        let moments = estimate_moments(8, 10, 50, 1).unwrap();
        for trace in [
            strs_spectrum(&spec, 0.05, &moments).unwrap(),
            sstrs_spectrum(&spec, 0.05).unwrap(),
            strs_db_spectrum(&spec, 0.05).unwrap(),
        ] {
            assert_eq!(trace.steps.len(), 1);
            assert_eq!(trace.rank(), 0);
            assert!(trace.converged);
            trace.check_invariants(8).unwrap();
        }
    }

    #[test]
    fn initial_lambdas() {
        let spec = flat_spectrum(600, 500, 500);
        assert_relative_eq!(
            sstrs_spectrum(&spec, 0.1).unwrap().initial_lambda(),
            1100.0,
            max_relative = 1e-12
        );
        let expected = 2.0 * 1.1 * (30f64.sqrt() + 20f64.sqrt()).powi(2);
        assert_relative_eq!(db_initial_lambda(30, 20, 0.1), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 217.78, max_relative = 1e-4);
    }

    #[test]
    fn moments_shape_is_checked() {
        let spec = flat_spectrum(30, 10, 8);
        let moments = estimate_moments(10, 8, 10, 1).unwrap();
        assert!(matches!(
            strs_spectrum(&spec, 0.05, &moments),
            Err(RrrError::ShapeError(_))
        ));
    }

    #[test]
    fn epsilon_is_validated() {
        let spec = flat_spectrum(30, 10, 8);
        assert!(sstrs_spectrum(&spec, 1.0).is_err());
        assert!(sstrs_spectrum(&spec, -0.1).is_err());
    }

    #[test]
    fn updates_decrease_in_k() {
        let moments = estimate_moments(20, 30, 200, 2).unwrap();
        let mut prev = strs_initial_lambda(&moments, 0.05);
        for k in 1..=20 {
            let l = strs_update_lambda(150, 30, 20, 0.05, &moments, k);
            assert!(l < prev, "k = {k}");
            prev = l;
        }
        let mut prev = db_initial_lambda(30, 20, 0.05);
        for k in 1..=20 {
            let l = db_update_lambda(150, 30, 20, 0.05, k);
            assert!(l <= prev, "k = {k}");
            prev = l;
        }
    }

    #[test]
    fn sstrs_bracket_can_vanish() {
        // 2k ≥ m ∧ q: λ = nm / k
        assert_relative_eq!(sstrs_update_lambda(40, 10, 40, 0.05, 5), 80.0);
    }

    #[test]
    fn strong_signal_walks_up_to_true_rank() {
        // five dominant singular values, flat noise floor
        let mut d = vec![1e6, 9e5, 8e5, 7e5, 6e5];
        d.extend(std::iter::repeat_n(40.0, 15));
        let resid = 130.0 * 30.0;
        let spec = Spectrum::from_parts(d, resid, 150, 30, 20).unwrap();
        let moments = estimate_moments(20, 30, 200, 3).unwrap();
        let trace = strs_spectrum(&spec, 0.05, &moments).unwrap();
        trace.check_invariants(20).unwrap();
        assert_eq!(trace.rank(), 5);
        let db = strs_db_spectrum(&spec, 0.05).unwrap();
        db.check_invariants(20).unwrap();
        assert_eq!(db.rank(), 5);
    }

    #[test]
    fn sstrs_terminal_step_may_keep_lambda() {
        // n = q = 500, m = 80, one spike: λ₁ = 40000 / (0.95·39 + 1) > λ₀ = 1050
        let mut d = vec![1e6];
        d.extend(std::iter::repeat_n(400.0, 79));
        let spec = Spectrum::from_parts(d, 0.0, 500, 80, 500).unwrap();
        let trace = sstrs_spectrum(&spec, 0.05).unwrap();
        assert_eq!(trace.steps.len(), 2);
        assert!(trace.steps[1].lambda > trace.steps[0].lambda);
        assert_eq!(trace.rank(), 1);
        trace.check_invariants(80).unwrap();

        let mut bad = trace.clone();
        bad.variant = Variant::Strs;
        assert!(bad.check_invariants(80).is_err());
        bad.variant = Variant::Sstrs;
        bad.steps[1].k = 2;
        assert!(bad.check_invariants(80).is_err());
    }
}
