//! Rank-selection methods as the experiment grid sees them.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{bsw_rank, kf_select, BswConfig, KfConfig};
use crate::criterion::{k_cap, select_rank, Spectrum};
use crate::error::{Result, RrrError};
use crate::moments::{GNormTable, SingularMoments};
use crate::selftune::{sstrs_spectrum, strs_db_spectrum, strs_spectrum, SelfTuneTrace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Fixed-`λ` criterion at `λ = 2(1+ε)(√m+√q)²`.
    Grs,
    Strs,
    Sstrs,
    StrsDb,
    Bsw(f64),
    Kf(f64),
}

impl Method {
    pub fn needs_moments(&self) -> bool {
        matches!(self, Method::Strs | Method::Bsw(_))
    }

    pub fn needs_g_norms(&self) -> bool {
        matches!(self, Method::Kf(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Grs => write!(f, "GRS"),
            Method::Strs => write!(f, "STRS"),
            Method::Sstrs => write!(f, "SSTRS"),
            Method::StrsDb => write!(f, "STRS-DB"),
            Method::Bsw(c) => write!(f, "BSW-{c}"),
            Method::Kf(c) => write!(f, "KF-{c}"),
        }
    }
}

impl FromStr for Method {
    type Err = RrrError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let constant = |rest: &str| {
            rest.parse::<f64>()
                .ok()
                .filter(|c| *c > 0.0)
                .ok_or_else(|| RrrError::ConfigError(format!("bad method constant in {s:?}")))
        };
        match s.to_ascii_uppercase().as_str() {
            "GRS" => Ok(Method::Grs),
            "STRS" | "STRS-MC" => Ok(Method::Strs),
            "SSTRS" => Ok(Method::Sstrs),
            "STRS-DB" | "DB" => Ok(Method::StrsDb),
            upper if upper.starts_with("BSW-") => Ok(Method::Bsw(constant(&s[4..])?)),
            upper if upper.starts_with("KF-") => Ok(Method::Kf(constant(&s[3..])?)),
            _ => Err(RrrError::ConfigError(format!("unknown method {s:?}"))),
        }
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Shared inputs for every method on one problem shape.
#[derive(Debug, Clone)]
pub struct MethodContext {
    pub eps: f64,
    pub moments: Option<SingularMoments>,
    pub g_norms: Option<GNormTable>,
}

/// `λ` used by the one-shot selector.
pub fn grs_lambda(m: usize, q: usize, eps: f64) -> f64 {
    2.0 * (1.0 + eps) * ((m as f64).sqrt() + (q as f64).sqrt()).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    /// `None` when the method is infeasible for this input (recorded as NA).
    pub rank: Option<usize>,
    pub lambda_start: Option<f64>,
    pub lambda_final: Option<f64>,
    pub steps: Option<usize>,
    /// `K_λ` at the starting penalty.
    pub k_cap: Option<usize>,
    pub trace: Option<SelfTuneTrace>,
    pub note: Option<String>,
}

impl MethodOutcome {
    fn na(note: String) -> Self {
        MethodOutcome {
            rank: None,
            lambda_start: None,
            lambda_final: None,
            steps: None,
            k_cap: None,
            trace: None,
            note: Some(note),
        }
    }

    fn from_trace(spec: &Spectrum, trace: SelfTuneTrace) -> Result<Self> {
        trace.check_invariants(spec.len())?;
        let lambda0 = trace.initial_lambda();
        Ok(MethodOutcome {
            rank: Some(trace.rank()),
            lambda_start: Some(lambda0),
            lambda_final: Some(trace.final_lambda()),
            steps: Some(trace.steps.len()),
            k_cap: Some(k_cap(spec.n(), spec.m(), spec.q(), lambda0)),
            trace: Some(trace),
            note: None,
        })
    }
}

/// Runs one method. Self-tuning traces that break their invariants are errors.
pub fn evaluate(method: Method, spec: &Spectrum, ctx: &MethodContext) -> Result<MethodOutcome> {
    let missing = |what: &str| RrrError::ConfigError(format!("{method} needs a {what} table"));
    match method {
        Method::Grs => {
            let lambda = grs_lambda(spec.m(), spec.q(), ctx.eps);
            let sel = select_rank(spec, lambda);
            Ok(MethodOutcome {
                rank: Some(sel.k_hat),
                lambda_start: Some(lambda),
                lambda_final: Some(lambda),
                steps: Some(1),
                k_cap: Some(sel.cap),
                trace: None,
                note: sel.degenerate_tie().then(|| "degenerate tie".to_string()),
            })
        }
        Method::Strs => {
            let moments = ctx.moments.as_ref().ok_or_else(|| missing("moments"))?;
            MethodOutcome::from_trace(spec, strs_spectrum(spec, ctx.eps, moments)?)
        }
        Method::Sstrs => MethodOutcome::from_trace(spec, sstrs_spectrum(spec, ctx.eps)?),
        Method::StrsDb => MethodOutcome::from_trace(spec, strs_db_spectrum(spec, ctx.eps)?),
        Method::Bsw(c) => {
            let cfg = BswConfig::new(c)?;
            match bsw_rank(spec, &cfg, ctx.moments.as_ref()) {
                Ok(rank) => Ok(MethodOutcome {
                    rank: Some(rank),
                    lambda_start: cfg.mu(spec, ctx.moments.as_ref()).ok(),
                    lambda_final: None,
                    steps: None,
                    k_cap: None,
                    trace: None,
                    note: None,
                }),
                Err(e @ RrrError::InfeasibleVarianceEstimate { .. }) => Ok(MethodOutcome::na(e.to_string())),
                Err(e) => Err(e),
            }
        }
        Method::Kf(c) => {
            let table = ctx.g_norms.clone().ok_or_else(|| missing("G-norm"))?;
            let cfg = KfConfig::new(c, table)?;
            match kf_select(spec, &cfg) {
                Ok(rank) => Ok(MethodOutcome {
                    rank: Some(rank),
                    lambda_start: None,
                    lambda_final: None,
                    steps: None,
                    k_cap: None,
                    trace: None,
                    note: None,
                }),
                Err(RrrError::NoAdmissibleRank) => Ok(MethodOutcome::na("no admissible rank".into())),
                Err(e) => Err(e),
            }
        }
    }
}
