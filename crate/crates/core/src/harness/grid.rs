//! Replicated simulation grids: scenarios × ranks × `b₀` × replications × methods.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::method::{evaluate, parse_methods, Method, MethodContext, MethodOutcome};
use super::record::{ReplicationRecord, SCHEMA_VERSION};
use crate::criterion::{ProjectedFactors, Spectrum};
use crate::error::{Result, RrrError};
use crate::matrix::{numerical_rank, DataMatrix, DEFAULT_RANK_TOL};
use crate::moments::{MomentsCache, SingularMoments, DEFAULT_MC_DRAWS};
use crate::rng::derive_seed;
use crate::selftune::DEFAULT_EPS;
use crate::sim::{expected_d1_pe, DesignData, Instance, SimScenario};

fn default_reps() -> usize {
    200
}
fn default_eps() -> f64 {
    DEFAULT_EPS
}
fn default_mc_draws() -> usize {
    DEFAULT_MC_DRAWS
}
fn default_snr_draws() -> usize {
    100
}
fn default_true() -> bool {
    true
}

/// One scenario swept over ranks and signal strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSetting {
    pub id: String,
    /// Base scenario; `r` and `b0` are overridden by the sweep. Its `seed`
    /// is combined with the grid seed, so settings sharing a seed share
    /// their design.
    pub scenario: SimScenario,
    pub ranks: Vec<usize>,
    /// `b₀` values; empty means `scenario.b0`.
    #[serde(default)]
    pub b0: Vec<f64>,
    /// Rescale `b₀` per rank so that the SNR equals this value.
    #[serde(default)]
    pub target_snr: Option<f64>,
    /// Methods for this setting; defaults to the grid-wide list.
    #[serde(default)]
    pub methods: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub name: String,
    pub settings: Vec<GridSetting>,
    pub methods: Vec<String>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
    /// Draws for the SNR denominator `E[d_1(PE)]`.
    #[serde(default = "default_snr_draws")]
    pub snr_draws: usize,
    /// Compute fit and prediction errors for every record.
    #[serde(default = "default_true")]
    pub fit_errors: bool,
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(RrrError::ConfigError(m));
        if self.settings.is_empty() {
            return fail("grid has no settings".into());
        }
        if self.reps == 0 || self.mc_draws == 0 || self.snr_draws == 0 {
            return fail("reps, mc_draws and snr_draws must be positive".into());
        }
        if !(0.0..1.0).contains(&self.eps) {
            return fail(format!("eps must lie in [0, 1), got {}", self.eps));
        }
        let mut ids: Vec<&str> = self.settings.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return fail("setting ids must be unique".into());
        }
        for s in &self.settings {
            s.scenario.validate()?;
            let cap = s.scenario.n_max();
            if let Some(&r) = s.ranks.iter().find(|&&r| r > cap) {
                return fail(format!("setting {}: rank {r} exceeds q ∧ m = {cap}", s.id));
            }
            if s.ranks.is_empty() {
                return fail(format!("setting {} has no ranks", s.id));
            }
            if s.b0.iter().any(|b| !(*b > 0.0)) {
                return fail(format!("setting {}: b0 values must be positive", s.id));
            }
            if s.target_snr.is_some_and(|t| !(t > 0.0)) {
                return fail(format!("setting {}: target_snr must be positive", s.id));
            }
            parse_methods(&s.methods.as_ref().unwrap_or(&self.methods).join(","))?;
        }
        if self.methods.is_empty() && self.settings.iter().any(|s| s.methods.is_none()) {
            return fail("no methods given".into());
        }
        Ok(())
    }

    fn setting_methods(&self, s: &GridSetting) -> Result<Vec<Method>> {
        parse_methods(&s.methods.as_ref().unwrap_or(&self.methods).join(","))
    }

    /// Replaces every method list, including per-setting overrides.
    pub fn override_methods(&mut self, methods: Vec<String>) {
        self.methods = methods;
        for s in &mut self.settings {
            s.methods = None;
        }
    }
}

/// Fitted mean and error measures for a selected rank.
#[derive(Debug, Clone, PartialEq)]
pub struct FitErrors {
    pub fit_err: f64,
    pub pred_err: Option<f64>,
}

/// `X Â = (PY)_k`.
pub fn fit_mean(factors: &ProjectedFactors, k: usize) -> Result<DataMatrix> {
    factors.truncate(k)
}

/// `X⁺` when `XᵀX` is invertible.
pub fn design_pinv(x: &DataMatrix) -> Result<DMatrix<f64>> {
    if numerical_rank(x, DEFAULT_RANK_TOL) < x.cols() {
        return Err(RrrError::NotAvailable(
            "coefficient estimate needs an invertible XᵀX".into(),
        ));
    }
    x.as_matrix()
        .clone()
        .pseudo_inverse(0.0)
        .map_err(|e| RrrError::InvalidMatrix(e.to_string()))
}

/// `‖X Â − XA‖/√(nm)` and, given `X⁺`, `‖Â − A‖/√(pm)` with `Â = X⁺ X Â`.
pub fn fit_errors(
    fitted: &DataMatrix,
    xa: &DataMatrix,
    a: &DataMatrix,
    pinv: Option<&DMatrix<f64>>,
) -> Result<FitErrors> {
    let (n, m) = (fitted.rows(), fitted.cols());
    let fit_err = fitted.sub(xa)?.frobenius() / ((n * m) as f64).sqrt();
    let pred_err = match pinv {
        Some(pinv) => {
            let a_hat = pinv * fitted.as_matrix();
            let p = a.rows();
            Some((a_hat - a.as_matrix()).norm() / ((p * m) as f64).sqrt())
        }
        None => None,
    };
    Ok(FitErrors { fit_err, pred_err })
}

/// Everything known about one replication, passed to inspection hooks.
pub struct Replication<'a> {
    pub setting: &'a str,
    pub instance: &'a Instance,
    pub rep: u64,
    pub y: &'a DataMatrix,
    pub e: &'a DataMatrix,
    pub spectrum: &'a Spectrum,
    pub snr: Option<f64>,
    pub eps: f64,
    pub moments: Option<&'a SingularMoments>,
    pub outcomes: &'a [(Method, MethodOutcome)],
}

struct Prepared {
    id: String,
    methods: Vec<Method>,
    ctx: MethodContext,
    pinv: Option<DMatrix<f64>>,
    cells: Vec<Cell>,
}

struct Cell {
    instance: Instance,
    b0: f64,
    snr: Option<f64>,
}

fn prepare(cfg: &GridConfig, setting: &GridSetting, cache: &MomentsCache) -> Result<Prepared> {
    let methods = cfg.setting_methods(setting)?;
    let mut base = setting.scenario.clone();
    base.seed = derive_seed(cfg.seed, &[base.seed]);
    let design = DesignData::generate(&base)?;
    let (q, m) = (base.q, base.m);
    let moments_seed = derive_seed(cfg.seed, &[u64::MAX]);
    let moments = if methods.iter().any(Method::needs_moments) {
        Some(cache.moments(q, m, cfg.mc_draws, moments_seed)?)
    } else {
        None
    };
    let g_norms = if methods.iter().any(Method::needs_g_norms) {
        Some(cache.g_norms(q, m, cfg.mc_draws, moments_seed)?)
    } else {
        None
    };
    let needs_snr = setting.ranks.iter().any(|&r| r > 0);
    let noise = if needs_snr {
        Some(expected_d1_pe(&base, &design.p, cfg.snr_draws)?)
    } else {
        None
    };
    let pinv = if cfg.fit_errors && !base.high_dimensional() && !base.identity_design {
        Some(design_pinv(&design.x)?)
    } else {
        None
    };
    let b0s = if setting.b0.is_empty() {
        vec![base.b0]
    } else {
        setting.b0.clone()
    };
    let mut cells = Vec::new();
    for &b0 in &b0s {
        for &r in &setting.ranks {
            let sc = SimScenario { r, b0, ..base.clone() };
            let mut instance = Instance::on_design(&sc, &design)?;
            let snr_of = |inst: &Instance| noise.filter(|_| r > 0).map(|d| inst.d_r() / d);
            if let (Some(target), Some(snr)) = (setting.target_snr, snr_of(&instance)) {
                if snr > 0.0 {
                    instance = Instance::on_design(&sc.with_b0(b0 * target / snr), &design)?;
                }
            }
            let snr = snr_of(&instance);
            cells.push(Cell { instance, b0, snr });
        }
    }
    Ok(Prepared {
        id: setting.id.clone(),
        methods,
        ctx: MethodContext {
            eps: cfg.eps,
            moments,
            g_norms,
        },
        pinv,
        cells,
    })
}

fn run_replication<F>(
    cfg: &GridConfig,
    prep: &Prepared,
    cell: &Cell,
    rep: u64,
    inspect: &F,
) -> Result<Vec<ReplicationRecord>>
where
    F: Fn(&Replication) -> Result<()> + Sync,
{
    let inst = &cell.instance;
    let (y, e) = inst.replicate(rep)?;
    let (spectrum, factors) = if cfg.fit_errors {
        let (s, f) = Spectrum::with_factors(&y, &inst.p)?;
        (s, Some(f))
    } else if inst.scenario.identity_design {
        (Spectrum::direct(&y)?, None)
    } else {
        (Spectrum::from_data(&y, &inst.p)?, None)
    };
    let mut outcomes = Vec::with_capacity(prep.methods.len());
    for &method in &prep.methods {
        let out = evaluate(method, &spectrum, &prep.ctx).map_err(|err| match err {
            RrrError::TraceViolation(msg) => {
                RrrError::TraceViolation(format!("{} r={} rep={rep} {method}: {msg}", prep.id, inst.scenario.r))
            }
            other => other,
        })?;
        outcomes.push((method, out));
    }
    inspect(&Replication {
        setting: &prep.id,
        instance: inst,
        rep,
        y: &y,
        e: &e,
        spectrum: &spectrum,
        snr: cell.snr,
        eps: cfg.eps,
        moments: prep.ctx.moments.as_ref(),
        outcomes: &outcomes,
    })?;
    outcomes
        .into_iter()
        .map(|(method, out)| {
            let errs = match (&factors, out.rank) {
                (Some(f), Some(k)) => Some(fit_errors(&fit_mean(f, k)?, &inst.xa, &inst.a, prep.pinv.as_ref())?),
                _ => None,
            };
            Ok(ReplicationRecord {
                schema_version: SCHEMA_VERSION,
                experiment: cfg.name.clone(),
                setting: prep.id.clone(),
                b0: cell.b0,
                true_rank: inst.scenario.r,
                rep,
                method: method.to_string(),
                selected: out.rank,
                snr: cell.snr,
                fit_err: errs.as_ref().map(|e| e.fit_err),
                pred_err: errs.and_then(|e| e.pred_err),
                lambda_start: out.lambda_start,
                lambda_final: out.lambda_final,
                steps: out.steps,
                k_cap: out.k_cap,
                note: out.note,
            })
        })
        .collect()
}

/// Runs the grid and returns records in canonical order.
pub fn run_grid(cfg: &GridConfig, cache: &MomentsCache) -> Result<Vec<ReplicationRecord>> {
    run_grid_inspect(cfg, cache, |_| Ok(()))
}

/// Like [`run_grid`], calling `inspect` on every replication. An error from
/// `inspect` aborts the run.
pub fn run_grid_inspect<F>(cfg: &GridConfig, cache: &MomentsCache, inspect: F) -> Result<Vec<ReplicationRecord>>
where
    F: Fn(&Replication) -> Result<()> + Sync,
{
    cfg.validate()?;
    let prepared = cfg
        .settings
        .iter()
        .map(|s| prepare(cfg, s, cache))
        .collect::<Result<Vec<_>>>()?;
    let items: Vec<(usize, usize, u64)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(si, p)| (0..p.cells.len()).flat_map(move |ci| (0..cfg.reps as u64).map(move |rep| (si, ci, rep))))
        .collect();
    let nested = items
        .par_iter()
        .map(|&(si, ci, rep)| run_replication(cfg, &prepared[si], &prepared[si].cells[ci], rep, &inspect))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<ReplicationRecord> = nested.into_iter().flatten().collect();
    super::report::sort_records(&mut records);
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ErrorLaw;

    fn small_grid() -> GridConfig {
        GridConfig {
            name: "small".into(),
            settings: vec![GridSetting {
                id: "low".into(),
                scenario: SimScenario::new(40, 8, 5, 5, 0, 0.1, 0.6, 1),
                ranks: vec![0, 2],
                b0: vec![],
                target_snr: None,
                methods: None,
            }],
            methods: vec![
                "GRS".into(),
                "STRS".into(),
                "SSTRS".into(),
                "STRS-DB".into(),
                "BSW-1.1".into(),
                "KF-2".into(),
            ],
            reps: 3,
            seed: 5,
            eps: 0.05,
            mc_draws: 50,
            snr_draws: 20,
            fit_errors: true,
        }
    }

    #[test]
    fn grid_runs_and_is_deterministic() {
        let cfg = small_grid();
        let a = run_grid(&cfg, &MomentsCache::disabled()).unwrap();
        assert_eq!(a.len(), 2 * 3 * 6);
        let b = run_grid(&cfg, &MomentsCache::disabled()).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert!(r.selected.unwrap() <= 5);
            assert!(r.fit_err.is_some() && r.pred_err.is_some());
            assert_eq!(r.snr.is_some(), r.true_rank > 0);
        }
    }

    #[test]
    fn zero_rank_fit_error_is_signal_norm() {
        let sc = SimScenario::new(30, 6, 4, 4, 2, 0.1, 0.5, 3);
        let inst = Instance::generate(&sc).unwrap();
        let (y, _) = inst.replicate(0).unwrap();
        let (_, f) = Spectrum::with_factors(&y, &inst.p).unwrap();
        let errs = fit_errors(&fit_mean(&f, 0).unwrap(), &inst.xa, &inst.a, None).unwrap();
        assert!((errs.fit_err - inst.xa.frobenius() / (180f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn noiseless_true_rank_fit_is_exact() {
        let sc = SimScenario::new(30, 6, 4, 4, 2, 0.1, 0.5, 3);
        let inst = Instance::generate(&sc).unwrap();
        let (_, f) = Spectrum::with_factors(&inst.xa, &inst.p).unwrap();
        let pinv = design_pinv(&inst.x).unwrap();
        let errs = fit_errors(&fit_mean(&f, 2).unwrap(), &inst.xa, &inst.a, Some(&pinv)).unwrap();
        assert!(errs.fit_err < 1e-10);
        assert!(errs.pred_err.unwrap() < 1e-10);
    }

    #[test]
    fn pinv_unavailable_for_wide_design() {
        let sc = SimScenario::new(10, 6, 20, 4, 2, 0.1, 0.5, 3);
        let inst = Instance::generate(&sc).unwrap();
        assert!(matches!(design_pinv(&inst.x), Err(RrrError::NotAvailable(_))));
    }

    #[test]
    fn bsw_na_when_n_equals_q() {
        let mut cfg = small_grid();
        cfg.settings[0].scenario = SimScenario::new(12, 8, 20, 12, 0, 0.1, 0.5, 1);
        cfg.settings[0].ranks = vec![1];
        cfg.settings[0].target_snr = Some(3.5);
        cfg.methods = vec!["STRS".into(), "BSW-1.1".into()];
        let recs = run_grid(&cfg, &MomentsCache::disabled()).unwrap();
        for r in &recs {
            assert!((r.snr.unwrap() - 3.5).abs() < 1e-9);
            if r.method == "BSW-1.1" {
                assert_eq!(r.selected, None);
            } else {
                assert!(r.selected.is_some());
            }
        }
    }

    #[test]
    fn inspect_error_aborts() {
        let cfg = small_grid();
        let err = run_grid_inspect(&cfg, &MomentsCache::disabled(), |rep| {
            if rep.rep == 2 {
                Err(RrrError::TraceViolation("stop".into()))
            } else {
                Ok(())
            }
        });
        assert!(err.is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let mut cfg = small_grid();
        cfg.settings[0].scenario = cfg.settings[0]
            .scenario
            .clone()
            .with_law(ErrorLaw::StudentT { nu: 6.0 });
        let json = serde_json::to_string(&cfg).unwrap();
        let back: GridConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        cfg.settings[0].ranks = vec![9];
        assert!(cfg.validate().is_err());
    }
}
