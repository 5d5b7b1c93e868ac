//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 3 5`.

mod common;

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rrr::baselines::sigma_tilde_sq;
use rrr::criterion::{closed_form_rank, k_cap, oracle_bounds, select_rank, Spectrum};
use rrr::error::RrrError;
use rrr::harness::{preset, run_grid_inspect, ExperimentSpec, GridConfig, GridSetting, Method, ReplicationRecord};
use rrr::matrix::{project, svd, DataMatrix};
use rrr::moments::{estimate_moments, MomentsCache, SingularMoments};
use rrr::selftune::{strs_db_spectrum, strs_initial_lambda, strs_spectrum, SelfTuneTrace};
use rrr::sim::{ErrorLaw, Instance, SimScenario};

/// Criteria that cannot pass as stated; they still run and print FAIL.
const KNOWN_FAILURES: &[usize] = &[4];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn grid(name: &str, settings: Vec<GridSetting>, methods: &[&str], reps: usize, seed: u64) -> GridConfig {
    GridConfig {
        name: name.into(),
        settings,
        methods: methods.iter().map(|m| m.to_string()).collect(),
        reps,
        seed,
        eps: 0.05,
        mc_draws: 500,
        snr_draws: 100,
        fit_errors: false,
    }
}

fn setting(id: &str, scenario: SimScenario, ranks: impl IntoIterator<Item = usize>) -> GridSetting {
    GridSetting {
        id: id.into(),
        scenario,
        ranks: ranks.into_iter().collect(),
        b0: vec![],
        target_snr: None,
        methods: None,
    }
}

fn preset_setting(name: &str, id: &str) -> GridSetting {
    match preset(name).unwrap() {
        ExperimentSpec::Grid(g) => g.settings.into_iter().find(|s| s.id == id).unwrap(),
        _ => panic!("{name} is not a grid preset"),
    }
}

#[derive(Default)]
struct RankStats {
    reps: usize,
    hits: usize,
    selected_sum: usize,
    snr: Option<f64>,
}

fn rank_stats(records: &[ReplicationRecord], method: &str) -> BTreeMap<usize, RankStats> {
    let mut out: BTreeMap<usize, RankStats> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.method == method) {
        let s = out.entry(rec.true_rank).or_default();
        s.reps += 1;
        s.hits += rec.recovered() as usize;
        s.selected_sum += rec.selected.unwrap_or(0);
        s.snr = rec.snr;
    }
    out
}

fn rate(s: &RankStats) -> f64 {
    s.hits as f64 / s.reps as f64
}

fn strs_trace(rep: &rrr::harness::Replication) -> SelfTuneTrace {
    rep.outcomes
        .iter()
        .find(|(m, _)| *m == Method::Strs)
        .and_then(|(_, o)| o.trace.clone())
        .expect("STRS outcome carries a trace")
}

fn trace_is_monotone(t: &SelfTuneTrace) -> bool {
    t.steps
        .windows(2)
        .all(|w| w[1].lambda < w[0].lambda && w[1].k >= w[0].k)
}

/// Random `(Y, P)` with `n, m, p ≤ 12` and a random-strength signal.
fn small_instance(rng: &mut ChaCha8Rng) -> (Spectrum, DataMatrix, rrr::matrix::ProjectionOp, f64) {
    let n = rng.random_range(1..=12);
    let m = rng.random_range(1..=12);
    let p = rng.random_range(1..=12);
    let r = rng.random_range(0..=m.min(p).min(4));
    let b = 10f64.powf(rng.random_range(-1.0..1.0));
    let pr = common::problem(n, m, p, r, b, rng.random());
    let spec = Spectrum::from_data(&pr.y, &pr.p).unwrap();
    let lambda = spec.nm().powf(rng.random_range(0.0..=1.0));
    (spec, pr.y, pr.p, lambda)
}

/// `σ̂_k²` for `k = 0..=K_λ` from explicit truncations of `PY`.
fn brute_trace(y: &DataMatrix, p: &rrr::matrix::ProjectionOp, lambda: f64) -> Vec<f64> {
    let (n, m) = (y.rows(), y.cols());
    let f = svd(&project(p, y).unwrap()).unwrap();
    let cap = k_cap(n, m, p.rank(), lambda);
    (0..=cap)
        .map(|k| {
            let fit = f.truncate(k.min(f.len())).unwrap();
            y.sub(&fit).unwrap().frobenius_sq() / ((n * m) as f64 - lambda * k as f64)
        })
        .collect()
}

fn smallest_argmin(t: &[f64]) -> usize {
    let min = t.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * t[0].max(f64::MIN_POSITIVE);
    t.iter().position(|&v| v <= min + slack).unwrap()
}

fn c1_closed_form() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut agree = 0;
    for _ in 0..1000 {
        let (spec, y, p, lambda) = small_instance(&mut rng);
        agree += (closed_form_rank(&spec, lambda) == smallest_argmin(&brute_trace(&y, &p, lambda))) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(agree == 1000 && secs < 10.0, format!("{agree}/1000 agree, {secs:.2} s"))
}

fn c2_unimodal() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ok = 0;
    for _ in 0..1000 {
        let (_, y, p, lambda) = small_instance(&mut rng);
        let t = brute_trace(&y, &p, lambda);
        let k = smallest_argmin(&t);
        let slack = 1e-12 * t[0].max(f64::MIN_POSITIVE);
        let good = (1..t.len()).all(|j| {
            if j <= k {
                t[j] <= t[j - 1] + slack
            } else {
                t[j] >= t[j - 1] - slack
            }
        });
        ok += good as usize;
    }
    verdict(ok == 1000, format!("{ok}/1000 unimodal"))
}

fn c3_cap() -> Verdict {
    let lambda = 2.0 * (50f64.sqrt() + 30f64.sqrt()).powi(2);
    let k = k_cap(50, 50, 30, lambda);
    verdict(k == 7, format!("λ₀ = {lambda:.2}, K = {k}"))
}

fn c4_strs_lambda0() -> Verdict {
    let start = Instant::now();
    let s = estimate_moments(20, 30, 500, 0).unwrap();
    let lambda = strs_initial_lambda(&s, 0.0);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        (188.0..=208.0).contains(&lambda) && secs < 5.0,
        format!("2·S₁ = {lambda:.2}, target [188, 208], {secs:.2} s"),
    )
}

/// Traces from criterion 5, kept for criterion 7.
static NULL_TRACES: Mutex<Vec<SelfTuneTrace>> = Mutex::new(Vec::new());

fn c5_null() -> Verdict {
    let sc = SimScenario::new(150, 30, 20, 20, 0, 0.1, 1.0, 5);
    let inst = Instance::generate(&sc).unwrap();
    let lambda = 1.2 * (30f64.sqrt() + 20f64.sqrt()).powi(2);
    let moments = estimate_moments(20, 30, 500, 5).unwrap();
    let results: Vec<(usize, SelfTuneTrace)> = (0..500u64)
        .into_par_iter()
        .map(|rep| {
            let (y, _) = inst.replicate(rep).unwrap();
            let spec = Spectrum::from_data(&y, &inst.p).unwrap();
            (
                select_rank(&spec, lambda).k_hat,
                strs_spectrum(&spec, 0.05, &moments).unwrap(),
            )
        })
        .collect();
    let zeros = results.iter().filter(|(k, _)| *k == 0).count();
    NULL_TRACES.lock().unwrap().extend(results.into_iter().map(|(_, t)| t));
    verdict(
        zeros as f64 >= 0.99 * 500.0,
        format!("k̂ = 0 in {zeros}/500 at λ = {lambda:.1}"),
    )
}

#[derive(Default)]
struct Exp1Checks {
    traces: usize,
    monotone: usize,
    nested: usize,
    oracle_cases: usize,
    oracle_holds: usize,
}

static EXP1: Mutex<Option<Exp1Checks>> = Mutex::new(None);

fn c6_recovery() -> Verdict {
    let start = Instant::now();
    let s = GridSetting {
        b0: vec![0.25],
        ..setting("low", preset_setting("exp1", "low").scenario, 1..=10)
    };
    let cfg = grid("accept-exp1", vec![s], &["STRS"], 200, 6);
    let checks = Mutex::new(Exp1Checks::default());
    let records = run_grid_inspect(&cfg, &MomentsCache::from_env(), |rep| {
        let trace = strs_trace(rep);
        let r = rep.instance.scenario.r;
        let nested = select_rank(rep.spectrum, trace.initial_lambda()).k_hat <= trace.rank();
        let oracle = if trace.rank() == r {
            let rep_ = oracle_bounds(
                rep.y,
                &rep.instance.p,
                &rep.instance.xa,
                rep.e,
                r,
                r,
                trace.final_lambda(),
                3.0,
            )?;
            Some(rep_.rank_bound_holds)
        } else {
            None
        };
        let mut c = checks.lock().unwrap();
        c.traces += 1;
        c.monotone += trace_is_monotone(&trace) as usize;
        c.nested += nested as usize;
        if let Some(h) = oracle {
            c.oracle_cases += 1;
            c.oracle_holds += h as usize;
        }
        Ok(())
    })
    .unwrap();
    *EXP1.lock().unwrap() = Some(checks.into_inner().unwrap());
    let secs = start.elapsed().as_secs_f64();
    let mut pass = secs < 600.0;
    let mut parts = vec![];
    for (r, st) in rank_stats(&records, "STRS") {
        let snr = st.snr.unwrap_or(f64::NAN);
        let mean = st.selected_sum as f64 / st.reps as f64;
        let ok = (snr < 2.0 || rate(&st) >= 0.9) && mean <= r as f64 + 0.05;
        pass &= ok;
        parts.push(format!(
            "r={r} snr={snr:.2} rec={:.3} mean={mean:.3}{}",
            rate(&st),
            if ok { "" } else { " !" }
        ));
    }
    verdict(pass, format!("{}; {secs:.1} s", parts.join(", ")))
}

fn c7_monotone() -> Verdict {
    let null = NULL_TRACES.lock().unwrap();
    let null_ok = null.iter().filter(|t| trace_is_monotone(t)).count();
    let guard = EXP1.lock().unwrap();
    let Some(e) = guard.as_ref() else {
        return verdict(false, "criterion 6 did not run");
    };
    let pass = !null.is_empty() && null_ok == null.len() && e.monotone == e.traces;
    verdict(
        pass,
        format!("null {null_ok}/{}, recovery {}/{}", null.len(), e.monotone, e.traces),
    )
}

fn c8_nested() -> Verdict {
    match EXP1.lock().unwrap().as_ref() {
        Some(e) => verdict(
            e.traces > 0 && e.nested == e.traces,
            format!("{}/{} nested", e.nested, e.traces),
        ),
        None => verdict(false, "criterion 6 did not run"),
    }
}

fn c9_oracle() -> Verdict {
    match EXP1.lock().unwrap().as_ref() {
        Some(e) => verdict(
            e.oracle_cases > 0 && e.oracle_holds == e.oracle_cases,
            format!(
                "bound holds in {}/{} replications with k̂ = r",
                e.oracle_holds, e.oracle_cases
            ),
        ),
        None => verdict(false, "criterion 6 did not run"),
    }
}

fn c10_square() -> Verdict {
    let sc = SimScenario::new(50, 50, 200, 50, 0, 0.1, 0.1, 10);
    let s = GridSetting {
        target_snr: Some(3.5),
        ..setting("n50-q50-m50", sc.clone(), 1..=10)
    };
    let cfg = grid("accept-exp2", vec![s], &["STRS", "BSW-1.1"], 100, 10);
    let records = rrr::harness::run_grid(&cfg, &MomentsCache::from_env()).unwrap();
    let mut pass = true;
    let mut parts = vec![];
    for (r, st) in rank_stats(&records, "STRS") {
        let snr = st.snr.unwrap_or(f64::NAN);
        let ok = snr > 3.0 && rate(&st) >= 0.9;
        pass &= ok;
        parts.push(format!("r={r} snr={snr:.2} rec={:.2}", rate(&st)));
    }
    let bsw_na = records
        .iter()
        .filter(|r| r.method.starts_with("BSW"))
        .all(|r| r.selected.is_none());
    let inst = Instance::generate(&sc.with_rank(3)).unwrap();
    let (y, _) = inst.replicate(0).unwrap();
    let infeasible = matches!(
        sigma_tilde_sq(&y, &inst.p),
        Err(RrrError::InfeasibleVarianceEstimate { .. })
    );
    pass &= bsw_na && infeasible;
    verdict(
        pass,
        format!(
            "{}; σ̃² infeasible: {infeasible}, BSW all NA: {bsw_na}",
            parts.join(", ")
        ),
    )
}

fn c11_extension() -> Verdict {
    let s = GridSetting {
        ranks: (1..=30).collect(),
        ..preset_setting("exp3", "extended")
    };
    let cfg = grid("accept-exp3", vec![s], &["GRS", "STRS"], 100, 11);
    let records = rrr::harness::run_grid(&cfg, &MomentsCache::from_env()).unwrap();
    let grs = rank_stats(&records, "GRS");
    let strs = rank_stats(&records, "STRS");
    let grs_bad: Vec<usize> = grs
        .iter()
        .filter(|(r, s)| **r > 7 && s.hits > 0)
        .map(|(r, _)| *r)
        .collect();
    let strs_bad: Vec<usize> = strs.iter().filter(|(_, s)| rate(s) < 0.9).map(|(r, _)| *r).collect();
    let min_strs = strs.values().map(rate).fold(1.0, f64::min);
    verdict(
        grs_bad.is_empty() && strs_bad.is_empty(),
        format!("GRS recovers for r > 7 at {grs_bad:?}; STRS below 0.9 at {strs_bad:?}; min STRS rate {min_strs:.2}"),
    )
}

fn c12_heavy_tails() -> Verdict {
    let sc = SimScenario::direct(500, 80, 0, 0.25, 12).with_law(ErrorLaw::StudentT { nu: 6.0 });
    let cfg = grid("accept-exp4", vec![setting("direct", sc, 1..=15)], &["SSTRS"], 100, 12);
    let records = rrr::harness::run_grid(&cfg, &MomentsCache::from_env()).unwrap();
    let mut pass = true;
    let mut checked = 0;
    let mut parts = vec![];
    for (r, st) in rank_stats(&records, "SSTRS") {
        let snr = st.snr.unwrap_or(f64::NAN);
        if snr >= 2.0 {
            checked += 1;
            pass &= rate(&st) >= 0.9;
        }
        parts.push(format!("r={r} snr={snr:.2} rec={:.2}", rate(&st)));
    }
    let vacuous = if checked == 0 {
        " (no rank reaches SNR 2, so the condition is vacuous)"
    } else {
        ""
    };
    verdict(
        pass,
        format!("{checked} ranks with SNR ≥ 2{vacuous}; {}", parts.join(", ")),
    )
}

fn c13_ratio() -> Verdict {
    let ExperimentSpec::Ratio(cases) = preset("ratio").unwrap() else {
        return verdict(false, "ratio preset is not a ratio study");
    };
    let cfg = cases.into_iter().find(|c| c.name == "ratio-case1").unwrap();
    let rows = rrr::harness::ratio_study(&cfg).unwrap();
    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.ratio_of_means), hi.max(r.ratio_of_means))
    });
    verdict(
        rows.iter().all(|r| (0.9..=1.1).contains(&r.ratio_of_means)),
        format!("{} values of j, ratio in [{lo:.3}, {hi:.3}]", rows.len()),
    )
}

fn c14_db_dominance() -> Verdict {
    let shapes = [(300, 50, 50, 50, 0.1), (200, 60, 300, 30, 0.003)];
    let laws = [ErrorLaw::Uniform, ErrorLaw::StudentT { nu: 6.0 }];
    let mut moments: BTreeMap<(usize, usize), SingularMoments> = BTreeMap::new();
    let (mut steps, mut dominated, mut instances) = (0, 0, 0);
    let mut seed = 1400;
    for &(n, m, p, q, b0) in &shapes {
        let s = moments
            .entry((q, m))
            .or_insert_with(|| estimate_moments(q, m, 500, 14).unwrap())
            .clone();
        for law in laws {
            for i in 0..25 {
                seed += 1;
                let sc = SimScenario::new(n, m, p, q, i % 16, 0.1, b0, seed).with_law(law);
                let inst = Instance::generate(&sc).unwrap();
                let (y, _) = inst.replicate(0).unwrap();
                let spec = Spectrum::from_data(&y, &inst.p).unwrap();
                let mc = strs_spectrum(&spec, 0.05, &s).unwrap();
                let db = strs_db_spectrum(&spec, 0.05).unwrap();
                instances += 1;
                for (a, b) in db.steps.iter().zip(&mc.steps) {
                    steps += 1;
                    dominated += (a.lambda >= b.lambda) as usize;
                }
            }
        }
    }
    verdict(
        instances == 100 && dominated == steps,
        format!("{instances} instances, DB λ ≥ MC λ at {dominated}/{steps} shared steps"),
    )
}

fn c15_scale() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut ok = 0;
    for i in 0..100 {
        let n = rng.random_range(20..60);
        let m = rng.random_range(3..15);
        let p = rng.random_range(2..12);
        let r = rng.random_range(0..=m.min(p).min(4));
        let pr = common::problem(n, m, p, r, rng.random_range(0.1..1.0), rng.random());
        let base = Spectrum::from_data(&pr.y, &pr.p).unwrap();
        let s = estimate_moments(base.q(), m, 100, i).unwrap();
        let lambda = rrr::harness::grs_lambda(m, base.q(), 0.05);
        let ranks = |c: f64| {
            let spec = Spectrum::from_data(&pr.y.scaled(c), &pr.p).unwrap();
            (
                select_rank(&spec, lambda).k_hat,
                strs_spectrum(&spec, 0.05, &s).unwrap().rank(),
            )
        };
        let one = ranks(1.0);
        ok += (ranks(1e-3) == one && ranks(1e3) == one) as usize;
    }
    verdict(ok == 100, format!("{ok}/100 instances invariant"))
}

fn main() {
    let criteria: [(usize, fn() -> Verdict); 15] = [
        (1, c1_closed_form),
        (2, c2_unimodal),
        (3, c3_cap),
        (4, c4_strs_lambda0),
        (5, c5_null),
        (6, c6_recovery),
        (7, c7_monotone),
        (8, c8_nested),
        (9, c9_oracle),
        (10, c10_square),
        (11, c11_extension),
        (12, c12_heavy_tails),
        (13, c13_ratio),
        (14, c14_db_dominance),
        (15, c15_scale),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let needs_six = wanted.iter().any(|w| (7..=9).contains(w));
    let needs_five = wanted.contains(&7);
    let mut passed = 0;
    let mut unexpected = vec![];
    let mut ran = 0;
    let total = Instant::now();
    for (id, run) in criteria {
        let selected = wanted.is_empty() || wanted.contains(&id);
        let prerequisite = (id == 6 && needs_six) || (id == 5 && needs_five);
        if !selected && !prerequisite {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let took = start.elapsed();
        if !selected {
            continue;
        }
        ran += 1;
        let known = KNOWN_FAILURES.contains(&id);
        let note = if !v.pass && known { " [known failure]" } else { "" };
        println!(
            "{} criterion {id}: {} ({}){note}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            fmt(took)
        );
        if v.pass {
            passed += 1;
        } else if !known {
            unexpected.push(id);
        }
    }
    println!("acceptance: {passed}/{ran} passed in {}", fmt(total.elapsed()));
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn fmt(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}
