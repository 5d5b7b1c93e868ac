use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rrr::baselines::{bsw_rank, kf_select, BswConfig, KfConfig};
use rrr::criterion::{diagnostics, select_rank, Spectrum};
use rrr::harness::{self, aggregate, grs_lambda, read_records_file, ExperimentSpec, Overrides};
use rrr::io::{read_matrix_file, write_matrix_file};
use rrr::matrix::{projection, DEFAULT_RANK_TOL};
use rrr::moments::{MomentsCache, DEFAULT_MC_DRAWS};
use rrr::selftune::{sstrs_spectrum, strs_db_spectrum, strs_spectrum, DEFAULT_EPS};
use rrr::sim::{Instance, SimScenario};

/// Rank selection for multivariate response regression.
#[derive(Parser)]
#[command(name = "rrr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectMethod {
    Strs,
    Sstrs,
    Db,
    Grs,
    Bsw,
    Kf,
}

#[derive(Subcommand)]
enum Command {
    /// Select the rank for Y (and optional design X); prints JSON.
    Select {
        #[arg(long)]
        y: PathBuf,
        /// Design matrix; omit for the model Y = A + E.
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "strs")]
        method: SelectMethod,
        /// Fixed λ for GRS (default 2(1+ε)(√m+√q)²).
        #[arg(long)]
        lambda: Option<f64>,
        /// Constant for BSW and KF.
        #[arg(long, default_value_t = 1.1)]
        c: f64,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
        mc_draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate one instance and write X, A, XA, E, Y as matrix CSVs.
    Simulate {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        rep: u64,
        #[arg(long, default_value_t = 100)]
        snr_draws: usize,
        #[arg(long, default_value = "sim-out")]
        out_dir: PathBuf,
    },
    /// Build or inspect the singular-moment cache.
    Moments {
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
        mc_draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// List cached tables instead of building one.
        #[arg(long)]
        list: bool,
    },
    /// Run a preset (exp1..exp5, tightness, ratio, fit-study, mc-vs-db, kf-compare) or a JSON spec.
    Experiment {
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        mc_draws: Option<usize>,
        /// Comma-separated method ids, e.g. STRS,BSW-1.1,KF-2.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// Print the resolved spec as JSON and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Aggregate existing record CSVs into a summary table and plots.
    Report {
        records: Vec<PathBuf>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long, default_value = "report")]
        name: String,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Select {
            y,
            x,
            method,
            lambda,
            c,
            eps,
            mc_draws,
            seed,
        } => select(y, x, method, lambda, c, eps, mc_draws, seed),
        Command::Simulate {
            scenario,
            seed,
            rep,
            snr_draws,
            out_dir,
        } => simulate(scenario, seed, rep, snr_draws, out_dir),
        Command::Moments {
            q,
            m,
            mc_draws,
            seed,
            list,
        } => moments(q, m, mc_draws, seed, list),
        Command::Experiment {
            name,
            seed,
            reps,
            eps,
            mc_draws,
            methods,
            out_dir,
            dump_config,
        } => {
            let mut spec = ExperimentSpec::load(&name)?;
            spec.apply(&Overrides {
                seed,
                reps,
                eps,
                mc_draws,
                methods: methods.map(|m| m.split(',').map(|s| s.trim().to_string()).collect()),
            });
            if dump_config {
                println!("{}", serde_json::to_string_pretty(&spec)?);
                return Ok(());
            }
            let out = harness::run_experiment(&spec, &out_dir, &MomentsCache::from_env())?;
            for f in &out.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Report { records, out_dir, name } => {
            if records.is_empty() {
                bail!("no record files given");
            }
            let mut all = Vec::new();
            for path in &records {
                all.extend(read_records_file(path).with_context(|| format!("reading {}", path.display()))?);
            }
            std::fs::create_dir_all(&out_dir)?;
            let report = aggregate(&all, None)?;
            for f in harness::write_report(&report, &out_dir, &name)? {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn select(
    y: PathBuf,
    x: Option<PathBuf>,
    method: SelectMethod,
    lambda: Option<f64>,
    c: f64,
    eps: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<()> {
    let y = read_matrix_file(&y).with_context(|| format!("reading {}", y.display()))?;
    let spec = match &x {
        Some(path) => {
            let x = read_matrix_file(path).with_context(|| format!("reading {}", path.display()))?;
            Spectrum::from_data(&y, &projection(&x, DEFAULT_RANK_TOL)?)?
        }
        None => Spectrum::direct(&y)?,
    };
    let cache = MomentsCache::from_env();
    let shape = json!({"n": spec.n(), "m": spec.m(), "q": spec.q()});
    let out = match method {
        SelectMethod::Grs => {
            let lambda = lambda.unwrap_or_else(|| grs_lambda(spec.m(), spec.q(), eps));
            let sel = select_rank(&spec, lambda);
            let diag = diagnostics(&spec, lambda, 1.0, None);
            json!({
                "method": "GRS",
                "rank": sel.k_hat,
                "lambda": lambda,
                "k_cap": sel.cap,
                "sigma_sq_trace": sel.sigma_sq_trace,
                "max_admissible_rank": diag.max_admissible_rank,
                "shape": shape,
            })
        }
        SelectMethod::Strs | SelectMethod::Sstrs | SelectMethod::Db => {
            let trace = match method {
                SelectMethod::Strs => strs_spectrum(&spec, eps, &cache.moments(spec.q(), spec.m(), mc_draws, seed)?)?,
                SelectMethod::Sstrs => sstrs_spectrum(&spec, eps)?,
                _ => strs_db_spectrum(&spec, eps)?,
            };
            trace.check_invariants(spec.len())?;
            json!({
                "method": trace.variant.label(),
                "rank": trace.rank(),
                "trace": trace,
                "shape": shape,
            })
        }
        SelectMethod::Bsw => {
            let moments = cache.moments(spec.q(), spec.m(), mc_draws, seed)?;
            let cfg = BswConfig::new(c)?;
            json!({
                "method": format!("BSW-{c}"),
                "rank": bsw_rank(&spec, &cfg, Some(&moments))?,
                "mu": cfg.mu(&spec, Some(&moments))?,
                "shape": shape,
            })
        }
        SelectMethod::Kf => {
            let cfg = KfConfig::new(c, cache.g_norms(spec.q(), spec.m(), mc_draws, seed)?)?;
            json!({
                "method": format!("KF-{c}"),
                "rank": kf_select(&spec, &cfg)?,
                "shape": shape,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn simulate(scenario: PathBuf, seed: Option<u64>, rep: u64, snr_draws: usize, out_dir: PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let mut sc = SimScenario::from_json(&text)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let inst = Instance::generate(&sc)?;
    let (y, e) = inst.replicate(rep)?;
    std::fs::create_dir_all(&out_dir)?;
    for (name, m) in [("X", &inst.x), ("A", &inst.a), ("XA", &inst.xa), ("E", &e), ("Y", &y)] {
        write_matrix_file(&out_dir.join(format!("{name}.csv")), m)?;
    }
    std::fs::write(out_dir.join("scenario.json"), sc.to_json())?;
    let snr = if sc.r > 0 { Some(inst.snr(snr_draws)?) } else { None };
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "out_dir": out_dir,
            "q": inst.p.rank(),
            "d_xa": inst.d_xa,
            "snr": snr,
        }))?
    );
    Ok(())
}

fn moments(q: Option<usize>, m: Option<usize>, mc_draws: usize, seed: u64, list: bool) -> Result<()> {
    let cache = MomentsCache::from_env();
    if list {
        for t in cache.list()? {
            println!(
                "q={} m={} mc_draws={} seed={} S1={:.6}",
                t.q(),
                t.m(),
                t.mc_draws(),
                t.seed(),
                t.s(1)
            );
        }
        return Ok(());
    }
    let (Some(q), Some(m)) = (q, m) else {
        bail!("--q and --m are required unless --list is given");
    };
    let table = cache.moments(q, m, mc_draws, seed)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "q": q,
            "m": m,
            "mc_draws": mc_draws,
            "seed": seed,
            "S": table.values(),
            "cache": cache.moments_path(),
        }))?
    );
    Ok(())
}
