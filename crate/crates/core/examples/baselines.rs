//! BSW thresholding and the KF ratio criterion next to STRS.

use rrr::baselines::{bsw_rank, kf_select, BswConfig, KfConfig};
use rrr::criterion::Spectrum;
use rrr::moments::{estimate_g_norms, estimate_moments};
use rrr::selftune::strs_spectrum;
use rrr::sim::{Instance, SimScenario};

fn main() -> rrr::Result<()> {
    let sc = SimScenario::new(300, 40, 35, 35, 25, 0.1, 20.0, 70);
    let inst = Instance::generate(&sc)?;
    let (y, _) = inst.replicate(0)?;
    let spec = Spectrum::from_data(&y, &inst.p)?;
    let moments = estimate_moments(sc.q, sc.m, 500, 1)?;
    let g = estimate_g_norms(sc.q, sc.m, 500, 1)?;

    println!("true rank {}", sc.r);
    println!("STRS     {}", strs_spectrum(&spec, 0.05, &moments)?.rank());
    for c in [0.7, 1.1, 1.5] {
        println!("BSW-{c:<4} {}", bsw_rank(&spec, &BswConfig::new(c)?, Some(&moments))?);
    }
    println!("KF-2     {}", kf_select(&spec, &KfConfig::new(2.0, g)?)?);
    Ok(())
}
