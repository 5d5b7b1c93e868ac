//! Fit error of the selected rank against the oracle bounds.

use rrr::criterion::{oracle_bounds, Spectrum};
use rrr::harness::grs_lambda;
use rrr::sim::{Instance, SimScenario};

fn main() -> rrr::Result<()> {
    let sc = SimScenario::new(150, 30, 20, 20, 4, 0.1, 0.25, 5);
    let inst = Instance::generate(&sc)?;
    let lambda = grs_lambda(sc.m, sc.q, 0.05);
    for rep in 0..5 {
        let (y, e) = inst.replicate(rep)?;
        let k = rrr::select_rank(&Spectrum::from_data(&y, &inst.p)?, lambda).k_hat;
        let rep_bounds = oracle_bounds(&y, &inst.p, &inst.xa, &e, k, sc.r, lambda, 3.0)?;
        println!(
            "rep {rep}: k = {k}, |fit - XA|^2 = {:8.2}, 4 r d1^2(PE) = {:8.2}, general bound = {:8.2} (event {})",
            rep_bounds.lhs, rep_bounds.rank_bound, rep_bounds.general_bound, rep_bounds.general_event
        );
    }
    Ok(())
}
