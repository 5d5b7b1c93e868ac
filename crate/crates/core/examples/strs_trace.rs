//! The self-tuning procedure shrinks `λ` step by step until the selected
//! rank stops growing.

use rrr::criterion::{select_rank, Spectrum};
use rrr::moments::estimate_moments;
use rrr::selftune::strs_spectrum;
use rrr::sim::{Instance, SimScenario};

fn main() -> rrr::Result<()> {
    // more signal directions than a fixed λ₀ can admit
    let sc = SimScenario::new(50, 50, 300, 30, 12, 0.1, 2.0, 3);
    let inst = Instance::generate(&sc)?;
    let (y, _) = inst.replicate(0)?;
    let spec = Spectrum::from_data(&y, &inst.p)?;
    let moments = estimate_moments(sc.q, sc.m, 500, 1)?;

    let trace = strs_spectrum(&spec, 0.05, &moments)?;
    trace.check_invariants(spec.len())?;
    println!(" t   lambda_t   K_t  k_t");
    for s in &trace.steps {
        println!("{:2} {:10.3} {:5} {:4}", s.t, s.lambda, s.cap, s.k);
    }
    let fixed = select_rank(&spec, trace.initial_lambda());
    println!(
        "fixed lambda_0 selects {}, self-tuning selects {} (true r = {})",
        fixed.k_hat,
        trace.rank(),
        sc.r
    );
    Ok(())
}
