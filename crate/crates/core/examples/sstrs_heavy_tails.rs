//! Simplified self-tuning for `Y = A + E` with Student-t errors.

use rrr::criterion::Spectrum;
use rrr::selftune::sstrs_spectrum;
use rrr::sim::{ErrorLaw, Instance, SimScenario};

fn main() -> rrr::Result<()> {
    for nu in [6.0, 8.0, 10.0] {
        let sc = SimScenario::direct(500, 80, 10, 0.25, 11).with_law(ErrorLaw::StudentT { nu });
        let inst = Instance::generate(&sc)?;
        let mut hits = 0;
        let reps = 10;
        for rep in 0..reps {
            let (y, _) = inst.replicate(rep)?;
            let trace = sstrs_spectrum(&Spectrum::direct(&y)?, 0.05)?;
            hits += usize::from(trace.rank() == sc.r);
        }
        println!("t_{nu}: recovered r = {} in {hits}/{reps} replications", sc.r);
    }
    Ok(())
}
