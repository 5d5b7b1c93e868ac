//! Monte-Carlo moments versus deterministic bounds: the bound-based `λ`
//! sequence sits above the MC one.

use rrr::criterion::Spectrum;
use rrr::moments::estimate_moments;
use rrr::selftune::{strs_db_spectrum, strs_spectrum};
use rrr::sim::{ErrorLaw, Instance, SimScenario};

fn main() -> rrr::Result<()> {
    let sc = SimScenario::new(300, 50, 50, 50, 8, 0.1, 0.1, 60).with_law(ErrorLaw::Uniform);
    let inst = Instance::generate(&sc)?;
    let (y, _) = inst.replicate(0)?;
    let spec = Spectrum::from_data(&y, &inst.p)?;
    let mc = strs_spectrum(&spec, 0.05, &estimate_moments(sc.q, sc.m, 500, 1)?)?;
    let db = strs_db_spectrum(&spec, 0.05)?;

    println!(" t   MC lambda  k   DB lambda  k");
    for t in 0..mc.steps.len().max(db.steps.len()) {
        let cell = |steps: &[rrr::selftune::TraceStep]| {
            steps.get(t).map_or("          -   -".to_string(), |s| {
                format!("{:11.3} {:3}", s.lambda, s.k)
            })
        };
        println!("{t:2} {} {}", cell(&mc.steps), cell(&db.steps));
    }
    Ok(())
}
