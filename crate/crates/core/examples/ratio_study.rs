//! `E d_j(PE) / E d_j(Z)` for heavy-tailed errors and a strongly correlated design.

use rrr::harness::{ratio_study, RatioConfig};
use rrr::sim::{ErrorLaw, SimScenario};

fn main() -> rrr::Result<()> {
    let scenario = SimScenario {
        standardize: true,
        ..SimScenario::new(150, 50, 250, 50, 0, 0.9, 1.0, 90).with_law(ErrorLaw::StudentT { nu: 5.0 })
    };
    let rows = ratio_study(&RatioConfig {
        name: "ratio-demo".into(),
        scenario,
        pairs: 100,
        seed: 0,
    })?;
    for r in rows.iter().step_by(7) {
        println!(
            "j = {:2}  E d_j(PE) = {:7.3}  E d_j(Z) = {:7.3}  ratio = {:.3}",
            r.j, r.mean_d_pe, r.mean_d_z, r.ratio_of_means
        );
    }
    let worst = rows.iter().map(|r| (r.ratio_of_means - 1.0).abs()).fold(0.0, f64::max);
    println!("max |ratio - 1| = {worst:.3}");
    Ok(())
}
