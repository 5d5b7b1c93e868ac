//! Largest recovering `λ` per `(X, A)` pair and the resulting signal margin.

use rrr::harness::{tightness_sweep, TightnessConfig};
use rrr::sim::SimScenario;

fn main() -> rrr::Result<()> {
    let pairs = [(3, 0.15), (3, 0.3), (6, 0.2), (6, 0.3)]
        .iter()
        .enumerate()
        .map(|(i, &(r, b0))| SimScenario::new(150, 30, 20, 20, r, 0.1, b0, i as u64))
        .collect();
    let cfg = TightnessConfig {
        name: "tightness-demo".into(),
        pairs,
        lambda_min: 1.0,
        lambda_max: 1500.0,
        lambda_step: 1.0,
        seed: 0,
    };
    println!(" r    b0   lambda   d_r(XA)  sqrt(l)s_r - d1(PE)");
    for row in tightness_sweep(&cfg)? {
        match (row.lambda, row.gap) {
            (Some(l), Some(gap)) => println!("{:2} {:5.2} {:8.0} {:9.3} {:9.3}", row.r, row.b0, l, row.d_r_xa, gap),
            _ => println!("{:2} {:5.2}  no grid point recovers r", row.r, row.b0),
        }
    }
    Ok(())
}
