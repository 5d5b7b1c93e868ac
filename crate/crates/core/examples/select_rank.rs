//! One-shot rank selection at a fixed penalty.
//!
//! Simulates `Y = XA + E` with rank-5 `A`, then prints the criterion trace
//! `σ̂_k²` and the selected rank.

use rrr::criterion::{closed_form_rank, diagnostics, select_rank, Spectrum};
use rrr::harness::grs_lambda;
use rrr::sim::{Instance, SimScenario};

fn main() -> rrr::Result<()> {
    let sc = SimScenario::new(150, 30, 20, 20, 5, 0.1, 0.25, 7);
    let inst = Instance::generate(&sc)?;
    let (y, _) = inst.replicate(0)?;
    let spec = Spectrum::from_data(&y, &inst.p)?;

    let lambda = grs_lambda(sc.m, sc.q, 0.05);
    let sel = select_rank(&spec, lambda);
    println!("lambda = {lambda:.2}, K_lambda = {}", sel.cap);
    for (k, s) in sel.sigma_sq_trace.iter().enumerate() {
        let mark = if k == sel.k_hat { "  <- k_hat" } else { "" };
        println!("k = {k:2}  sigma_k^2 = {s:.5}{mark}");
    }
    println!("closed-form count = {}", closed_form_rank(&spec, lambda));

    let diag = diagnostics(&spec, lambda, 1.0, Some(sc.r));
    println!(
        "largest rank allowed for delta = 1: {}, sigma_r^2 = {:.5}",
        diag.max_admissible_rank,
        diag.sigma_r_hat_sq.unwrap_or(f64::NAN)
    );
    Ok(())
}
