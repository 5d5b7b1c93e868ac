//! Scenario JSON in, matrix CSVs and the SNR out.

use rrr::io::{read_matrix_file, write_matrix_file};
use rrr::sim::{Instance, SimScenario};

fn main() -> rrr::Result<()> {
    let json = r#"{
        "n": 100, "m": 30, "p": 150, "q": 20, "r": 4,
        "eta": 0.1, "b0": 0.05, "error_law": {"kind": "gaussian"}, "seed": 2
    }"#;
    let sc = SimScenario::from_json(json)?;
    let inst = Instance::generate(&sc)?;
    let (y, _) = inst.replicate(0)?;
    println!(
        "high-dimensional design: {}, rank(X) = {}",
        sc.high_dimensional(),
        inst.p.rank()
    );
    println!("d(XA) = {:?}", &inst.d_xa[..sc.r + 1]);
    println!("SNR = {:.3}", inst.snr(200)?);

    let dir = std::env::temp_dir().join("rrr-simulate-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("Y.csv");
    write_matrix_file(&path, &y)?;
    assert_eq!(read_matrix_file(&path)?, y);
    println!("wrote {}", path.display());
    Ok(())
}
