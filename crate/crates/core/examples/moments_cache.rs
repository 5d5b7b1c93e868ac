//! Builds the singular-moment table `S_j = E d_j²(Z)` once and reads it back
//! from the CSV cache.

use std::time::Instant;

use rrr::moments::MomentsCache;

fn main() -> rrr::Result<()> {
    let dir = std::env::temp_dir().join("rrr-moments-example");
    let cache = MomentsCache::at(&dir);

    let t = Instant::now();
    let s = cache.moments(20, 30, 500, 0)?;
    println!("estimated in {:?}", t.elapsed());
    let t = Instant::now();
    let again = cache.moments(20, 30, 500, 0)?;
    println!("reloaded in {:?}", t.elapsed());
    assert_eq!(s, again);

    println!(
        "S_1 = {:.3}, S_20 = {:.3}, sum = {:.1} (qm = 600)",
        s.s(1),
        s.s(20),
        s.total()
    );
    println!("2 S_1 = {:.2}", 2.0 * s.s(1));
    for t in cache.list()? {
        println!(
            "cached: q={} m={} draws={} seed={}",
            t.q(),
            t.m(),
            t.mc_draws(),
            t.seed()
        );
    }
    Ok(())
}
