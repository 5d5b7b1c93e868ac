#![allow(dead_code)]

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rrr::matrix::{projection, DataMatrix, ProjectionOp, DEFAULT_RANK_TOL};
use rrr::rng::substream;

pub fn gaussian(rows: usize, cols: usize, seed: u64, tag: u64) -> DataMatrix {
    let mut rng = substream(seed, &[tag]);
    let m = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    DataMatrix::new(m).unwrap()
}

/// Random `(Y, P)` with a rank-`r` signal of strength `b` plus unit Gaussian noise.
pub struct Problem {
    pub y: DataMatrix,
    pub x: DataMatrix,
    pub p: ProjectionOp,
}

pub fn problem(n: usize, m: usize, p: usize, r: usize, b: f64, seed: u64) -> Problem {
    let x = gaussian(n, p, seed, 1);
    let mut y = gaussian(n, m, seed, 2);
    if r > 0 {
        let a = gaussian(p, r, seed, 3)
            .matmul(&gaussian(r, m, seed, 4))
            .unwrap()
            .scaled(b);
        y = y.add(&x.matmul(&a).unwrap()).unwrap();
    }
    let proj = projection(&x, DEFAULT_RANK_TOL).unwrap();
    Problem { y, x, p: proj }
}
