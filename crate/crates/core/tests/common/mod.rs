#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rankflow::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    rankflow::linalg::svd(&gaussian(rng, n, n)).unwrap().u
}

pub fn rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).frobenius_norm() / a.frobenius_norm().max(b.frobenius_norm()).max(1.0)
}
