#![allow(dead_code)]

use mqf_core::{FactorParams, MatrixPanel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_params(seed: u64, dims: (usize, usize, usize), k: (usize, usize)) -> FactorParams {
    let (periods, p1, p2) = dims;
    let mut g = rng(seed);
    let r = gaussian(&mut g, p1, k.0);
    let c = gaussian(&mut g, p2, k.1);
    let f = (0..periods).map(|_| gaussian(&mut g, k.0, k.1)).collect();
    FactorParams::new(r, c, f).unwrap()
}

pub fn random_panel(seed: u64, dims: (usize, usize, usize)) -> MatrixPanel {
    let (periods, p1, p2) = dims;
    let mut g = rng(seed);
    let values = (0..periods * p1 * p2)
        .map(|_| g.sample(StandardNormal))
        .collect();
    MatrixPanel::new(periods, p1, p2, values).unwrap()
}

/// Random orthogonal matrix from the QR factorization of a Gaussian one.
pub fn orthogonal(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    gaussian(rng, k, k).qr().q()
}

/// Panel equal to the common component of `theta`.
pub fn noiseless_panel(theta: &FactorParams) -> MatrixPanel {
    MatrixPanel::from_matrices(&mqf_core::common_component(theta)).unwrap()
}
