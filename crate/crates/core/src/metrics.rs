//! Distances and similarities between parameter sets and loading spaces.

use nalgebra::DMatrix;

use crate::error::{MqfError, Result};
use crate::linalg::rel_identity_error;
use crate::model::{FactorParams, RateL};

/// Relative Frobenius tolerance for `A'A/p = I`.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// `L = min(√(p1 p2), √(p2 T), √(p1 T))`.
pub fn rate_l(p1: usize, p2: usize, periods: usize) -> RateL {
    RateL::from_dims(p1, p2, periods)
}

/// Semimetric between parameter sets through their common components:
/// `√(Σ_t ‖R_a F_at C_a' - R_b F_bt C_b'‖² / (p1 p2 T))`.
pub fn theta_distance(a: &FactorParams, b: &FactorParams) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(MqfError::DimensionMismatch(format!(
            "(T, p1, p2) differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let (periods, p1, p2) = a.dims();
    let act = a.c.transpose();
    let bct = b.c.transpose();
    let mut sq = 0.0;
    for (fa, fb) in a.f.iter().zip(&b.f) {
        let diff = &a.r * fa * &act - &b.r * fb * &bct;
        sq += diff.norm_squared();
    }
    Ok((sq / (periods * p1 * p2) as f64).sqrt())
}

/// Distance between the column spaces of two `p x k` loading matrices that
/// both satisfy `A'A/p = I`: `(1 - tr(Â'A₀A₀'Â)/(k p²))^{1/2}`, in `[0, 1]`.
pub fn loading_distance(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(truth, estimate)?;
    for (name, m) in [("reference", truth), ("estimate", estimate)] {
        let p = m.nrows() as f64;
        let gram = m.transpose() * m / p;
        let err = rel_identity_error(&gram);
        if !(err <= NORMALIZATION_TOL) {
            return Err(MqfError::NotNormalized(format!(
                "{name} loading has ‖A'A/p - I‖ = {err:.3e}"
            )));
        }
    }
    let overlap = projection_overlap(truth, estimate);
    Ok((1.0 - overlap).clamp(0.0, 1.0).sqrt())
}

/// Similarity `tr(Â₁'Â₂Â₂'Â₁ / p²) / k` of two normalized loading matrices.
pub fn space_similarity(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(a1, a2)?;
    Ok(projection_overlap(a1, a2))
}

/// `‖A'B‖_F² / (k p²)`.
fn projection_overlap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (p, k) = a.shape();
    let cross = a.transpose() * b;
    cross.norm_squared() / (k as f64 * (p as f64).powi(2))
}

fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(MqfError::DimensionMismatch(format!(
            "loading shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.ncols() == 0 || a.nrows() == 0 {
        return Err(MqfError::DimensionMismatch("empty loading matrix".into()));
    }
    Ok(())
}
