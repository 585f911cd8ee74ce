use nalgebra::DMatrix;

use crate::error::{MqfError, Result};
use crate::linalg::{orthonormal_basis, sym_eigen_desc};
use crate::model::FactorParams;

/// Entries at or below this magnitude are skipped by the sign convention.
pub const SIGN_TOL: f64 = 1e-10;
/// Adjacent factor second-moment eigenvalues closer than this (relative to
/// the largest) are reported as tied.
pub const TIE_TOL: f64 = 1e-8;
const RANK_TOL: f64 = 1e-10;

/// Normalized parameters with the factor second-moment diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub params: FactorParams,
    /// Diagonal of `Σ_t F_t F_t' / T`, descending.
    pub sigma1: Vec<f64>,
    /// Diagonal of `Σ_t F_t' F_t / T`, descending.
    pub sigma2: Vec<f64>,
    /// Some eigenvalues coincided, so the order of those columns is arbitrary.
    pub tied: bool,
}

/// Rotates θ into the identified form `R'R/p1 = I`, `C'C/p2 = I`, diagonal
/// descending factor second moments, and positive leading loading entries.
/// The common components are unchanged.
pub fn normalize(theta: &FactorParams) -> Result<Normalized> {
    normalize_impl(theta, true)
}

/// As `normalize`, but completes the loading bases instead of failing when
/// `R` or `C` lose rank, which happens when redundant factors die out.
pub(crate) fn normalize_lenient(theta: &FactorParams) -> Normalized {
    normalize_impl(theta, false).expect("lenient normalization does not fail")
}

fn normalize_impl(theta: &FactorParams, strict: bool) -> Result<Normalized> {
    let (periods, p1, p2) = theta.dims();
    let (k1, k2) = (theta.k1(), theta.k2());
    if k1 > p1 || k2 > p2 {
        return Err(MqfError::DimensionMismatch(format!(
            "({k1}, {k2}) factors exceed the ({p1}, {p2}) dimensions"
        )));
    }
    let (ur, rank_r) = orthonormal_basis(&theta.r, RANK_TOL);
    let (uc, rank_c) = orthonormal_basis(&theta.c, RANK_TOL);
    if strict && (rank_r < k1 || rank_c < k2) {
        return Err(MqfError::RankDeficient(format!(
            "loadings have ranks ({rank_r}, {rank_c}) for ({k1}, {k2}) factors"
        )));
    }
    let qr = ur.transpose() * &theta.r;
    let qc = uc.transpose() * &theta.c;
    let qct = qc.transpose();
    let g: Vec<DMatrix<f64>> = theta.f.iter().map(|ft| &qr * ft * &qct).collect();

    let scale = (periods * p1 * p2) as f64;
    let mut s1 = DMatrix::zeros(k1, k1);
    let mut s2 = DMatrix::zeros(k2, k2);
    for gt in &g {
        s1 += gt * gt.transpose();
        s2 += gt.transpose() * gt;
    }
    let (e1, gamma1) = sym_eigen_desc(&(s1 / scale));
    let (e2, gamma2) = sym_eigen_desc(&(s2 / scale));

    let mut r = &ur * &gamma1 * (p1 as f64).sqrt();
    let mut c = &uc * &gamma2 * (p2 as f64).sqrt();
    let g1t = gamma1.transpose();
    let root = (scale / periods as f64).sqrt();
    let mut f: Vec<DMatrix<f64>> = g.iter().map(|gt| &g1t * gt * &gamma2 / root).collect();

    for l in 0..k1 {
        if leading_sign(&r, l) < 0.0 {
            r.column_mut(l).neg_mut();
            for ft in &mut f {
                ft.row_mut(l).neg_mut();
            }
        }
    }
    for l in 0..k2 {
        if leading_sign(&c, l) < 0.0 {
            c.column_mut(l).neg_mut();
            for ft in &mut f {
                ft.column_mut(l).neg_mut();
            }
        }
    }

    let tied = has_ties(&e1) || has_ties(&e2);
    Ok(Normalized {
        params: FactorParams { r, c, f },
        sigma1: e1.into_iter().map(|v| v.max(0.0)).collect(),
        sigma2: e2.into_iter().map(|v| v.max(0.0)).collect(),
        tied,
    })
}

fn leading_sign(m: &DMatrix<f64>, col: usize) -> f64 {
    m.column(col)
        .iter()
        .find(|v| v.abs() > SIGN_TOL)
        .map_or(1.0, |v| v.signum())
}

fn has_ties(desc: &[f64]) -> bool {
    let top = desc.first().map_or(0.0, |v| v.abs()).max(f64::MIN_POSITIVE);
    desc.windows(2)
        .any(|w| (w[0] - w[1]).abs() <= TIE_TOL * top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rel_identity_error, rel_off_diagonal};
    use crate::loss::common_component;

    fn sample_theta() -> FactorParams {
        let r = DMatrix::from_fn(6, 2, |i, j| {
            ((i * 3 + j * 5) as f64 * 0.7).sin() + 0.1 * j as f64
        });
        let c = DMatrix::from_fn(4, 2, |i, j| ((i * 2 + j * 7) as f64 * 1.3).cos());
        let f = (0..5)
            .map(|t| {
                DMatrix::from_fn(2, 2, |a, b| {
                    ((t * 4 + a * 2 + b) as f64 * 0.9).sin() * (1.0 + a as f64)
                })
            })
            .collect();
        FactorParams::new(r, c, f).unwrap()
    }

    #[test]
    fn identification_constraints_hold() {
        let theta = sample_theta();
        let n = normalize(&theta).unwrap();
        let p = &n.params;
        assert!(rel_identity_error(&(p.r.transpose() * &p.r / 6.0)) < 1e-12);
        assert!(rel_identity_error(&(p.c.transpose() * &p.c / 4.0)) < 1e-12);
        let m1 = p.row_second_moment();
        let m2 = p.col_second_moment();
        assert!(rel_off_diagonal(&m1) < 1e-10);
        assert!(rel_off_diagonal(&m2) < 1e-10);
        assert!(m1[(0, 0)] >= m1[(1, 1)]);
        assert!((m1[(0, 0)] - n.sigma1[0]).abs() < 1e-10);
        assert!((m2[(1, 1)] - n.sigma2[1]).abs() < 1e-10);
        for (a, b) in common_component(&theta).iter().zip(common_component(p)) {
            assert!((a - b).amax() < 1e-10);
        }
    }

    #[test]
    fn idempotent() {
        let once = normalize(&sample_theta()).unwrap().params;
        let twice = normalize(&once).unwrap().params;
        assert!((&once.r - &twice.r).amax() < 1e-10);
        assert!((&once.c - &twice.c).amax() < 1e-10);
    }

    #[test]
    fn rank_deficiency_is_an_error() {
        let mut theta = sample_theta();
        let col = theta.r.column(0).into_owned();
        theta.r.set_column(1, &col);
        assert!(matches!(normalize(&theta), Err(MqfError::RankDeficient(_))));
        let n = normalize_lenient(&theta);
        for (a, b) in common_component(&theta)
            .iter()
            .zip(common_component(&n.params))
        {
            assert!((a - b).amax() < 1e-10);
        }
    }
}
