//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order; eigenvectors are the matching columns.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable ordering on exact ties keeps the decomposition deterministic.
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Orthonormal basis `U` (p x k) of the column space of `a` (p x k), plus the
/// rank detected at relative tolerance `rel_tol`.
///
/// Directions missing from a rank-deficient `a` are completed with unit
/// vectors orthogonal to the rest, so `U'U = I` always holds and
/// `a = U (U' a)` holds exactly whenever `a` has full column rank.
pub fn orthonormal_basis(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let (p, k) = a.shape();
    assert!(k <= p, "basis requested for a wide matrix");
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let mut cols: Vec<(f64, DVector<f64>)> = (0..k)
        .map(|l| (svd.singular_values[l], u.column(l).into_owned()))
        .collect();
    cols.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let cutoff = rel_tol * smax.max(f64::MIN_POSITIVE);
    let rank = cols.iter().filter(|(s, _)| *s > cutoff).count();

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    for (_, v) in cols.iter().take(rank) {
        basis.push(v.clone());
    }
    let mut e = 0;
    while basis.len() < k {
        let mut v = DVector::zeros(p);
        v[e % p] = 1.0;
        e += 1;
        // Two Gram-Schmidt passes for numerical orthogonality.
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / norm);
        }
        assert!(e <= 2 * p + k, "basis completion failed");
    }
    (DMatrix::from_columns(&basis), rank)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// `‖m - I‖_F / ‖I‖_F` for a square `m`.
pub fn rel_identity_error(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let diff = m - DMatrix::<f64>::identity(n, n);
    diff.norm() / (n as f64).sqrt()
}

/// Largest off-diagonal magnitude relative to the largest diagonal magnitude.
pub fn rel_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let diag = (0..n).map(|i| m[(i, i)].abs()).fold(0.0_f64, f64::max);
    let mut off = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(m[(i, j)].abs());
            }
        }
    }
    if diag > 0.0 {
        off / diag
    } else {
        off
    }
}

/// Solves `a x = b` for a symmetric positive (semi)definite `a`.
///
/// Falls back to a `1e-10 * max(diag)` ridge when the Cholesky factorization
/// fails; the flag reports whether the ridge was needed.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, bool)> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Some((x, false));
        }
    }
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max);
    let ridge = 1e-10 * if scale > 0.0 { scale } else { 1.0 };
    let mut reg = a.clone();
    for i in 0..n {
        reg[(i, i)] += ridge;
    }
    let x = reg.cholesky()?.solve(b);
    x.iter().all(|v| v.is_finite()).then_some((x, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sym_eigen_desc(&m);
        assert_eq!(vals, vec![5.0, 3.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_completes_rank_deficient_input() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (u, rank) = orthonormal_basis(&a, 1e-12);
        assert_eq!(rank, 1);
        let utu = u.transpose() * &u;
        assert!(rel_identity_error(&utu) < 1e-12);
    }

    #[test]
    fn kron_matches_definition() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let b = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let k = kron(&a, &b);
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 6.0, 8.0]));
    }
}
