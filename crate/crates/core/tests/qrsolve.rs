mod common;

use common::*;
use mqf_core::qrsolve::{solve_qr, solve_qr_smoothed, DenseDesign, Design, KronDesign, QrProblem};
use mqf_core::{build_kernel, QuantileLevel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn tau(v: f64) -> QuantileLevel {
    QuantileLevel::new(v).unwrap()
}

/// Design with an intercept column followed by Gaussian regressors, and
/// responses `x'β0 + scale·noise`.
fn regression(seed: u64, n: usize, d: usize, scale: f64) -> (DenseDesign, Vec<f64>, Vec<f64>) {
    let mut g = rng(seed);
    let mut x = gaussian(&mut g, n, d);
    x.column_mut(0).fill(1.0);
    let beta0: Vec<f64> = (0..d).map(|k| 1.0 - 0.5 * k as f64).collect();
    let y = (0..n)
        .map(|i| {
            let fit: f64 = (0..d).map(|k| x[(i, k)] * beta0[k]).sum();
            fit + scale * g.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (DenseDesign::from_matrix(&x).unwrap(), y, beta0)
}

#[test]
fn exact_fit_is_recovered() {
    let (design, y, beta0) = regression(1, 60, 4, 0.0);
    let problem = QrProblem::new(&y, &design, tau(0.3), None).unwrap();
    for warm in [None, Some(vec![0.0; 4]), Some(vec![5.0, -3.0, 2.0, 1.0])] {
        let sol = solve_qr(&problem, warm.as_deref(), 1e-9).unwrap();
        for (b, b0) in sol.beta.iter().zip(&beta0) {
            assert!((b - b0).abs() < 1e-6, "{:?}", sol.beta);
        }
        assert!(sol.objective < 1e-9);
    }
}

/// Checks the subgradient condition at a basic solution: with `Z` the
/// zero-residual rows, some `a_i ∈ [τ-1, τ]` on `Z` must balance
/// `Σ_{i∉Z} ψ_τ(r_i) x_i`.
fn certificate_holds(x: &DMatrix<f64>, y: &[f64], beta: &[f64], t: f64) -> bool {
    let (n, d) = x.shape();
    let b = DVector::from_column_slice(beta);
    let r: Vec<f64> = (0..n).map(|i| y[i] - (x.row(i) * &b)[(0, 0)]).collect();
    let zero: Vec<usize> = (0..n).filter(|&i| r[i].abs() < 1e-8).collect();
    if zero.len() != d {
        return false;
    }
    let mut g = DVector::zeros(d);
    for i in (0..n).filter(|i| !zero.contains(i)) {
        let psi = if r[i] < 0.0 { t - 1.0 } else { t };
        g += x.row(i).transpose() * psi;
    }
    let xz = DMatrix::from_fn(d, d, |a, k| x[(zero[k], a)]);
    let a = xz.lu().solve(&(-g)).unwrap();
    a.iter().all(|&v| v >= t - 1.0 - 1e-9 && v <= t + 1e-9)
}

#[test]
fn solution_satisfies_optimality_certificate() {
    for seed in 0..5 {
        let (design, y, _) = regression(seed, 80, 3, 1.0);
        let dense = DMatrix::from_fn(80, 3, |i, k| design.row(i)[k]);
        for &t in &[0.2, 0.5, 0.75] {
            let problem = QrProblem::new(&y, &design, tau(t), None).unwrap();
            let sol = solve_qr(&problem, Some(&[0.0; 3]), 1e-9).unwrap();
            assert!(sol.certified);
            assert!(
                certificate_holds(&dense, &y, &sol.beta, t),
                "seed {seed} tau {t}"
            );
        }
    }
}

#[test]
fn cold_and_warm_starts_agree() {
    let (design, y, _) = regression(9, 120, 3, 2.0);
    let problem = QrProblem::new(&y, &design, tau(0.6), None).unwrap();
    let cold = solve_qr(&problem, None, 1e-9).unwrap();
    let warm = solve_qr(&problem, Some(&[0.3, -0.2, 0.1]), 1e-9).unwrap();
    assert!((cold.objective - warm.objective).abs() <= 1e-7 * warm.objective);
}

#[test]
fn kron_design_problem_matches_dense_expansion() {
    let mut g = rng(4);
    let (r, c) = (gaussian(&mut g, 7, 2), gaussian(&mut g, 5, 2));
    let kd = KronDesign::new(&r, &c);
    let mut data = vec![0.0; 35 * 4];
    for idx in 0..35 {
        kd.row_into(idx, &mut data[idx * 4..(idx + 1) * 4]);
    }
    let dense = DenseDesign::from_row_major(35, 4, data).unwrap();
    let y: Vec<f64> = (0..35).map(|_| g.sample(StandardNormal)).collect();
    let a = solve_qr(
        &QrProblem::new(&y, &kd, tau(0.4), None).unwrap(),
        Some(&[0.0; 4]),
        1e-9,
    )
    .unwrap();
    let b = solve_qr(
        &QrProblem::new(&y, &dense, tau(0.4), None).unwrap(),
        Some(&[0.0; 4]),
        1e-9,
    )
    .unwrap();
    assert!((a.objective - b.objective).abs() < 1e-10 * (1.0 + b.objective));
}

#[test]
fn smoothed_large_bandwidth_matches_grid() {
    // Intercept only, every residual inside the kernel support.
    let y = [0.1, 0.45, -0.3, 0.8, 0.05, -0.6, 0.35];
    let design = DenseDesign::intercept(y.len());
    let kernel = build_kernel(2, 10.0).unwrap();
    let t = 0.35;
    let problem = QrProblem::new(&y, &design, tau(t), None).unwrap();
    let sol = solve_qr_smoothed(&problem, &kernel, Some(&[0.0]), 1e-12).unwrap();
    let loss = |b: f64| y.iter().map(|v| kernel.loss(v - b, t)).sum::<f64>();
    let (mut best, mut arg) = (f64::INFINITY, 0.0);
    for k in 0..=200_000 {
        let b = -1.0 + k as f64 * 1e-5;
        let v = loss(b);
        if v < best {
            (best, arg) = (v, b);
        }
    }
    assert!(
        (sol.beta[0] - arg).abs() < 2e-5,
        "{} vs {}",
        sol.beta[0],
        arg
    );
    assert!((sol.objective - best).abs() < 1e-9);
}

#[test]
fn smoothed_exact_fit() {
    let (design, y, beta0) = regression(2, 50, 3, 0.0);
    let problem = QrProblem::new(&y, &design, tau(0.5), None).unwrap();
    let kernel = build_kernel(4, 0.2).unwrap();
    let sol = solve_qr_smoothed(&problem, &kernel, None, 1e-10).unwrap();
    for (b, b0) in sol.beta.iter().zip(&beta0) {
        assert!((b - b0).abs() < 1e-6);
    }
}

#[test]
fn smoothed_solution_approaches_unsmoothed() {
    let (design, y, _) = regression(3, 40, 2, 1.0);
    let problem = QrProblem::new(&y, &design, tau(0.5), None).unwrap();
    let exact = solve_qr(&problem, None, 1e-9).unwrap();
    let gaps: Vec<f64> = (1..=5)
        .map(|e| {
            let kernel = build_kernel(2, 10f64.powi(-e)).unwrap();
            let s = solve_qr_smoothed(&problem, &kernel, None, 1e-10).unwrap();
            s.beta
                .iter()
                .zip(&exact.beta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(gaps[4] < 1e-4, "{gaps:?}");
    assert!(gaps[4] <= gaps[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn never_worse_than_warm_start(seed in 0u64..10_000, t in 0.05f64..0.95, w in prop::collection::vec(-3.0f64..3.0, 3)) {
        let (design, y, _) = regression(seed, 50, 3, 1.5);
        let problem = QrProblem::new(&y, &design, tau(t), None).unwrap();
        let sol = solve_qr(&problem, Some(&w), 1e-9).unwrap();
        prop_assert!(sol.objective <= problem.objective(&w));
        prop_assert!((problem.objective(&sol.beta) - sol.objective).abs() <= 1e-12 * (1.0 + sol.objective));
    }

    #[test]
    fn scale_equivariance(seed in 0u64..10_000, c in 0.1f64..20.0) {
        let (design, y, _) = regression(seed, 45, 3, 1.0);
        let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
        let a = solve_qr(&QrProblem::new(&y, &design, tau(0.4), None).unwrap(), Some(&[0.0; 3]), 1e-9).unwrap();
        let b = solve_qr(&QrProblem::new(&scaled, &design, tau(0.4), None).unwrap(), Some(&[0.0; 3]), 1e-9).unwrap();
        prop_assert!((b.objective - c * a.objective).abs() <= 1e-9 * b.objective);
        for (x, z) in a.beta.iter().zip(&b.beta) {
            prop_assert!((c * x - z).abs() <= 1e-6 * c.max(1.0));
        }
    }

    #[test]
    fn masked_rows_are_excluded(seed in 0u64..10_000) {
        let (design, y, _) = regression(seed, 40, 2, 1.0);
        let mask: Vec<bool> = (0..40).map(|i| i % 4 != 1).collect();
        let masked = QrProblem::new(&y, &design, tau(0.5), Some(&mask)).unwrap();
        let a = solve_qr(&masked, Some(&[0.0; 2]), 1e-9).unwrap();
        let keep: Vec<usize> = (0..40).filter(|&i| mask[i]).collect();
        let sub_x = DMatrix::from_fn(keep.len(), 2, |r, k| design.row(keep[r])[k]);
        let sub_y: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
        let sub_design = DenseDesign::from_matrix(&sub_x).unwrap();
        let b = solve_qr(&QrProblem::new(&sub_y, &sub_design, tau(0.5), None).unwrap(), Some(&[0.0; 2]), 1e-9).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 1e-10 * (1.0 + b.objective));
    }
}
