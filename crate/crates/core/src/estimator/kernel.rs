//! Higher-order polynomial smoothing kernels on `[-1, 1]`.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};

use crate::error::{MqfError, Result};

/// An order-`m` kernel `k(z)` supported on `[-1, 1]`, its survival function
/// `K(z) = 1 - ∫_{-1}^{z} k`, and a bandwidth `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    order_m: usize,
    /// Coefficients of `k(z)` in ascending powers of `z`.
    poly_coeffs: Vec<f64>,
    /// Coefficients of an antiderivative `P` of `k` with `P(-1) = 0`.
    antiderivative: Vec<f64>,
    h: f64,
}

const MOMENT_TOL: f64 = 1e-10;

impl KernelSpec {
    /// Validates a user-supplied polynomial kernel.
    pub fn from_coeffs(order_m: usize, poly_coeffs: Vec<f64>, h: f64) -> Result<Self> {
        if order_m < 2 || !order_m.is_multiple_of(2) {
            return Err(MqfError::InvalidKernel(format!(
                "order must be even and at least 2, got {order_m}"
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(MqfError::InvalidKernel(format!(
                "bandwidth must be positive, got {h}"
            )));
        }
        if poly_coeffs.is_empty() || poly_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(MqfError::InvalidKernel(
                "coefficients must be finite".into(),
            ));
        }
        if poly_coeffs.iter().skip(1).step_by(2).any(|c| *c != 0.0) {
            return Err(MqfError::InvalidKernel("kernel must be symmetric".into()));
        }
        for s in 0..=order_m {
            let mom = poly_moment(&poly_coeffs, s);
            let target = if s == 0 { 1.0 } else { 0.0 };
            if s < order_m && (mom - target).abs() > MOMENT_TOL {
                return Err(MqfError::InvalidKernel(format!(
                    "moment {s} equals {mom}, expected {target}"
                )));
            }
            if s == order_m && mom.abs() <= MOMENT_TOL {
                return Err(MqfError::InvalidKernel(format!(
                    "moment {order_m} vanishes; kernel order is higher than declared"
                )));
            }
        }
        let deriv = poly_derivative(&poly_coeffs);
        for z in [-1.0, 1.0] {
            if poly_eval(&poly_coeffs, z).abs() > MOMENT_TOL
                || poly_eval(&deriv, z).abs() > MOMENT_TOL
            {
                return Err(MqfError::InvalidKernel(
                    "kernel and its derivative must vanish at the support edges".into(),
                ));
            }
        }
        let mut antiderivative = vec![0.0; poly_coeffs.len() + 1];
        for (n, c) in poly_coeffs.iter().enumerate() {
            antiderivative[n + 1] = c / (n + 1) as f64;
        }
        antiderivative[0] = -poly_eval(&antiderivative, -1.0);
        Ok(Self {
            order_m,
            poly_coeffs,
            antiderivative,
            h,
        })
    }

    pub fn order_m(&self) -> usize {
        self.order_m
    }

    pub fn poly_coeffs(&self) -> &[f64] {
        &self.poly_coeffs
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn with_bandwidth(&self, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(MqfError::InvalidKernel(format!(
                "bandwidth must be positive, got {h}"
            )));
        }
        Ok(Self { h, ..self.clone() })
    }

    /// `k(z)`, zero outside `[-1, 1]`.
    pub fn density(&self, z: f64) -> f64 {
        if z.abs() >= 1.0 {
            0.0
        } else {
            poly_eval(&self.poly_coeffs, z)
        }
    }

    /// `k'(z)`, zero outside `[-1, 1]`.
    pub fn density_derivative(&self, z: f64) -> f64 {
        if z.abs() >= 1.0 {
            0.0
        } else {
            self.derivative_at(z)
        }
    }

    /// `K(z) = 1 - ∫_{-1}^{z} k(s) ds`: 1 below the support, 0 above it.
    pub fn survival(&self, z: f64) -> f64 {
        if z <= -1.0 {
            1.0
        } else if z >= 1.0 {
            0.0
        } else {
            1.0 - poly_eval(&self.antiderivative, z)
        }
    }

    /// Smoothed check loss of one residual: `[τ - K(u/h)] u`.
    #[inline]
    pub fn loss(&self, u: f64, tau: f64) -> f64 {
        (tau - self.survival(u / self.h)) * u
    }

    /// First and second derivative of [`Self::loss`] in `u`.
    #[inline]
    pub fn loss_derivatives(&self, u: f64, tau: f64) -> (f64, f64) {
        let z = u / self.h;
        if z.abs() >= 1.0 {
            let slope = if z > 0.0 { tau } else { tau - 1.0 };
            return (slope, 0.0);
        }
        let k = poly_eval(&self.poly_coeffs, z);
        let dk = self.derivative_at(z);
        let first = tau - (1.0 - poly_eval(&self.antiderivative, z)) + z * k;
        let second = (2.0 * k + z * dk) / self.h;
        (first, second)
    }

    fn derivative_at(&self, z: f64) -> f64 {
        let mut acc = 0.0;
        for n in (1..self.poly_coeffs.len()).rev() {
            acc = acc * z + self.poly_coeffs[n] * n as f64;
        }
        acc
    }
}

/// Builds the symmetric order-`m` kernel `k(z) = (1 - z²)³ q(z)` where `q` is
/// the even polynomial of degree `m - 2` fixed by `∫k = 1` and
/// `∫z^s k = 0` for even `s = 2, ..., m - 2`.
///
/// The moment system is solved in exact rational arithmetic.
pub fn build_kernel(order_m: usize, h: f64) -> Result<KernelSpec> {
    if order_m < 2 || !order_m.is_multiple_of(2) {
        return Err(MqfError::InvalidKernel(format!(
            "order must be even and at least 2, got {order_m}"
        )));
    }
    let n = order_m / 2;
    // Gram entries ∫_{-1}^{1} z^{2(s+l)} (1-z²)³ dz.
    let gram = |e: usize| -> BigRational {
        let two = BigRational::from_integer(BigInt::from(2));
        let term = |d: usize, c: i64| BigRational::new(BigInt::from(c), BigInt::from(2 * e + d));
        two * (term(1, 1) + term(3, -3) + term(5, 3) + term(7, -1))
    };
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|s| (0..n).map(|l| gram(s + l)).collect())
        .collect();
    let mut b: Vec<BigRational> = (0..n)
        .map(|s| {
            if s == 0 {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        })
        .collect();
    let q = solve_rational(&mut a, &mut b).ok_or_else(|| {
        MqfError::InvalidKernel(format!("singular moment system for order {order_m}"))
    })?;

    // Multiply q(z) = Σ q_l z^{2l} by (1 - z²)³ = 1 - 3z² + 3z⁴ - z⁶.
    let weight = [1i64, 0, -3, 0, 3, 0, -1];
    let mut coeffs = vec![BigRational::zero(); 2 * (n - 1) + weight.len()];
    for (l, ql) in q.iter().enumerate() {
        for (w, &wc) in weight.iter().enumerate() {
            if wc != 0 {
                coeffs[2 * l + w] += ql * BigRational::from_integer(BigInt::from(wc));
            }
        }
    }
    let coeffs: Vec<f64> = coeffs
        .iter()
        .map(|c| c.to_f64().expect("finite rational coefficient"))
        .collect();
    KernelSpec::from_coeffs(order_m, coeffs, h)
}

/// `h = T^{-2c}` for an exponent `c` strictly inside `(1/m, 1/6)`.
pub fn default_bandwidth(periods: usize, order_m: usize, c_exponent: f64) -> Result<f64> {
    if periods == 0 || order_m == 0 {
        return Err(MqfError::InvalidConfig(
            "bandwidth needs T >= 1 and a positive kernel order".into(),
        ));
    }
    let lower = 1.0 / order_m as f64;
    if !(c_exponent > lower && c_exponent < 1.0 / 6.0) {
        return Err(MqfError::InvalidConfig(format!(
            "bandwidth exponent {c_exponent} must lie strictly between 1/{order_m} and 1/6"
        )));
    }
    Ok((periods as f64).powf(-2.0 * c_exponent))
}

fn solve_rational(a: &mut [Vec<BigRational>], b: &mut [BigRational]) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = &a[row][col] / &a[col][col];
            let pivot = a[col].clone();
            for (v, p) in a[row].iter_mut().zip(&pivot).skip(col) {
                *v -= &factor * p;
            }
            let delta = &factor * &b[col];
            b[row] -= delta;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc -= &a[row][k] * &x[k];
        }
        x[row] = acc / &a[row][row];
    }
    Some(x)
}

fn poly_eval(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, c)| c * n as f64)
        .collect()
}

/// `∫_{-1}^{1} z^s k(z) dz` for a polynomial `k`.
fn poly_moment(coeffs: &[f64], s: usize) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .filter(|(n, _)| (n + s).is_multiple_of(2))
        .map(|(n, c)| c * 2.0 / (n + s + 1) as f64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule on [-1, 1]; independent of the exact moment code.
    fn simpson(f: impl Fn(f64) -> f64) -> f64 {
        let n = 20_000;
        let step = 2.0 / n as f64;
        let mut acc = f(-1.0) + f(1.0);
        for k in 1..n {
            let z = -1.0 + k as f64 * step;
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(z);
        }
        acc * step / 3.0
    }

    #[test]
    fn order_two_is_scaled_triweight() {
        let k = build_kernel(2, 1.0).unwrap();
        // ∫(1-z²)³ = 32/35.
        let c = 35.0 / 32.0;
        let expected = [c, 0.0, -3.0 * c, 0.0, 3.0 * c, 0.0, -c];
        for (a, b) in k.poly_coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn quadrature_moments_match_order() {
        for m in [2, 4, 6, 8, 10] {
            let k = build_kernel(m, 0.5).unwrap();
            for s in 0..m {
                let mom = simpson(|z| z.powi(s as i32) * k.density(z));
                let target = if s == 0 { 1.0 } else { 0.0 };
                assert!((mom - target).abs() < 1e-10, "m={m} s={s} moment={mom}");
            }
            let top = simpson(|z| z.powi(m as i32) * k.density(z));
            assert!(top.abs() > 1e-6, "m={m}: top moment vanished");
        }
    }

    #[test]
    fn kernel_vanishes_smoothly_at_edges() {
        for m in [2, 4, 8] {
            let k = build_kernel(m, 1.0).unwrap();
            let d = poly_derivative(k.poly_coeffs());
            for z in [-1.0, 1.0] {
                assert!(poly_eval(k.poly_coeffs(), z).abs() < 1e-12);
                assert!(poly_eval(&d, z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn survival_function_limits() {
        let k = build_kernel(8, 0.3).unwrap();
        assert_eq!(k.survival(-1.5), 1.0);
        assert_eq!(k.survival(1.5), 0.0);
        assert!((k.survival(0.0) - 0.5).abs() < 1e-12);
        assert!(k.survival(-1.0 + 1e-9) > 1.0 - 1e-9);
    }

    #[test]
    fn loss_derivatives_match_finite_differences() {
        let k = build_kernel(8, 0.7).unwrap();
        let tau = 0.35;
        for &u in &[-0.6, -0.2, 0.05, 0.4, 0.69, 1.2] {
            let e = 1e-6;
            let fd1 = (k.loss(u + e, tau) - k.loss(u - e, tau)) / (2.0 * e);
            let (d1, d2) = k.loss_derivatives(u, tau);
            assert!((fd1 - d1).abs() < 1e-6, "u={u}: {fd1} vs {d1}");
            let fd2 =
                (k.loss_derivatives(u + e, tau).0 - k.loss_derivatives(u - e, tau).0) / (2.0 * e);
            assert!((fd2 - d2).abs() < 1e-4, "u={u}: {fd2} vs {d2}");
        }
    }

    #[test]
    fn bandwidth_rule() {
        let h = default_bandwidth(100, 8, 0.15).unwrap();
        assert!((h - 100f64.powf(-0.3)).abs() < 1e-15);
        assert!((h - 0.2512).abs() < 1e-4);
        assert!(default_bandwidth(100, 8, 0.125).is_err());
        assert!(default_bandwidth(100, 8, 0.2).is_err());
    }

    #[test]
    fn rejects_bad_kernels() {
        assert!(build_kernel(3, 1.0).is_err());
        assert!(build_kernel(4, 0.0).is_err());
        // Triweight declared as order 4 fails the second-moment condition.
        let tri = build_kernel(2, 1.0).unwrap();
        assert!(KernelSpec::from_coeffs(4, tri.poly_coeffs().to_vec(), 1.0).is_err());
    }
}
