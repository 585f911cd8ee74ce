//! Check loss, its kernel-smoothed counterpart, and the panel objectives.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::estimator::KernelSpec;
use crate::model::{FactorParams, MatrixPanel, QuantileLevel};

/// `ρ_τ(u) = (τ - 1{u ≤ 0}) u`.
#[inline]
pub fn check_loss(u: f64, tau: QuantileLevel) -> f64 {
    check_loss_raw(u, tau.value())
}

#[inline]
pub(crate) fn check_loss_raw(u: f64, tau: f64) -> f64 {
    if u <= 0.0 {
        (tau - 1.0) * u
    } else {
        tau * u
    }
}

/// `R F_t C'` for every period.
pub fn common_component(theta: &FactorParams) -> Vec<DMatrix<f64>> {
    let ct = theta.c.transpose();
    theta.f.iter().map(|ft| &theta.r * ft * &ct).collect()
}

/// Empirical check loss over the observed entries, divided by `p1 p2 T`
/// whatever the number of observed entries.
pub fn objective(panel: &MatrixPanel, theta: &FactorParams, tau: QuantileLevel) -> Result<f64> {
    theta.check_panel(panel)?;
    let tau = tau.value();
    Ok(masked_sum(panel, theta, |u| check_loss_raw(u, tau)))
}

/// Smoothed objective `Σ [τ - K(u/h)] u / (p1 p2 T)` over observed entries.
pub fn smoothed_objective(
    panel: &MatrixPanel,
    theta: &FactorParams,
    tau: QuantileLevel,
    kernel: &KernelSpec,
) -> Result<f64> {
    theta.check_panel(panel)?;
    let tau = tau.value();
    Ok(masked_sum(panel, theta, |u| kernel.loss(u, tau)))
}

/// Sums `loss(X_ijt - (R F_t C')_ij)` over observed entries in a fixed
/// (t, i, j) order and divides by `p1 p2 T`.
fn masked_sum(panel: &MatrixPanel, theta: &FactorParams, loss: impl Fn(f64) -> f64) -> f64 {
    let (periods, p1, p2) = panel.dims();
    let ct = theta.c.transpose();
    let values = panel.values();
    let mask = panel.mask();
    let mut total = 0.0;
    for (t, ft) in theta.f.iter().enumerate() {
        let fitted = &theta.r * ft * &ct;
        for i in 0..p1 {
            let base = panel.index(t, i, 0);
            for j in 0..p2 {
                if mask[base + j] {
                    total += loss(values[base + j] - fitted[(i, j)]);
                }
            }
        }
    }
    total / (periods * p1 * p2) as f64
}
