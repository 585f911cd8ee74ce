use nalgebra::DMatrix;

use crate::error::{MqfError, Result};
use crate::loss::common_component;
use crate::model::{FitResult, MatrixPanel, QuantileLevel};

/// Residuals this close to zero are interpolated points of the fit and say
/// nothing about the error density.
const ZERO_RESIDUAL: f64 = 1e-10;

/// Plug-in ingredients of the asymptotic variance of the loading estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticStats {
    /// `Φ̂_i` for every row `i`.
    pub phi_i: Vec<DMatrix<f64>>,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Error density at zero, assumed common to all entries.
    pub density_at_zero: f64,
    /// Bandwidth used for `density_at_zero`.
    pub bandwidth: f64,
}

impl AsymptoticStats {
    /// Asymptotic variance of `√(T p2) (R̂_il - R_il)` under i.i.d. factors:
    /// `τ(1-τ) / (f(0)² σ_l)`.
    pub fn loading_variance(&self, tau: QuantileLevel, l: usize) -> f64 {
        let t = tau.value();
        t * (1.0 - t) / (self.density_at_zero.powi(2) * self.sigma1[l])
    }
}

/// Estimates `f_e(0)` with a Gaussian kernel density of the pooled residuals
/// shifted so that their τ-quantile is zero (Silverman bandwidth unless
/// given), and `Φ̂_i = f̂(0)/(T p2) Σ_{t,j observed} F_t c_j c_j' F_t'`.
pub fn asymptotic_stats(
    panel: &MatrixPanel,
    fit: &FitResult,
    tau: QuantileLevel,
    density_bandwidth: Option<f64>,
) -> Result<AsymptoticStats> {
    let theta = &fit.params;
    if theta.dims() != panel.dims() {
        return Err(MqfError::DimensionMismatch(format!(
            "fit has (T, p1, p2) = {:?} but the panel has {:?}",
            theta.dims(),
            panel.dims()
        )));
    }
    let (periods, p1, p2) = panel.dims();
    let mut resid = Vec::with_capacity(panel.n_observed());
    for (t, common) in common_component(theta).iter().enumerate() {
        for i in 0..p1 {
            for j in 0..p2 {
                if panel.is_observed(t, i, j) {
                    let u = panel.value(t, i, j) - common[(i, j)];
                    if u.abs() > ZERO_RESIDUAL {
                        resid.push(u);
                    }
                }
            }
        }
    }
    if resid.len() < 2 {
        return Err(MqfError::Degenerate(
            "fewer than two non-zero residuals".into(),
        ));
    }
    resid.sort_by(f64::total_cmp);
    let shift = sorted_quantile(&resid, tau.value());
    resid.iter_mut().for_each(|u| *u -= shift);

    let n = resid.len() as f64;
    let bandwidth = match density_bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(MqfError::InvalidConfig(format!("density bandwidth {h}"))),
        None => silverman(&resid)?,
    };
    let norm = 1.0 / (n * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let density_at_zero = norm
        * resid
            .iter()
            .map(|u| (-0.5 * (u / bandwidth).powi(2)).exp())
            .sum::<f64>();

    let k1 = theta.k1();
    let fc: Vec<DMatrix<f64>> = theta.f.iter().map(|ft| ft * theta.c.transpose()).collect();
    let full_outer = outer_sum(&fc, |_, _| true, k1, p2);
    let scale = density_at_zero / (periods * p2) as f64;
    let phi_i = (0..p1)
        .map(|i| {
            let m = if panel.is_fully_observed() {
                full_outer.clone()
            } else {
                outer_sum(&fc, |t, j| panel.is_observed(t, i, j), k1, p2)
            };
            m * scale
        })
        .collect();
    Ok(AsymptoticStats {
        phi_i,
        sigma1: fit.sigma1.clone(),
        sigma2: fit.sigma2.clone(),
        density_at_zero,
        bandwidth,
    })
}

/// `Σ_{(t,j) kept} (F_t c_j)(F_t c_j)'`.
fn outer_sum(
    fc: &[DMatrix<f64>],
    keep: impl Fn(usize, usize) -> bool,
    k1: usize,
    p2: usize,
) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(k1, k1);
    for (t, m) in fc.iter().enumerate() {
        for j in 0..p2 {
            if keep(t, j) {
                let v = m.column(j);
                acc += v * v.transpose();
            }
        }
    }
    acc
}

/// Type-7 sample quantile of sorted data.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `0.9 min(sd, IQR/1.34) n^{-1/5}` on sorted-then-shifted data.
fn silverman(data: &[f64]) -> Result<f64> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = sorted_quantile(data, 0.75) - sorted_quantile(data, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(MqfError::Degenerate("residuals have zero spread".into()));
    }
    Ok(0.9 * spread * n.powf(-0.2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(sorted_quantile(&s, 0.5), 3.0);
        assert_eq!(sorted_quantile(&s, 0.0), 1.0);
        assert!((sorted_quantile(&s, 0.1) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn zero_spread_is_degenerate() {
        assert!(matches!(
            silverman(&[2.0, 2.0, 2.0]),
            Err(MqfError::Degenerate(_))
        ));
    }
}
