//! Estimating the numbers of row and column factors.
//!
//! All three rules start from a deliberately over-fitted model with
//! `(K1, K2)` factors. The normalized factor second moments of that fit are
//! diagonal, and only the first `k1` (resp. `k2`) diagonals carry signal.

use std::collections::BTreeMap;

use crate::error::{MqfError, Result};
use crate::estimator::{fit, FitConfig};
use crate::metrics::rate_l;
use crate::model::{FitResult, MatrixPanel, QuantileLevel};

/// Default ratio stabilizer of the eigenvalue-ratio rule.
pub const DEFAULT_C0: f64 = 1e-4;
/// Default over-fitted factor numbers.
pub const DEFAULT_KMAX: usize = 6;
/// Default maximum factor number of the vectorized model.
pub const DEFAULT_VEC_KMAX: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectionMethod {
    RankMinimization,
    InformationCriterion,
    EigenvalueRatio,
}

impl SelectionMethod {
    pub fn short_name(self) -> &'static str {
        match self {
            SelectionMethod::RankMinimization => "RM",
            SelectionMethod::InformationCriterion => "IC",
            SelectionMethod::EigenvalueRatio => "ER",
        }
    }

    pub fn from_short_name(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "RM" => Some(SelectionMethod::RankMinimization),
            "IC" => Some(SelectionMethod::InformationCriterion),
            "ER" => Some(SelectionMethod::EigenvalueRatio),
            _ => None,
        }
    }
}

/// How `select_ic` walks the candidate grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IcSearch {
    /// Fix `l2 = K2` and search `l1`, then fix `l1` and search `l2`.
    #[default]
    TwoPass,
    /// Every cell of `{1..K1} x {1..K2}`.
    FullGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub k1_hat: usize,
    pub k2_hat: usize,
    /// Descending diagonals of the over-fitted row factor second moment.
    pub sigma1_full: Vec<f64>,
    pub sigma2_full: Vec<f64>,
    pub method: SelectionMethod,
    /// Threshold for RM and IC, `c0` for ER.
    pub threshold_used: f64,
    /// Penalized objective of every evaluated `(l1, l2)` (IC only).
    pub ic_surface: Option<BTreeMap<(usize, usize), f64>>,
}

/// Fits `(K1, K2)` factors and returns the two descending diagonals with
/// the fit itself.
pub fn overfit_sigmas(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    k1_max: usize,
    k2_max: usize,
    config: &FitConfig,
) -> Result<(Vec<f64>, Vec<f64>, FitResult)> {
    let cfg = FitConfig {
        k1: k1_max,
        k2: k2_max,
        ..config.clone()
    };
    let result = fit(panel, tau, &cfg)?;
    Ok((result.sigma1.clone(), result.sigma2.clone(), result))
}

/// `(σ₁^{K1} + σ₁^{K2}) / 2`.
fn delta(sigma1: &[f64], sigma2: &[f64]) -> f64 {
    (sigma1[0] + sigma2[0]) / 2.0
}

fn count_above(sigmas: &[f64], threshold: f64) -> usize {
    sigmas.iter().filter(|&&s| s > threshold).count().max(1)
}

/// Rank minimization: counts diagonals above `δ L^{-2/3}`.
pub fn select_rm(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    k1_max: usize,
    k2_max: usize,
    config: &FitConfig,
) -> Result<SelectionResult> {
    let (s1, s2, _) = overfit_sigmas(panel, tau, k1_max, k2_max, config)?;
    Ok(rm_from_sigmas(panel, s1, s2))
}

pub(crate) fn rm_from_sigmas(panel: &MatrixPanel, s1: Vec<f64>, s2: Vec<f64>) -> SelectionResult {
    let (periods, p1, p2) = panel.dims();
    let l = rate_l(p1, p2, periods).value();
    let threshold = delta(&s1, &s2) * l.powf(-2.0 / 3.0);
    SelectionResult {
        k1_hat: count_above(&s1, threshold),
        k2_hat: count_above(&s2, threshold),
        sigma1_full: s1,
        sigma2_full: s2,
        method: SelectionMethod::RankMinimization,
        threshold_used: threshold,
        ic_surface: None,
    }
}

/// Eigenvalue ratio: `argmax_k σ_k / (σ_{k+1} + c0 L^{-2})` for each side,
/// ties going to the smaller `k`.
pub fn select_er(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    k1_max: usize,
    k2_max: usize,
    c0: f64,
    config: &FitConfig,
) -> Result<SelectionResult> {
    if k1_max < 2 || k2_max < 2 {
        return Err(MqfError::InvalidConfig(format!(
            "the eigenvalue ratio needs K1, K2 >= 2, got ({k1_max}, {k2_max})"
        )));
    }
    if !(c0 > 0.0) {
        return Err(MqfError::InvalidConfig(format!(
            "c0 must be positive, got {c0}"
        )));
    }
    let (s1, s2, _) = overfit_sigmas(panel, tau, k1_max, k2_max, config)?;
    Ok(er_from_sigmas(panel, s1, s2, c0))
}

pub(crate) fn er_from_sigmas(
    panel: &MatrixPanel,
    s1: Vec<f64>,
    s2: Vec<f64>,
    c0: f64,
) -> SelectionResult {
    let (periods, p1, p2) = panel.dims();
    let l = rate_l(p1, p2, periods).value();
    let floor = c0 / (l * l);
    SelectionResult {
        k1_hat: ratio_argmax(&s1, floor),
        k2_hat: ratio_argmax(&s2, floor),
        sigma1_full: s1,
        sigma2_full: s2,
        method: SelectionMethod::EigenvalueRatio,
        threshold_used: c0,
        ic_surface: None,
    }
}

fn ratio_argmax(sigmas: &[f64], floor: f64) -> usize {
    let mut best = (1, f64::NEG_INFINITY);
    for k in 1..sigmas.len() {
        let ratio = sigmas[k - 1] / (sigmas[k] + floor);
        if ratio > best.1 {
            best = (k, ratio);
        }
    }
    best.0
}

/// Information criterion: minimizes `M(θ̂^{l1 l2}) + (l1 + l2) δ L^{-1}`.
pub fn select_ic(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    k1_max: usize,
    k2_max: usize,
    config: &FitConfig,
    search: IcSearch,
) -> Result<SelectionResult> {
    let (periods, p1, p2) = panel.dims();
    let l = rate_l(p1, p2, periods).value();
    let fit_cell = |l1: usize, l2: usize| -> Result<FitResult> {
        let cfg = FitConfig {
            k1: l1,
            k2: l2,
            seed: cell_seed(config.seed, l1, l2),
            ..config.clone()
        };
        fit(panel, tau, &cfg)
    };
    let full = fit_cell(k1_max, k2_max)?;
    let threshold = delta(&full.sigma1, &full.sigma2) / l;
    let penalized = |l1: usize, l2: usize, obj: f64| obj + (l1 + l2) as f64 * threshold;

    let mut surface = BTreeMap::new();
    surface.insert((k1_max, k2_max), penalized(k1_max, k2_max, full.objective));
    let eval = |l1: usize, l2: usize, surface: &mut BTreeMap<(usize, usize), f64>| -> Result<f64> {
        if let Some(&v) = surface.get(&(l1, l2)) {
            return Ok(v);
        }
        let v = penalized(l1, l2, fit_cell(l1, l2)?.objective);
        surface.insert((l1, l2), v);
        Ok(v)
    };

    let (k1_hat, k2_hat) = match search {
        IcSearch::TwoPass => {
            let mut k1_hat = (1, f64::INFINITY);
            for l1 in 1..=k1_max {
                let v = eval(l1, k2_max, &mut surface)?;
                if v < k1_hat.1 {
                    k1_hat = (l1, v);
                }
            }
            let mut k2_hat = (1, f64::INFINITY);
            for l2 in 1..=k2_max {
                let v = eval(k1_hat.0, l2, &mut surface)?;
                if v < k2_hat.1 {
                    k2_hat = (l2, v);
                }
            }
            (k1_hat.0, k2_hat.0)
        }
        IcSearch::FullGrid => {
            let mut best = ((1, 1), f64::INFINITY);
            for l1 in 1..=k1_max {
                for l2 in 1..=k2_max {
                    let v = eval(l1, l2, &mut surface)?;
                    if v < best.1 {
                        best = ((l1, l2), v);
                    }
                }
            }
            best.0
        }
    };
    Ok(SelectionResult {
        k1_hat,
        k2_hat,
        sigma1_full: full.sigma1,
        sigma2_full: full.sigma2,
        method: SelectionMethod::InformationCriterion,
        threshold_used: threshold,
        ic_surface: Some(surface),
    })
}

/// Rank minimization on the vectorized model: every `X_t` becomes a
/// `p1 p2 x 1` matrix and only the row factor number is read off, which
/// estimates `k1 k2`.
pub fn vec_select_rm(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    k_max: usize,
    config: &FitConfig,
) -> Result<usize> {
    if k_max == 0 {
        return Err(MqfError::InvalidConfig("k_max must be at least 1".into()));
    }
    let vectorized = panel.vectorized();
    let (s1, s2, _) = overfit_sigmas(&vectorized, tau, k_max, 1, config)?;
    Ok(rm_from_sigmas(&vectorized, s1, s2).k1_hat)
}

/// Seed of one IC grid cell, mixed with splitmix64.
fn cell_seed(seed: u64, l1: usize, l2: usize) -> u64 {
    let mut z = seed ^ ((l1 as u64) << 32 | l2 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
