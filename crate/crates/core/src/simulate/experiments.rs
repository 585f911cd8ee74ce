use nalgebra::DMatrix;
use rayon::prelude::*;

use super::dgp::{gen_panel, DgpConfig};
use crate::error::Result;
use crate::estimator::{fit, smoothed_fit, FitConfig, KernelSpec};
use crate::linalg::kron;
use crate::metrics::loading_distance;
use crate::model::QuantileLevel;
use crate::selection::{
    er_from_sigmas, overfit_sigmas, rm_from_sigmas, select_ic, vec_select_rm, IcSearch,
    SelectionMethod, DEFAULT_C0, DEFAULT_KMAX, DEFAULT_VEC_KMAX,
};

/// Factor-number rules compared by `run_selection_experiment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentMethod {
    Matrix(SelectionMethod),
    /// Rank minimization on the vectorized model, scored against `k1 k2`.
    VectorRm,
}

impl ExperimentMethod {
    pub fn label(self) -> String {
        match self {
            ExperimentMethod::Matrix(m) => format!("mqf-{}", m.short_name()),
            ExperimentMethod::VectorRm => "vqf-RM".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSettings {
    pub k1_max: usize,
    pub k2_max: usize,
    pub vec_k_max: usize,
    pub c0: f64,
    /// Solver controls; `k1`, `k2` and `seed` are overridden per fit.
    pub fit: FitConfig,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            k1_max: DEFAULT_KMAX,
            k2_max: DEFAULT_KMAX,
            vec_k_max: DEFAULT_VEC_KMAX,
            c0: DEFAULT_C0,
            fit: FitConfig::new(1, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub cell: DgpConfig,
    pub method: ExperimentMethod,
    pub mean_k1: f64,
    /// Mean of the second count; for the vectorized rule it equals `mean_k1`.
    pub mean_k2: f64,
    pub exact_frequency: f64,
}

/// Seed of replication `rep` of a cell.
fn rep_seed(cell: &DgpConfig, rep: usize) -> u64 {
    cell.seed.wrapping_add(rep as u64)
}

/// Mean selected numbers and exact-selection frequency for every cell and
/// method. Replication `rep` uses data seed `seed + rep`; RM and ER share
/// one over-fitted model per replication.
pub fn run_selection_experiment(
    cells: &[DgpConfig],
    tau: QuantileLevel,
    n_reps: usize,
    methods: &[ExperimentMethod],
    settings: &SelectionSettings,
) -> Result<Vec<SelectionRow>> {
    let mut rows = Vec::new();
    for cell in cells {
        let picks: Vec<Vec<(usize, usize, bool)>> = (0..n_reps)
            .into_par_iter()
            .map(|rep| selection_replication(cell, tau, rep, methods, settings))
            .collect::<Result<_>>()?;
        for (m, &method) in methods.iter().enumerate() {
            let n = n_reps.max(1) as f64;
            let (mut s1, mut s2, mut hits) = (0.0, 0.0, 0.0);
            for rep in &picks {
                let (a, b, exact) = rep[m];
                s1 += a as f64;
                s2 += b as f64;
                hits += exact as u8 as f64;
            }
            rows.push(SelectionRow {
                cell: cell.clone(),
                method,
                mean_k1: s1 / n,
                mean_k2: s2 / n,
                exact_frequency: hits / n,
            });
        }
    }
    Ok(rows)
}

fn selection_replication(
    cell: &DgpConfig,
    tau: QuantileLevel,
    rep: usize,
    methods: &[ExperimentMethod],
    settings: &SelectionSettings,
) -> Result<Vec<(usize, usize, bool)>> {
    let seed = rep_seed(cell, rep);
    let cfg = DgpConfig {
        seed,
        ..cell.clone()
    };
    let (panel, truth) = gen_panel(&cfg, tau)?;
    let truth_k = (truth.effective_k1, truth.effective_k2);
    let fit_cfg = FitConfig {
        seed,
        ..settings.fit.clone()
    };
    let needs_overfit = methods.iter().any(|m| {
        matches!(
            m,
            ExperimentMethod::Matrix(SelectionMethod::RankMinimization)
                | ExperimentMethod::Matrix(SelectionMethod::EigenvalueRatio)
        )
    });
    let sigmas = if needs_overfit {
        let (s1, s2, _) = overfit_sigmas(&panel, tau, settings.k1_max, settings.k2_max, &fit_cfg)?;
        Some((s1, s2))
    } else {
        None
    };
    methods
        .iter()
        .map(|&method| {
            Ok(match method {
                ExperimentMethod::Matrix(m) => {
                    let res = match m {
                        SelectionMethod::RankMinimization => {
                            let (s1, s2) = sigmas.clone().expect("over-fitted");
                            rm_from_sigmas(&panel, s1, s2)
                        }
                        SelectionMethod::EigenvalueRatio => {
                            let (s1, s2) = sigmas.clone().expect("over-fitted");
                            er_from_sigmas(&panel, s1, s2, settings.c0)
                        }
                        SelectionMethod::InformationCriterion => select_ic(
                            &panel,
                            tau,
                            settings.k1_max,
                            settings.k2_max,
                            &fit_cfg,
                            IcSearch::TwoPass,
                        )?,
                    };
                    (res.k1_hat, res.k2_hat, (res.k1_hat, res.k2_hat) == truth_k)
                }
                ExperimentMethod::VectorRm => {
                    let k = vec_select_rm(&panel, tau, settings.vec_k_max, &fit_cfg)?;
                    (k, k, k == truth_k.0 * truth_k.1)
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingRow {
    pub cell: DgpConfig,
    pub mean_d_r: f64,
    pub mean_d_c: f64,
    pub mean_d_w: f64,
}

/// Mean loading-space distances of `R̂`, `Ĉ` and `Ĉ ⊗ R̂` to the truth, with
/// the factor numbers set to the true effective ones.
pub fn run_loading_experiment(
    cells: &[DgpConfig],
    tau: QuantileLevel,
    n_reps: usize,
    fit_config: &FitConfig,
) -> Result<Vec<LoadingRow>> {
    cells
        .iter()
        .map(|cell| {
            let d: Vec<(f64, f64, f64)> = (0..n_reps)
                .into_par_iter()
                .map(|rep| loading_replication(cell, tau, rep, fit_config))
                .collect::<Result<_>>()?;
            let n = n_reps.max(1) as f64;
            Ok(LoadingRow {
                cell: cell.clone(),
                mean_d_r: d.iter().map(|x| x.0).sum::<f64>() / n,
                mean_d_c: d.iter().map(|x| x.1).sum::<f64>() / n,
                mean_d_w: d.iter().map(|x| x.2).sum::<f64>() / n,
            })
        })
        .collect()
}

/// Distances `(𝒟(R0, R̂), 𝒟(C0, Ĉ), 𝒟(W0, Ŵ))` of one replication.
pub fn loading_replication(
    cell: &DgpConfig,
    tau: QuantileLevel,
    rep: usize,
    fit_config: &FitConfig,
) -> Result<(f64, f64, f64)> {
    let seed = rep_seed(cell, rep);
    let (panel, truth) = gen_panel(
        &DgpConfig {
            seed,
            ..cell.clone()
        },
        tau,
    )?;
    let cfg = FitConfig {
        k1: truth.effective_k1,
        k2: truth.effective_k2,
        seed,
        ..fit_config.clone()
    };
    let est = fit(&panel, tau, &cfg)?.params;
    let d_r = loading_distance(&truth.params.r, &est.r)?;
    let d_c = loading_distance(&truth.params.c, &est.c)?;
    let d_w = loading_distance(
        &kron(&truth.params.c, &truth.params.r),
        &kron(&est.c, &est.r),
    )?;
    Ok((d_r, d_c, d_w))
}

/// Standardized first loading entry `√(T p2)(R̃₁₁ - R₁₁) f(0) √σ₁ / √(τ(1-τ))`
/// of the smoothed estimator over replications. The estimate is rotated onto
/// the truth first (see [`align_loadings`]); `f(0)` and `σ₁` come from the
/// true noise law and normalized truth.
pub fn run_clt_experiment(
    cfg: &DgpConfig,
    tau: QuantileLevel,
    n_reps: usize,
    kernel: &KernelSpec,
    fit_config: &FitConfig,
) -> Result<Vec<f64>> {
    (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let seed = rep_seed(cfg, rep);
            let (panel, truth) = gen_panel(
                &DgpConfig {
                    seed,
                    ..cfg.clone()
                },
                tau,
            )?;
            let fcfg = FitConfig {
                k1: truth.effective_k1,
                k2: truth.effective_k2,
                seed,
                ..fit_config.clone()
            };
            let est = smoothed_fit(&panel, tau, &fcfg, kernel)?.params;
            let aligned = align_loadings(&truth.params.r, &est.r);
            let (periods, _, p2) = panel.dims();
            let scale = cfg.theta_star;
            let f0 = truth.density_at_quantile / scale;
            let t = tau.value();
            let diff = aligned[(0, 0)] - truth.params.r[(0, 0)];
            Ok(
                ((periods * p2) as f64).sqrt() * diff * f0 * truth.sigma1[0].sqrt()
                    / (t * (1.0 - t)).sqrt(),
            )
        })
        .collect()
}

/// Rotates `est` onto `truth`: `est O` with `O` the orthogonal matrix
/// minimizing `‖est O - truth‖_F`. Undoes column permutations and sign flips
/// exactly, and also the arbitrary rotation between columns whose factor
/// variances nearly coincide.
pub fn align_loadings(truth: &DMatrix<f64>, est: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = (est.transpose() * truth).svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => est * (u * v_t),
        _ => est.clone(),
    }
}
