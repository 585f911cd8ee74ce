use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::kernel::KernelSpec;
use super::normalize::{normalize, normalize_lenient, Normalized};
use crate::error::{MqfError, Result};
use crate::loss::{objective, smoothed_objective};
use crate::metrics::theta_distance;
use crate::model::{FactorParams, FitResult, MatrixPanel, QuantileLevel};
use crate::qrsolve::{solve_qr, solve_qr_smoothed, DenseDesign, Design, KronDesign, QrProblem};

/// Controls for the alternating estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub k1: usize,
    pub k2: usize,
    pub max_outer_iters: usize,
    /// Stop when the objective changes by less than this fraction.
    pub obj_rel_tol: f64,
    /// Stop when `theta_distance` between sweeps falls below this.
    pub param_tol: f64,
    pub seed: u64,
    pub n_restarts: usize,
    /// Tolerance handed to every quantile regression subproblem.
    pub solver_tol: f64,
}

impl FitConfig {
    pub fn new(k1: usize, k2: usize) -> Self {
        Self {
            k1,
            k2,
            max_outer_iters: 100,
            obj_rel_tol: 1e-6,
            param_tol: 1e-5,
            seed: 0,
            n_restarts: 1,
            solver_tol: 1e-9,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, n_restarts: usize) -> Self {
        self.n_restarts = n_restarts;
        self
    }

    fn validate(&self, p1: usize, p2: usize) -> Result<()> {
        if self.k1 == 0 || self.k2 == 0 {
            return Err(MqfError::InvalidConfig(
                "factor numbers must be at least 1".into(),
            ));
        }
        if self.k1 > p1 || self.k2 > p2 {
            return Err(MqfError::InvalidConfig(format!(
                "(k1, k2) = ({}, {}) exceeds (p1, p2) = ({p1}, {p2})",
                self.k1, self.k2
            )));
        }
        if self.max_outer_iters == 0 || self.n_restarts == 0 {
            return Err(MqfError::InvalidConfig(
                "max_outer_iters and n_restarts must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("obj_rel_tol", self.obj_rel_tol),
            ("param_tol", self.param_tol),
            ("solver_tol", self.solver_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MqfError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Standard normal loadings and factors from a seeded ChaCha8 stream
/// (`R` column by column, then `C`, then every `F_t`), normalized.
pub fn init_random(
    p1: usize,
    p2: usize,
    periods: usize,
    k1: usize,
    k2: usize,
    seed: u64,
) -> Result<FactorParams> {
    if k1 == 0 || k2 == 0 || k1 > p1 || k2 > p2 || periods == 0 {
        return Err(MqfError::InvalidConfig(format!(
            "cannot draw ({k1}, {k2}) factors for (T, p1, p2) = ({periods}, {p1}, {p2})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw =
        |rows, cols| DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    let r = draw(p1, k1);
    let c = draw(p2, k2);
    let f = (0..periods).map(|_| draw(k1, k2)).collect();
    Ok(normalize(&FactorParams::new(r, c, f)?)?.params)
}

#[derive(Clone, Copy)]
enum Loss<'k> {
    Check,
    Smoothed(&'k KernelSpec),
}

/// Estimates θ at level `tau` by alternating exact minimization of the
/// check loss over `R`, then every `F_t`, then `C`.
pub fn fit(panel: &MatrixPanel, tau: QuantileLevel, config: &FitConfig) -> Result<FitResult> {
    check_slices(panel)?;
    config.validate(panel.p1(), panel.p2())?;
    let (periods, p1, p2) = panel.dims();
    let mut best: Option<FitResult> = None;
    for restart in 0..config.n_restarts {
        let init = init_random(
            p1,
            p2,
            periods,
            config.k1,
            config.k2,
            restart_seed(config.seed, restart),
        )?;
        let result = alternate(panel, tau, config, init, Loss::Check)?;
        if best
            .as_ref()
            .is_none_or(|b| result.objective < b.objective)
        {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Kernel-smoothed counterpart of `fit`. The alternation starts from the
/// unsmoothed estimate, so the result is the smoothed estimator closest to
/// it; the reported objective is the smoothed one.
pub fn smoothed_fit(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    config: &FitConfig,
    kernel: &KernelSpec,
) -> Result<FitResult> {
    let start = fit(panel, tau, config)?;
    alternate(panel, tau, config, start.params, Loss::Smoothed(kernel))
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed.wrapping_add(restart as u64)
}

fn check_slices(panel: &MatrixPanel) -> Result<()> {
    let (periods, p1, p2) = panel.dims();
    let mask = panel.mask();
    let mut row_seen = vec![false; p1];
    let mut col_seen = vec![false; p2];
    for t in 0..periods {
        if !mask[panel.slab(t)].iter().any(|&m| m) {
            return Err(MqfError::EmptySlice(format!("period t={}", t + 1)));
        }
        for i in 0..p1 {
            for j in 0..p2 {
                if mask[panel.index(t, i, j)] {
                    row_seen[i] = true;
                    col_seen[j] = true;
                }
            }
        }
    }
    if let Some(i) = row_seen.iter().position(|s| !s) {
        return Err(MqfError::EmptySlice(format!("row i={}", i + 1)));
    }
    if let Some(j) = col_seen.iter().position(|s| !s) {
        return Err(MqfError::EmptySlice(format!("column j={}", j + 1)));
    }
    Ok(())
}

fn alternate(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    config: &FitConfig,
    init: FactorParams,
    loss: Loss<'_>,
) -> Result<FitResult> {
    let eval = |theta: &FactorParams| match loss {
        Loss::Check => objective(panel, theta, tau),
        Loss::Smoothed(k) => smoothed_objective(panel, theta, tau, k),
    };
    let mut current = normalize_lenient(&init);
    let mut obj = eval(&current.params)?;
    let mut trace = vec![obj];
    let mut ridge_fallbacks = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_outer_iters {
        iterations += 1;
        let previous = current.params.clone();
        let (r, n) = update_rows(panel, tau, config, &current.params, loss)?;
        ridge_fallbacks += n;
        let step = normalize_lenient(&FactorParams {
            r,
            ..current.params
        });
        let (f, n) = update_factors(panel, tau, config, &step.params, loss)?;
        ridge_fallbacks += n;
        let step = FactorParams { f, ..step.params };

        let (c, n) = update_cols(panel, tau, config, &step, loss)?;
        ridge_fallbacks += n;
        current = normalize_lenient(&FactorParams { c, ..step });

        let new_obj = eval(&current.params)?;
        trace.push(new_obj);
        let obj_change = (obj - new_obj).abs();
        obj = new_obj;
        if obj_change <= config.obj_rel_tol * obj.abs().max(f64::MIN_POSITIVE)
            || theta_distance(&previous, &current.params)? < config.param_tol
        {
            converged = true;
            break;
        }
    }
    let Normalized {
        params,
        sigma1,
        sigma2,
        tied,
    } = current;
    Ok(FitResult {
        params,
        objective: obj,
        objective_trace: trace,
        sigma1,
        sigma2,
        iterations,
        converged,
        tied_eigenvalues: tied,
        ridge_fallbacks,
    })
}

fn solve_one<D: Design>(
    problem: &QrProblem<'_, D>,
    warm: &[f64],
    config: &FitConfig,
    loss: Loss<'_>,
) -> Result<(Vec<f64>, bool)> {
    match loss {
        Loss::Check => {
            let s = solve_qr(problem, Some(warm), config.solver_tol)?;
            Ok((s.beta, s.rank_deficient))
        }
        Loss::Smoothed(k) => {
            let s = solve_qr_smoothed(problem, k, Some(warm), config.solver_tol)?;
            Ok((s.beta, false))
        }
    }
}

/// Row update: for row `i` the observations are `X_ijt` over `(t, j)` with
/// regressors `F_t c_j`.
fn update_rows(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    config: &FitConfig,
    theta: &FactorParams,
    loss: Loss<'_>,
) -> Result<(DMatrix<f64>, usize)> {
    let (periods, p1, p2) = panel.dims();
    let k1 = theta.k1();
    let mut data = Vec::with_capacity(periods * p2 * k1);
    let ct = theta.c.transpose();
    for ft in &theta.f {
        let m = ft * &ct;
        for j in 0..p2 {
            data.extend(m.column(j).iter());
        }
    }
    let design = DenseDesign::from_row_major(periods * p2, k1, data)?;
    let full = panel.is_fully_observed();
    let rows: Vec<(Vec<f64>, bool)> = (0..p1)
        .into_par_iter()
        .map(|i| {
            let mut y = Vec::with_capacity(periods * p2);
            let mut inc = Vec::with_capacity(if full { 0 } else { periods * p2 });
            for t in 0..periods {
                let base = panel.index(t, i, 0);
                y.extend_from_slice(&panel.values()[base..base + p2]);
                if !full {
                    inc.extend_from_slice(&panel.mask()[base..base + p2]);
                }
            }
            let problem = QrProblem::new(&y, &design, tau, (!full).then_some(inc.as_slice()))?;
            let warm: Vec<f64> = theta.r.row(i).iter().copied().collect();
            solve_one(&problem, &warm, config, loss)
        })
        .collect::<Result<_>>()?;
    let mut r = DMatrix::zeros(p1, k1);
    let mut flagged = 0;
    for (i, (beta, flag)) in rows.into_iter().enumerate() {
        for a in 0..k1 {
            r[(i, a)] = beta[a];
        }
        flagged += flag as usize;
    }
    Ok((r, flagged))
}

/// Column update: for column `j` the observations are `X_ijt` over `(t, i)`
/// with regressors `F_t' r_i`.
fn update_cols(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    config: &FitConfig,
    theta: &FactorParams,
    loss: Loss<'_>,
) -> Result<(DMatrix<f64>, usize)> {
    let (periods, p1, p2) = panel.dims();
    let k2 = theta.k2();
    let mut data = Vec::with_capacity(periods * p1 * k2);
    let rt = theta.r.transpose();
    for ft in &theta.f {
        let m = ft.transpose() * &rt;
        for i in 0..p1 {
            data.extend(m.column(i).iter());
        }
    }
    let design = DenseDesign::from_row_major(periods * p1, k2, data)?;
    let full = panel.is_fully_observed();
    let cols: Vec<(Vec<f64>, bool)> = (0..p2)
        .into_par_iter()
        .map(|j| {
            let mut y = Vec::with_capacity(periods * p1);
            let mut inc = Vec::with_capacity(if full { 0 } else { periods * p1 });
            for t in 0..periods {
                for i in 0..p1 {
                    let idx = panel.index(t, i, j);
                    y.push(panel.values()[idx]);
                    if !full {
                        inc.push(panel.mask()[idx]);
                    }
                }
            }
            let problem = QrProblem::new(&y, &design, tau, (!full).then_some(inc.as_slice()))?;
            let warm: Vec<f64> = theta.c.row(j).iter().copied().collect();
            solve_one(&problem, &warm, config, loss)
        })
        .collect::<Result<_>>()?;
    let mut c = DMatrix::zeros(p2, k2);
    let mut flagged = 0;
    for (j, (beta, flag)) in cols.into_iter().enumerate() {
        for b in 0..k2 {
            c[(j, b)] = beta[b];
        }
        flagged += flag as usize;
    }
    Ok((c, flagged))
}

/// Factor update: period `t` regresses `X_t` on `vec(r_i c_j')`.
fn update_factors(
    panel: &MatrixPanel,
    tau: QuantileLevel,
    config: &FitConfig,
    theta: &FactorParams,
    loss: Loss<'_>,
) -> Result<(Vec<DMatrix<f64>>, usize)> {
    let (periods, ..) = panel.dims();
    let (k1, k2) = (theta.k1(), theta.k2());
    let design = KronDesign::new(&theta.r, &theta.c);
    let full = panel.is_fully_observed();
    let factors: Vec<(Vec<f64>, bool)> = (0..periods)
        .into_par_iter()
        .map(|t| {
            let slab = panel.slab(t);
            let y = &panel.values()[slab.clone()];
            let inc = (!full).then(|| &panel.mask()[slab]);
            let problem = QrProblem::new(y, &design, tau, inc)?;
            solve_one(&problem, theta.f[t].as_slice(), config, loss)
        })
        .collect::<Result<_>>()?;
    let mut flagged = 0;
    let f = factors
        .into_iter()
        .map(|(beta, flag)| {
            flagged += flag as usize;
            DMatrix::from_column_slice(k1, k2, &beta)
        })
        .collect();
    Ok((f, flagged))
}
