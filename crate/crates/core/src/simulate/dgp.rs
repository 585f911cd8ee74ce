use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::noise::{NoiseLaw, MA_WEIGHT};
use crate::error::{MqfError, Result};
use crate::estimator::normalize;
use crate::model::{FactorParams, MatrixPanel, QuantileLevel};

/// Settings of the simulated matrix series
/// `X_t = R F_t C' + θ* g_t E_t`, with AR(1) factors and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub periods: usize,
    pub p1: usize,
    pub p2: usize,
    pub k1: usize,
    pub k2: usize,
    pub theta_star: f64,
    pub noise: NoiseLaw,
    /// AR coefficient of both `F_t` and `g_t`.
    pub ar_coef: f64,
    /// Replace `E_t` by the moving-average field
    /// `V_ijt + 0.2 (V_ij,t-1 + V_i-1,jt + V_i,j-1,t)`.
    pub dependent_errors: bool,
    /// Hold `g_t = 1` instead of running its AR recursion.
    pub constant_scale: bool,
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(periods: usize, p1: usize, p2: usize) -> Self {
        Self {
            periods,
            p1,
            p2,
            k1: 2,
            k2: 3,
            theta_star: 3.0,
            noise: NoiseLaw::Normal,
            ar_coef: 0.2,
            dependent_errors: false,
            constant_scale: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise: NoiseLaw) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_theta_star(mut self, theta_star: f64) -> Self {
        self.theta_star = theta_star;
        self
    }

    /// The independent-factor, unit-scale design used to check the
    /// loading CLT: `ar_coef = 0`, `g_t = 1`, `θ* = 1`.
    pub fn clt(periods: usize, p1: usize, p2: usize) -> Self {
        Self {
            theta_star: 1.0,
            ar_coef: 0.0,
            constant_scale: true,
            ..Self::new(periods, p1, p2)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.periods == 0 || self.p1 == 0 || self.p2 == 0 {
            return Err(MqfError::InvalidConfig(
                "dimensions must be positive".into(),
            ));
        }
        if self.k1 == 0 || self.k2 == 0 || self.k1 >= self.p1 || self.k2 >= self.p2 {
            return Err(MqfError::InvalidConfig(format!(
                "(k1, k2) = ({}, {}) must be positive and below (p1, p2) = ({}, {})",
                self.k1, self.k2, self.p1, self.p2
            )));
        }
        if !(self.theta_star >= 0.0 && self.theta_star.is_finite()) {
            return Err(MqfError::InvalidConfig(format!(
                "theta_star must be non-negative, got {}",
                self.theta_star
            )));
        }
        if !(self.ar_coef.abs() < 1.0) {
            return Err(MqfError::InvalidConfig(format!(
                "AR coefficient {} is not stationary",
                self.ar_coef
            )));
        }
        self.noise.validate()
    }
}

/// Ground truth of a simulated panel at one quantile level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    /// Normalized parameters of the τ-quantile structure.
    pub params: FactorParams,
    pub effective_k1: usize,
    pub effective_k2: usize,
    /// τ-quantile of the noise law.
    pub q_tau: f64,
    /// Density of the noise law at `q_tau`.
    pub density_at_quantile: f64,
    /// Diagonals of the normalized factor second moments.
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// Draws one panel. Random numbers are consumed in a fixed order (`R`, `C`,
/// the factor recursion, the scale recursion, the noise), so the panel does
/// not depend on `tau`; only the truth does.
pub fn gen_panel(cfg: &DgpConfig, tau: QuantileLevel) -> Result<(MatrixPanel, SimTruth)> {
    cfg.validate()?;
    let (periods, p1, p2, k1, k2) = (cfg.periods, cfg.p1, cfg.p2, cfg.k1, cfg.k2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let r = DMatrix::from_fn(p1, k1, |_, _| normal(&mut rng));
    let c = DMatrix::from_fn(p2, k2, |_, _| normal(&mut rng));
    let a = cfg.ar_coef;
    let stationary_sd = 1.0 / (1.0 - a * a).sqrt();
    let mut f_prev = DMatrix::from_fn(k1, k2, |_, _| stationary_sd * normal(&mut rng));
    let f: Vec<DMatrix<f64>> = (0..periods)
        .map(|_| {
            let next = &f_prev * a + DMatrix::from_fn(k1, k2, |_, _| normal(&mut rng));
            f_prev = next.clone();
            next
        })
        .collect();
    let g: Vec<f64> = if cfg.constant_scale {
        vec![1.0; periods]
    } else {
        let mut prev = stationary_sd * normal(&mut rng);
        (0..periods)
            .map(|_| {
                prev = a * prev + normal(&mut rng);
                prev
            })
            .collect()
    };
    let noise = draw_noise(cfg, &mut rng);

    let ct = c.transpose();
    let mut values = Vec::with_capacity(periods * p1 * p2);
    for t in 0..periods {
        let common = &r * &f[t] * &ct;
        for i in 0..p1 {
            for j in 0..p2 {
                let e = noise[(t * p1 + i) * p2 + j];
                values.push(common[(i, j)] + cfg.theta_star * g[t] * e);
            }
        }
    }
    let panel = MatrixPanel::new(periods, p1, p2, values)?;

    let tau = tau.value();
    let q_tau = cfg.noise.quantile(tau, cfg.dependent_errors)?;
    let density_at_quantile = cfg.noise.density(q_tau, cfg.dependent_errors)?;
    let raw = if tau == 0.5 {
        FactorParams::new(r, c, f)?
    } else {
        let r_aug = r.insert_column(k1, 1.0);
        let c_aug = c.insert_column(k2, 1.0);
        let f_aug = f
            .iter()
            .zip(&g)
            .map(|(ft, gt)| {
                let mut m = DMatrix::zeros(k1 + 1, k2 + 1);
                m.view_mut((0, 0), (k1, k2)).copy_from(ft);
                m[(k1, k2)] = cfg.theta_star * q_tau * gt;
                m
            })
            .collect();
        FactorParams::new(r_aug, c_aug, f_aug)?
    };
    let (effective_k1, effective_k2) = (raw.k1(), raw.k2());
    let normalized = normalize(&raw)?;
    Ok((
        panel,
        SimTruth {
            params: normalized.params,
            effective_k1,
            effective_k2,
            q_tau,
            density_at_quantile,
            sigma1: normalized.sigma1,
            sigma2: normalized.sigma2,
        },
    ))
}

/// Noise entries in panel order, either i.i.d. or the moving-average field
/// with missing lags at the first period, row and column taken as zero.
fn draw_noise(cfg: &DgpConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (periods, p1, p2) = (cfg.periods, cfg.p1, cfg.p2);
    let v: Vec<f64> = (0..periods * p1 * p2)
        .map(|_| cfg.noise.sample(rng))
        .collect();
    if !cfg.dependent_errors {
        return v;
    }
    let at = |t: usize, i: usize, j: usize| v[(t * p1 + i) * p2 + j];
    let mut e = Vec::with_capacity(v.len());
    for t in 0..periods {
        for i in 0..p1 {
            for j in 0..p2 {
                let mut lags = 0.0;
                if t > 0 {
                    lags += at(t - 1, i, j);
                }
                if i > 0 {
                    lags += at(t, i - 1, j);
                }
                if j > 0 {
                    lags += at(t, i, j - 1);
                }
                e.push(at(t, i, j) + MA_WEIGHT * lags);
            }
        }
    }
    e
}

/// Replaces `⌊fraction · p1 p2 T⌋` observed entries, drawn uniformly, by
/// `±magnitude` with independent fair signs.
pub fn corrupt(
    panel: &MatrixPanel,
    fraction: f64,
    magnitude: f64,
    seed: u64,
) -> Result<MatrixPanel> {
    check_fraction(fraction)?;
    let observed: Vec<usize> = (0..panel.len()).filter(|&k| panel.mask()[k]).collect();
    let count = ((fraction * panel.len() as f64).floor() as usize).min(observed.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = panel.values().to_vec();
    for pick in sample(&mut rng, observed.len(), count).into_vec() {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        values[observed[pick]] = sign * magnitude;
    }
    panel.with_values(values)
}

/// Additionally hides `round(fraction · p1 p2 T)` of the observed entries,
/// drawn uniformly.
pub fn mask_random(panel: &MatrixPanel, fraction: f64, seed: u64) -> Result<MatrixPanel> {
    check_fraction(fraction)?;
    let observed: Vec<usize> = (0..panel.len()).filter(|&k| panel.mask()[k]).collect();
    let count = ((fraction * panel.len() as f64).round() as usize).min(observed.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = panel.mask().to_vec();
    for pick in sample(&mut rng, observed.len(), count).into_vec() {
        mask[observed[pick]] = false;
    }
    panel.with_new_mask(mask)
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(MqfError::InvalidConfig(format!(
            "fraction {fraction} outside [0, 1]"
        )));
    }
    Ok(())
}
