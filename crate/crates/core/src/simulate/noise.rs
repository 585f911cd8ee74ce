use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use statrs::distribution::{Cauchy, Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{MqfError, Result};

/// Law of the idiosyncratic noise entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLaw {
    Normal,
    /// Student-t with the given degrees of freedom (1 is Cauchy).
    StudentT(f64),
}

/// Weight of each lagged term in the dependent error field.
pub(crate) const MA_WEIGHT: f64 = 0.2;

impl NoiseLaw {
    pub(crate) fn validate(self) -> Result<()> {
        match self {
            NoiseLaw::Normal => Ok(()),
            NoiseLaw::StudentT(df) if df > 0.0 && df.is_finite() => Ok(()),
            NoiseLaw::StudentT(df) => Err(MqfError::InvalidConfig(format!(
                "Student-t degrees of freedom must be positive, got {df}"
            ))),
        }
    }

    pub(crate) fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            NoiseLaw::Normal => StandardNormal.sample(rng),
            NoiseLaw::StudentT(df) => StudentT::new(df).expect("validated df").sample(rng),
        }
    }

    /// τ-quantile of one noise entry, or of the interior cells of the
    /// dependent field `V + 0.2 (three lags of V)` when `dependent`.
    pub fn quantile(self, tau: f64, dependent: bool) -> Result<f64> {
        self.validate()?;
        if !dependent {
            return Ok(match self {
                NoiseLaw::Normal => Normal::standard().inverse_cdf(tau),
                NoiseLaw::StudentT(df) => StudentsT::new(0.0, 1.0, df)
                    .expect("validated df")
                    .inverse_cdf(tau),
            });
        }
        match self {
            NoiseLaw::Normal => Ok(ma_normal().inverse_cdf(tau)),
            NoiseLaw::StudentT(1.0) => Ok(ma_cauchy().inverse_cdf(tau)),
            NoiseLaw::StudentT(3.0) => Ok(ma_t3_quantile(tau)),
            NoiseLaw::StudentT(df) => Err(unsupported_ma(df)),
        }
    }

    /// Density at `x` of the same law as `quantile`.
    pub fn density(self, x: f64, dependent: bool) -> Result<f64> {
        self.validate()?;
        if !dependent {
            return Ok(match self {
                NoiseLaw::Normal => Normal::standard().pdf(x),
                NoiseLaw::StudentT(df) => {
                    StudentsT::new(0.0, 1.0, df).expect("validated df").pdf(x)
                }
            });
        }
        match self {
            NoiseLaw::Normal => Ok(ma_normal().pdf(x)),
            NoiseLaw::StudentT(1.0) => Ok(ma_cauchy().pdf(x)),
            NoiseLaw::StudentT(3.0) => Ok(ma_t3_density(x)),
            NoiseLaw::StudentT(df) => Err(unsupported_ma(df)),
        }
    }
}

fn unsupported_ma(df: f64) -> MqfError {
    MqfError::InvalidConfig(format!(
        "exact quantiles of dependent Student-t errors are available for df 1 and 3, got {df}"
    ))
}

fn ma_normal() -> Normal {
    Normal::new(0.0, (1.0 + 3.0 * MA_WEIGHT * MA_WEIGHT).sqrt()).expect("positive sd")
}

fn ma_cauchy() -> Cauchy {
    Cauchy::new(0.0, 1.0 + 3.0 * MA_WEIGHT).expect("positive scale")
}

/// Characteristic function of `V + 0.2 (V1 + V2 + V3)` for i.i.d. t3 terms,
/// using `φ(u) = (1 + √3|u|) e^{-√3|u|}`.
fn ma_t3_cf(u: f64) -> f64 {
    let phi = |v: f64| {
        let a = 3f64.sqrt() * v.abs();
        (1.0 + a) * (-a).exp()
    };
    phi(u) * phi(MA_WEIGHT * u).powi(3)
}

const CF_UPPER: f64 = 60.0;
const CF_STEPS: usize = 24_000;

/// Composite Simpson rule on `[0, CF_UPPER]`.
fn cf_integral(g: impl Fn(f64) -> f64) -> f64 {
    let h = CF_UPPER / CF_STEPS as f64;
    let mut acc = g(0.0) + g(CF_UPPER);
    for k in 1..CF_STEPS {
        acc += g(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn ma_t3_cdf(x: f64) -> f64 {
    // Gil-Pelaez inversion for a real, even characteristic function.
    0.5 + cf_integral(|u| {
        if u == 0.0 {
            x
        } else {
            (u * x).sin() / u * ma_t3_cf(u)
        }
    }) / std::f64::consts::PI
}

fn ma_t3_density(x: f64) -> f64 {
    cf_integral(|u| (u * x).cos() * ma_t3_cf(u)) / std::f64::consts::PI
}

fn ma_t3_quantile(tau: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while ma_t3_cdf(lo) > tau {
        lo *= 2.0;
    }
    while ma_t3_cdf(hi) < tau {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ma_t3_cdf(mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}
