//! Matrix quantile factor models.
//!
//! A sequence of `p1 x p2` matrices `X_t` is modelled through its conditional
//! τ-quantile `R F_t C'`, with row loadings `R`, column loadings `C` and small
//! factor matrices `F_t`. The crate estimates the three blocks by alternating
//! exact minimization of the empirical check loss, selects the factor numbers,
//! computes kernel-smoothed estimates with their asymptotic standardization,
//! imputes missing entries and replicates the simulation designs used to
//! study all of the above.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod qrsolve;
pub mod selection;
pub mod simulate;

pub use error::{MqfError, Result};
pub use estimator::{
    asymptotic_stats, build_kernel, default_bandwidth, fit, impute, init_random, normalize,
    smoothed_fit, AsymptoticStats, FitConfig, KernelSpec, Normalized,
};
pub use loss::{check_loss, common_component, objective, smoothed_objective};
pub use metrics::{loading_distance, rate_l, space_similarity, theta_distance};
pub use model::{FactorParams, FitResult, MatrixPanel, QuantileLevel, RateL};
