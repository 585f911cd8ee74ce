//! Alternating estimation, identification, smoothing and imputation.

mod fit;
mod impute;
mod inference;
mod kernel;
mod normalize;

pub use fit::{fit, init_random, smoothed_fit, FitConfig};
pub use impute::impute;
pub use inference::{asymptotic_stats, AsymptoticStats};
pub use kernel::{build_kernel, default_bandwidth, KernelSpec};
pub use normalize::{normalize, Normalized, SIGN_TOL, TIE_TOL};
