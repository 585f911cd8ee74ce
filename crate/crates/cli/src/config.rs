//! Run configuration, read from JSON. Every field has a default, unknown
//! keys are rejected.

use std::fs;
use std::path::Path;

use mqf_core::selection::{IcSearch, SelectionMethod, DEFAULT_C0, DEFAULT_KMAX, DEFAULT_VEC_KMAX};
use mqf_core::simulate::{DgpConfig, ExperimentMethod, NoiseLaw, SelectionSettings};
use mqf_core::{build_kernel, default_bandwidth, FitConfig, KernelSpec, QuantileLevel};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub tau: f64,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    /// `ER`, `RM`, `IC` or `vec-RM`.
    pub method: String,
    pub k1_max: usize,
    pub k2_max: usize,
    pub vec_k_max: usize,
    pub c0: f64,
    /// `two-pass` or `full-grid`.
    pub ic_search: String,
    pub seed: u64,
    /// Fixes `[T, p1, p2]` of long-table input.
    pub dims: Option<[usize; 3]>,
    pub solver: SolverConfig,
    /// Present: `fit` runs the smoothed estimator and reports its
    /// standardization.
    pub smoothing: Option<SmoothingConfig>,
    /// Fraction of observed entries `impute` hides before fitting.
    pub mask_fraction: Option<f64>,
    pub simulate: SimConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            k1: None,
            k2: None,
            method: "ER".into(),
            k1_max: DEFAULT_KMAX,
            k2_max: DEFAULT_KMAX,
            vec_k_max: DEFAULT_VEC_KMAX,
            c0: DEFAULT_C0,
            ic_search: "two-pass".into(),
            seed: 0,
            dims: None,
            solver: SolverConfig::default(),
            smoothing: None,
            mask_fraction: None,
            simulate: SimConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    pub obj_rel_tol: f64,
    pub param_tol: f64,
    pub solver_tol: f64,
    pub n_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = FitConfig::new(1, 1);
        Self {
            max_outer_iters: d.max_outer_iters,
            obj_rel_tol: d.obj_rel_tol,
            param_tol: d.param_tol,
            solver_tol: d.solver_tol,
            n_restarts: d.n_restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub kernel_order: usize,
    /// Exponent `c` of the default bandwidth `T^{-2c}`.
    pub bandwidth_exponent: f64,
    /// Overrides the default bandwidth.
    pub bandwidth: Option<f64>,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            kernel_order: 8,
            bandwidth_exponent: 0.15,
            bandwidth: None,
        }
    }
}

impl SmoothingConfig {
    pub fn kernel(&self, periods: usize) -> Result<KernelSpec> {
        let h = match self.bandwidth {
            Some(h) => h,
            None => default_bandwidth(periods, self.kernel_order, self.bandwidth_exponent)?,
        };
        Ok(build_kernel(self.kernel_order, h)?)
    }
}

/// One simulated design.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub periods: usize,
    pub p1: usize,
    pub p2: usize,
    pub k1: usize,
    pub k2: usize,
    pub theta_star: f64,
    /// `normal` or `t<df>` such as `t3`.
    pub noise: String,
    pub ar_coef: f64,
    pub dependent_errors: bool,
    pub constant_scale: bool,
    /// Overrides the run seed.
    pub seed: Option<u64>,
    /// `csv` or `binary` output of `simulate`.
    pub format: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        let d = DgpConfig::new(50, 50, 50);
        Self {
            periods: d.periods,
            p1: d.p1,
            p2: d.p2,
            k1: d.k1,
            k2: d.k2,
            theta_star: d.theta_star,
            noise: "normal".into(),
            ar_coef: d.ar_coef,
            dependent_errors: d.dependent_errors,
            constant_scale: d.constant_scale,
            seed: None,
            format: "csv".into(),
        }
    }
}

impl SimConfig {
    pub fn dgp(&self, run_seed: u64) -> Result<DgpConfig> {
        Ok(DgpConfig {
            periods: self.periods,
            p1: self.p1,
            p2: self.p2,
            k1: self.k1,
            k2: self.k2,
            theta_star: self.theta_star,
            noise: parse_noise(&self.noise)?,
            ar_coef: self.ar_coef,
            dependent_errors: self.dependent_errors,
            constant_scale: self.constant_scale,
            seed: self.seed.unwrap_or(run_seed),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// `selection`, `loading` or `clt`.
    pub kind: String,
    pub n_reps: usize,
    pub cells: Vec<SimConfig>,
    /// Selection rules compared by a `selection` experiment.
    pub methods: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: "selection".into(),
            n_reps: 10,
            cells: Vec::new(),
            methods: vec!["ER".into(), "RM".into(), "IC".into(), "vec-RM".into()],
        }
    }
}

/// Factor-number rule named in a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Matrix(SelectionMethod),
    VectorRm,
}

pub fn parse_method(name: &str) -> Result<MethodChoice> {
    if name.eq_ignore_ascii_case("vec-rm") || name.eq_ignore_ascii_case("vqf-rm") {
        return Ok(MethodChoice::VectorRm);
    }
    let short = name.strip_prefix("mqf-").unwrap_or(name);
    SelectionMethod::from_short_name(short)
        .map(MethodChoice::Matrix)
        .ok_or_else(|| {
            CliError::Config(format!(
                "unknown selection method `{name}` (expected ER, RM, IC or vec-RM)"
            ))
        })
}

pub fn parse_noise(name: &str) -> Result<NoiseLaw> {
    let lower = name.to_ascii_lowercase();
    if lower == "normal" || lower == "gaussian" {
        return Ok(NoiseLaw::Normal);
    }
    match lower.strip_prefix('t').map(str::parse::<f64>) {
        Some(Ok(df)) if df > 0.0 && df.is_finite() => Ok(NoiseLaw::StudentT(df)),
        _ => Err(CliError::Config(format!(
            "unknown noise law `{name}` (expected normal or t<df>)"
        ))),
    }
}

pub fn noise_label(noise: NoiseLaw) -> String {
    match noise {
        NoiseLaw::Normal => "normal".into(),
        NoiseLaw::StudentT(df) => format!("t{df}"),
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: line {}: {e}", path.display(), e.line())))
    }

    pub fn quantile(&self) -> Result<QuantileLevel> {
        QuantileLevel::new(self.tau).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn ranks(&self) -> Result<(usize, usize)> {
        match (self.k1, self.k2) {
            (Some(k1), Some(k2)) => Ok((k1, k2)),
            _ => Err(CliError::Config("`k1` and `k2` are required".into())),
        }
    }

    pub fn fit_config(&self, k1: usize, k2: usize) -> FitConfig {
        FitConfig {
            k1,
            k2,
            max_outer_iters: self.solver.max_outer_iters,
            obj_rel_tol: self.solver.obj_rel_tol,
            param_tol: self.solver.param_tol,
            seed: self.seed,
            n_restarts: self.solver.n_restarts,
            solver_tol: self.solver.solver_tol,
        }
    }

    pub fn ic_search(&self) -> Result<IcSearch> {
        match self.ic_search.as_str() {
            "two-pass" => Ok(IcSearch::TwoPass),
            "full-grid" => Ok(IcSearch::FullGrid),
            other => Err(CliError::Config(format!(
                "unknown ic_search `{other}` (expected two-pass or full-grid)"
            ))),
        }
    }

    pub fn selection_settings(&self) -> SelectionSettings {
        SelectionSettings {
            k1_max: self.k1_max,
            k2_max: self.k2_max,
            vec_k_max: self.vec_k_max,
            c0: self.c0,
            fit: self.fit_config(1, 1),
        }
    }

    pub fn experiment_methods(&self) -> Result<Vec<ExperimentMethod>> {
        self.experiment
            .methods
            .iter()
            .map(|m| {
                Ok(match parse_method(m)? {
                    MethodChoice::Matrix(s) => ExperimentMethod::Matrix(s),
                    MethodChoice::VectorRm => ExperimentMethod::VectorRm,
                })
            })
            .collect()
    }
}
