use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mqf_core::linalg::kron;
use mqf_core::selection::{select_er, select_ic, select_rm, vec_select_rm, SelectionResult};
use mqf_core::simulate::{
    gen_panel, mask_random, run_clt_experiment, run_loading_experiment, run_selection_experiment,
    DgpConfig,
};
use mqf_core::{
    asymptotic_stats, fit, impute, loading_distance, smoothed_fit, space_similarity,
    theta_distance, FactorParams, FitResult, MatrixPanel, MqfError,
};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{noise_label, parse_method, MethodChoice, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{
    fmt_f64, read_blocks, read_matrix, read_panel, write_binary, write_json, write_long_csv,
};

/// Everything a command reads.
#[derive(Debug, Clone)]
pub struct Context {
    pub inputs: Vec<PathBuf>,
    pub config: RunConfig,
    pub out: PathBuf,
}

/// Result of a command: `converged` is false when an estimation stopped at
/// the iteration limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub converged: bool,
}

const DONE: Outcome = Outcome { converged: true };

impl Context {
    fn input(&self, k: usize, what: &str) -> Result<&Path> {
        self.inputs
            .get(k)
            .map(PathBuf::as_path)
            .ok_or_else(|| CliError::Usage(format!("missing --input for the {what}")))
    }

    fn panel(&self) -> Result<MatrixPanel> {
        read_panel(self.input(0, "panel")?, self.config.dims)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn write_table(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "{header}").expect("string write");
    for r in rows {
        writeln!(text, "{r}").expect("string write");
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_params(dir: &Path, params: &FactorParams) -> Result<()> {
    crate::io::write_matrix(&dir.join("R.csv"), &params.r)?;
    crate::io::write_matrix(&dir.join("C.csv"), &params.c)?;
    crate::io::write_blocks(&dir.join("F.csv"), &params.f)
}

/// Reads `R.csv`, `C.csv` and `F.csv` from a directory.
pub fn read_params(dir: &Path) -> Result<FactorParams> {
    let r = read_matrix(&dir.join("R.csv"))?;
    let c = read_matrix(&dir.join("C.csv"))?;
    let f = read_blocks(&dir.join("F.csv"), r.ncols())?;
    Ok(FactorParams::new(r, c, f)?)
}

fn fit_json(res: &FitResult) -> Value {
    json!({
        "objective": res.objective,
        "objective_trace": res.objective_trace,
        "sigma1": res.sigma1,
        "sigma2": res.sigma2,
        "iterations": res.iterations,
        "converged": res.converged,
        "tied_eigenvalues": res.tied_eigenvalues,
        "ridge_fallbacks": res.ridge_fallbacks,
    })
}

fn run_fit(ctx: &Context, panel: &MatrixPanel) -> Result<(FitResult, Option<Value>)> {
    let cfg = &ctx.config;
    let tau = cfg.quantile()?;
    let (k1, k2) = cfg.ranks()?;
    let fit_cfg = cfg.fit_config(k1, k2);
    match &cfg.smoothing {
        None => Ok((fit(panel, tau, &fit_cfg)?, None)),
        Some(s) => {
            let kernel = s.kernel(panel.periods())?;
            let res = smoothed_fit(panel, tau, &fit_cfg, &kernel)?;
            let stats = asymptotic_stats(panel, &res, tau, None)?;
            let variances: Vec<f64> = (0..k1).map(|l| stats.loading_variance(tau, l)).collect();
            let info = json!({
                "kernel_order": kernel.order_m(),
                "bandwidth": kernel.h(),
                "density_at_zero": stats.density_at_zero,
                "density_bandwidth": stats.bandwidth,
                "loading_variance": variances,
            });
            Ok((res, Some(info)))
        }
    }
}

fn truth_distances(truth: &FactorParams, est: &FactorParams) -> Result<Value> {
    let same = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> Result<Option<f64>> {
        if a.shape() == b.shape() {
            Ok(Some(loading_distance(a, b)?))
        } else {
            Ok(None)
        }
    };
    Ok(json!({
        "theta_distance": theta_distance(truth, est)?,
        "loading_distance_r": same(&truth.r, &est.r)?,
        "loading_distance_c": same(&truth.c, &est.c)?,
    }))
}

pub fn cmd_fit(ctx: &Context) -> Result<Outcome> {
    let panel = ctx.panel()?;
    let truth = match ctx.inputs.get(1) {
        Some(dir) => Some(read_params(dir)?),
        None => None,
    };
    let (res, smoothing) = run_fit(ctx, &panel)?;
    write_params(&ctx.out, &res.params)?;
    let mut diag = fit_json(&res);
    diag["tau"] = json!(ctx.config.tau);
    diag["k1"] = json!(res.params.k1());
    diag["k2"] = json!(res.params.k2());
    diag["n_observed"] = json!(panel.n_observed());
    if let Some(info) = smoothing {
        diag["smoothing"] = info;
    }
    if let Some(truth) = truth {
        diag["truth"] = truth_distances(&truth, &res.params)?;
    }
    write_json(&ctx.out("diagnostics.json"), &diag)?;
    println!(
        "objective={} iterations={} converged={}",
        fmt_f64(res.objective),
        res.iterations,
        res.converged
    );
    Ok(Outcome {
        converged: res.converged,
    })
}

fn selection_json(res: &SelectionResult) -> Value {
    let surface = res.ic_surface.as_ref().map(|s| {
        s.iter()
            .map(|(&(l1, l2), &v)| json!({"l1": l1, "l2": l2, "value": v}))
            .collect::<Vec<_>>()
    });
    json!({
        "method": res.method.short_name(),
        "k1_hat": res.k1_hat,
        "k2_hat": res.k2_hat,
        "sigma1_full": res.sigma1_full,
        "sigma2_full": res.sigma2_full,
        "threshold": res.threshold_used,
        "ic_surface": surface,
    })
}

pub fn cmd_select(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let method = parse_method(&cfg.method)?;
    let panel = ctx.panel()?;
    let tau = cfg.quantile()?;
    let fit_cfg = cfg.fit_config(1, 1);
    use mqf_core::selection::SelectionMethod::*;
    let report = match method {
        MethodChoice::VectorRm => {
            let k = vec_select_rm(&panel, tau, cfg.vec_k_max, &fit_cfg)?;
            println!("k_hat={k}");
            json!({"method": "vec-RM", "k_hat": k})
        }
        MethodChoice::Matrix(m) => {
            let res = match m {
                RankMinimization => select_rm(&panel, tau, cfg.k1_max, cfg.k2_max, &fit_cfg)?,
                EigenvalueRatio => {
                    select_er(&panel, tau, cfg.k1_max, cfg.k2_max, cfg.c0, &fit_cfg)?
                }
                InformationCriterion => select_ic(
                    &panel,
                    tau,
                    cfg.k1_max,
                    cfg.k2_max,
                    &fit_cfg,
                    cfg.ic_search()?,
                )?,
            };
            println!("k1_hat={} k2_hat={}", res.k1_hat, res.k2_hat);
            selection_json(&res)
        }
    };
    write_json(&ctx.out("selection.json"), &report)?;
    Ok(DONE)
}

fn dgp_json(dgp: &DgpConfig) -> Value {
    json!({
        "periods": dgp.periods,
        "p1": dgp.p1,
        "p2": dgp.p2,
        "k1": dgp.k1,
        "k2": dgp.k2,
        "theta_star": dgp.theta_star,
        "noise": noise_label(dgp.noise),
        "ar_coef": dgp.ar_coef,
        "dependent_errors": dgp.dependent_errors,
        "constant_scale": dgp.constant_scale,
        "seed": dgp.seed,
    })
}

pub fn cmd_simulate(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let tau = cfg.quantile()?;
    let dgp = cfg.simulate.dgp(cfg.seed)?;
    let (mut panel, truth) = gen_panel(&dgp, tau)?;
    if let Some(f) = cfg.mask_fraction {
        panel = mask_random(&panel, f, dgp.seed)?;
    }
    match cfg.simulate.format.as_str() {
        "csv" => write_long_csv(&ctx.out("panel.csv"), &panel)?,
        "binary" => write_binary(&ctx.out, "panel", &panel)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown format `{other}` (expected csv or binary)"
            )))
        }
    }
    let dir = ctx.out("truth");
    write_params(&dir, &truth.params)?;
    let report = json!({
        "tau": cfg.tau,
        "effective_k1": truth.effective_k1,
        "effective_k2": truth.effective_k2,
        "q_tau": truth.q_tau,
        "density_at_quantile": truth.density_at_quantile,
        "sigma1": truth.sigma1,
        "sigma2": truth.sigma2,
        "dgp": dgp_json(&dgp),
    });
    write_json(&dir.join("truth.json"), &report)?;
    println!("ranks=({}, {})", truth.effective_k1, truth.effective_k2);
    Ok(DONE)
}

fn cell_columns(dgp: &DgpConfig) -> String {
    format!(
        "{},{},{},{},{},{}",
        dgp.periods,
        dgp.p1,
        dgp.p2,
        noise_label(dgp.noise),
        fmt_f64(dgp.theta_star),
        dgp.dependent_errors
    )
}

const CELL_HEADER: &str = "periods,p1,p2,noise,theta_star,dependent_errors";

pub fn cmd_experiment(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let exp = &cfg.experiment;
    let tau = cfg.quantile()?;
    if exp.cells.is_empty() {
        return Err(CliError::Config("the experiment lists no cells".into()));
    }
    let cells: Vec<DgpConfig> = exp
        .cells
        .iter()
        .map(|c| c.dgp(cfg.seed))
        .collect::<Result<_>>()?;
    let t = fmt_f64(cfg.tau);
    match exp.kind.as_str() {
        "selection" => {
            let methods = cfg.experiment_methods()?;
            let rows = run_selection_experiment(
                &cells,
                tau,
                exp.n_reps,
                &methods,
                &cfg.selection_settings(),
            )?;
            let lines: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{},{t},{},{},{},{}",
                        cell_columns(&r.cell),
                        r.method.label(),
                        fmt_f64(r.mean_k1),
                        fmt_f64(r.mean_k2),
                        fmt_f64(r.exact_frequency)
                    )
                })
                .collect();
            let header = format!("{CELL_HEADER},tau,method,mean_k1,mean_k2,frequency");
            write_table(&ctx.out("selection.csv"), &header, &lines)?;
        }
        "loading" => {
            let rows = run_loading_experiment(&cells, tau, exp.n_reps, &cfg.fit_config(1, 1))?;
            let lines: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{},{t},{},{},{}",
                        cell_columns(&r.cell),
                        fmt_f64(r.mean_d_r),
                        fmt_f64(r.mean_d_c),
                        fmt_f64(r.mean_d_w)
                    )
                })
                .collect();
            let header = format!("{CELL_HEADER},tau,mean_d_r,mean_d_c,mean_d_w");
            write_table(&ctx.out("loading.csv"), &header, &lines)?;
        }
        "clt" => {
            let smoothing = cfg
                .smoothing
                .clone()
                .unwrap_or_default();
            let mut samples = Vec::new();
            let mut summary = Vec::new();
            for (c, cell) in cells.iter().enumerate() {
                let kernel = smoothing.kernel(cell.periods)?;
                let stats =
                    run_clt_experiment(cell, tau, exp.n_reps, &kernel, &cfg.fit_config(1, 1))?;
                let n = stats.len() as f64;
                let mean = stats.iter().sum::<f64>() / n;
                let var =
                    stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                for (rep, s) in stats.iter().enumerate() {
                    samples.push(format!("{c},{rep},{}", fmt_f64(*s)));
                }
                summary.push(format!(
                    "{c},{},{t},{},{},{}",
                    cell_columns(cell),
                    stats.len(),
                    fmt_f64(mean),
                    fmt_f64(var)
                ));
            }
            write_table(&ctx.out("clt.csv"), "cell,rep,statistic", &samples)?;
            let header = format!("cell,{CELL_HEADER},tau,n,mean,variance");
            write_table(&ctx.out("clt_summary.csv"), &header, &summary)?;
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown experiment kind `{other}` (expected selection, loading or clt)"
            )))
        }
    }
    Ok(DONE)
}

/// RMSE of the imputed entries and of imputing zeros, over the entries
/// missing from `masked` but present in `truth`.
fn imputation_errors(
    masked: &MatrixPanel,
    filled: &MatrixPanel,
    truth: &MatrixPanel,
) -> Result<(usize, f64, f64)> {
    if truth.dims() != masked.dims() {
        return Err(MqfError::DimensionMismatch(format!(
            "truth panel has shape {:?}, input has {:?}",
            truth.dims(),
            masked.dims()
        ))
        .into());
    }
    let (mut n, mut e1, mut e0) = (0usize, 0.0, 0.0);
    for k in 0..masked.len() {
        if !masked.mask()[k] && truth.mask()[k] {
            let v = truth.values()[k];
            e1 += (filled.values()[k] - v).powi(2);
            e0 += v * v;
            n += 1;
        }
    }
    let rms = |s: f64| if n > 0 { (s / n as f64).sqrt() } else { 0.0 };
    Ok((n, rms(e1), rms(e0)))
}

pub fn cmd_impute(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.config;
    let original = ctx.panel()?;
    let masked = match cfg.mask_fraction {
        Some(f) => mask_random(&original, f, cfg.seed)?,
        None => original.clone(),
    };
    let truth = match ctx.inputs.get(1) {
        Some(path) => Some(read_panel(path, cfg.dims)?),
        None => cfg.mask_fraction.map(|_| original.clone()),
    };
    let (res, _) = run_fit(ctx, &masked)?;
    let filled = impute(&masked, &res)?;
    write_long_csv(&ctx.out("imputed.csv"), &filled)?;
    let mut report = json!({
        "n_missing": masked.len() - masked.n_observed(),
        "fit": fit_json(&res),
    });
    if let Some(truth) = truth {
        let (n, a1, a0) = imputation_errors(&masked, &filled, &truth)?;
        let ratio = (a0 > 0.0).then(|| a1 / a0);
        report["errors"] = json!({"n_compared": n, "a1": a1, "a0": a0, "ratio": ratio});
        if let Some(r) = ratio {
            println!("a1={} a0={} ratio={}", fmt_f64(a1), fmt_f64(a0), fmt_f64(r));
        }
    }
    write_json(&ctx.out("impute.json"), &report)?;
    Ok(Outcome {
        converged: res.converged,
    })
}

/// A loading matrix from a CSV file, or `Ĉ ⊗ R̂` from a directory holding
/// `R.csv` and `C.csv`; rescaled to `A'A/p = I` spanning the same space.
fn loading_space(path: &Path) -> Result<DMatrix<f64>> {
    let a = if path.is_dir() {
        kron(
            &read_matrix(&path.join("C.csv"))?,
            &read_matrix(&path.join("R.csv"))?,
        )
    } else {
        read_matrix(path)?
    };
    let (p, k) = a.shape();
    if k > p {
        return Err(MqfError::DimensionMismatch(format!(
            "{}: {p} x {k} has more columns than rows",
            path.display()
        ))
        .into());
    }
    let qr = a.qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) || scale == 0.0 {
        return Err(MqfError::RankDeficient(format!(
            "{}: columns are linearly dependent",
            path.display()
        ))
        .into());
    }
    Ok(qr.q() * (p as f64).sqrt())
}

pub fn cmd_similarity(ctx: &Context) -> Result<Outcome> {
    if ctx.inputs.len() != 2 {
        return Err(CliError::Usage(format!(
            "similarity takes exactly two --input paths, got {}",
            ctx.inputs.len()
        )));
    }
    let a = loading_space(&ctx.inputs[0])?;
    let b = loading_space(&ctx.inputs[1])?;
    let s = space_similarity(&a, &b)?;
    let d = loading_distance(&a, &b)?;
    write_json(
        &ctx.out("similarity.json"),
        &json!({"similarity": s, "distance": d}),
    )?;
    println!("similarity={}", fmt_f64(s));
    Ok(DONE)
}
