//! Linear quantile regression subproblems.
//!
//! `solve_qr` minimizes `Σ ρ_τ(y_i - x_i'β)` over the included rows. From a
//! warm start it snaps to the nearest basic (interpolating) solution and
//! pivots along edges until the dual certificate holds, which usually takes
//! a handful of pivots. Otherwise it runs majorize-minimize on an
//! ε-smoothed check loss, tightening ε by a factor of ten per stage, and
//! retries the vertex search after every stage.

mod design;

pub use design::{DenseDesign, Design, KronDesign};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use crate::error::{MqfError, Result};
use crate::estimator::KernelSpec;
use crate::linalg::solve_spd;
use crate::loss::check_loss_raw;
use crate::model::QuantileLevel;

/// First and last smoothing level, relative to the mean absolute residual
/// at the starting point.
const EPS_FIRST: i32 = 2;
const EPS_LAST: i32 = 8;
const STAGE_ITERS: usize = 60;
const WLS_REL_TOL: f64 = 1e-10;
const PERTURBATION: f64 = 1e-9;
const CERT_SLACK: f64 = 1e-10;
const REFACTOR_EVERY: usize = 32;
const DUAL_SLACK: f64 = 1e-9;
const PIVOTS_BASE: usize = 200;
const PIVOTS_PER_COL: usize = 40;

/// One linear quantile regression: responses, design, level and the rows
/// that take part in the loss.
#[derive(Debug, Clone, Copy)]
pub struct QrProblem<'a, D: Design> {
    responses: &'a [f64],
    design: &'a D,
    tau: QuantileLevel,
    include: Option<&'a [bool]>,
}

impl<'a, D: Design> QrProblem<'a, D> {
    /// `include = None` means every row is used.
    pub fn new(
        responses: &'a [f64],
        design: &'a D,
        tau: QuantileLevel,
        include: Option<&'a [bool]>,
    ) -> Result<Self> {
        let n = design.nrows();
        if responses.len() != n {
            return Err(MqfError::DimensionMismatch(format!(
                "{} responses for a design with {n} rows",
                responses.len()
            )));
        }
        if design.ncols() == 0 {
            return Err(MqfError::DimensionMismatch("design has no columns".into()));
        }
        if let Some(inc) = include {
            if inc.len() != n {
                return Err(MqfError::DimensionMismatch(format!(
                    "include mask has {} entries for {n} rows",
                    inc.len()
                )));
            }
        }
        let problem = Self {
            responses,
            design,
            tau,
            include,
        };
        let mut n_inc = 0;
        for (i, y) in responses.iter().enumerate() {
            if problem.included(i) {
                n_inc += 1;
                if !y.is_finite() {
                    return Err(MqfError::NonFinite(format!("response {}", i + 1)));
                }
            }
        }
        if n_inc == 0 {
            return Err(MqfError::EmptySlice(
                "quantile regression (no included rows)".into(),
            ));
        }
        Ok(problem)
    }

    #[inline]
    fn included(&self, i: usize) -> bool {
        self.include.is_none_or(|m| m[i])
    }

    pub fn tau(&self) -> QuantileLevel {
        self.tau
    }

    pub fn n_included(&self) -> usize {
        (0..self.responses.len())
            .filter(|&i| self.included(i))
            .count()
    }

    /// `Σ ρ_τ(y_i - x_i'β)` over included rows.
    pub fn objective(&self, beta: &[f64]) -> f64 {
        let mut r = vec![0.0; self.responses.len()];
        self.residuals(beta, &mut r);
        self.check_sum(&r)
    }

    fn residuals(&self, beta: &[f64], out: &mut [f64]) {
        self.design.fitted(beta, out);
        for (o, y) in out.iter_mut().zip(self.responses) {
            *o = y - *o;
        }
    }

    fn check_sum(&self, resid: &[f64]) -> f64 {
        let tau = self.tau.value();
        resid
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.included(i))
            .map(|(_, &r)| check_loss_raw(r, tau))
            .sum()
    }

    fn check_warm(&self, warm: Option<&[f64]>) -> Result<Vec<f64>> {
        let d = self.design.ncols();
        match warm {
            None => Ok(vec![0.0; d]),
            Some(w) if w.len() != d => Err(MqfError::DimensionMismatch(format!(
                "warm start has {} entries, design has {d} columns",
                w.len()
            ))),
            Some(w) if w.iter().any(|v| !v.is_finite()) => {
                Err(MqfError::NonFinite("warm start".into()))
            }
            Some(w) => Ok(w.to_vec()),
        }
    }
}

/// Result of an unsmoothed solve.
#[derive(Debug, Clone, PartialEq)]
pub struct QrSolution {
    pub beta: Vec<f64>,
    /// `Σ ρ_τ` over included rows at `beta`.
    pub objective: f64,
    /// The subgradient optimality condition was verified at a basic solution.
    pub certified: bool,
    /// A weighted normal matrix was numerically singular and needed a ridge.
    pub rank_deficient: bool,
    pub iterations: usize,
}

/// Result of a smoothed solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedQrSolution {
    pub beta: Vec<f64>,
    /// Sum of the smoothed losses over included rows at `beta`.
    pub objective: f64,
    /// `‖∇‖_∞ / n` of the summed smoothed loss, `n` the included count.
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimizes the check loss over the included rows.
///
/// The returned objective is never above the one at `warm_start` (zero when
/// absent). `tol` bounds the mean objective gap of uncertified solutions
/// through the final smoothing level.
pub fn solve_qr<D: Design>(
    problem: &QrProblem<'_, D>,
    warm_start: Option<&[f64]>,
    tol: f64,
) -> Result<QrSolution> {
    if !(tol > 0.0) {
        return Err(MqfError::InvalidConfig(format!(
            "solver tolerance {tol} must be positive"
        )));
    }
    let design = problem.design;
    let (n, d) = (design.nrows(), design.ncols());
    let tau = problem.tau.value();
    let n_inc = problem.n_included() as f64;
    let max_pivots = PIVOTS_BASE + PIVOTS_PER_COL * d;

    let mut beta = problem.check_warm(warm_start)?;
    let mut resid = vec![0.0; n];
    problem.residuals(&beta, &mut resid);
    let mut best = QrSolution {
        objective: problem.check_sum(&resid),
        beta: beta.clone(),
        certified: false,
        rank_deficient: false,
        iterations: 0,
    };
    let scale = resid
        .iter()
        .enumerate()
        .filter(|&(i, _)| problem.included(i))
        .map(|(_, r)| r.abs())
        .sum::<f64>()
        / n_inc;
    if scale == 0.0 {
        best.certified = true;
        return Ok(best);
    }

    if warm_start.is_some() {
        if let Some(vertex) = vertex_search(problem, &resid, max_pivots) {
            absorb(&mut best, vertex);
            if best.certified {
                return Ok(best);
            }
        }
        beta.copy_from_slice(&best.beta);
        problem.residuals(&beta, &mut resid);
    }

    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    let mut trial = vec![0.0; n];
    for k in EPS_FIRST..=EPS_LAST {
        let eps = scale * 10f64.powi(-k);
        let mut g_old = smoothed_sum(problem, &resid, eps);
        for _ in 0..STAGE_ITERS {
            best.iterations += 1;
            for i in 0..n {
                if problem.included(i) {
                    w[i] = 1.0 / (resid[i] * resid[i] + eps * eps).sqrt();
                    z[i] = w[i] * problem.responses[i] + (2.0 * tau - 1.0);
                } else {
                    w[i] = 0.0;
                    z[i] = 0.0;
                }
            }
            design.weighted_cross(&w, &z, &mut gram, &mut rhs);
            let Some((step, ridge)) = solve_spd(&gram, &rhs) else {
                best.rank_deficient = true;
                break;
            };
            best.rank_deficient |= ridge;
            problem.residuals(step.as_slice(), &mut trial);
            let g_new = smoothed_sum(problem, &trial, eps);
            if !(g_new <= g_old) {
                break;
            }
            let moved = step
                .iter()
                .zip(&beta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            let size = beta.iter().map(|b| b.abs()).fold(1.0_f64, f64::max);
            beta.copy_from_slice(step.as_slice());
            std::mem::swap(&mut resid, &mut trial);
            let done = g_old - g_new <= WLS_REL_TOL * g_old || moved <= 1e-14 * size;
            g_old = g_new;
            if done {
                break;
            }
        }
        let obj = problem.check_sum(&resid);
        if obj < best.objective {
            best.beta.copy_from_slice(&beta);
            best.objective = obj;
        }
        if let Some(vertex) = vertex_search(problem, &resid, max_pivots) {
            absorb(&mut best, vertex);
        }
        if best.certified || best.objective == 0.0 || eps <= 2.0 * tol {
            break;
        }
    }
    Ok(best)
}

/// Keeps the better of `best` and a vertex. A certified vertex within
/// rounding of `best` certifies `best` as well.
fn absorb(best: &mut QrSolution, vertex: Vertex) {
    if vertex.objective <= best.objective {
        best.beta = vertex.beta;
        best.objective = vertex.objective;
        best.certified = vertex.certified;
    } else if vertex.certified && vertex.objective <= best.objective * (1.0 + CERT_SLACK) {
        best.certified = true;
    }
}

/// `Σ ½ (√(r² + ε²) + (2τ - 1) r)` over included rows.
fn smoothed_sum<D: Design>(problem: &QrProblem<'_, D>, resid: &[f64], eps: f64) -> f64 {
    let tau = problem.tau.value();
    resid
        .iter()
        .enumerate()
        .filter(|&(i, _)| problem.included(i))
        .map(|(_, &r)| 0.5 * ((r * r + eps * eps).sqrt() + (2.0 * tau - 1.0) * r))
        .sum()
}

struct Vertex {
    beta: Vec<f64>,
    objective: f64,
    certified: bool,
    basis: Vec<usize>,
}

/// Starts from the basic solution interpolating the `d` included rows with
/// the smallest residuals (skipping rows dependent on those already chosen)
/// and walks along edges of the check-loss polyhedron: while the dual
/// certificate fails, the most violating basis row leaves and an exact line
/// search along the resulting edge picks the entering row.
fn vertex_search<D: Design>(
    problem: &QrProblem<'_, D>,
    resid: &[f64],
    max_pivots: usize,
) -> Option<Vertex> {
    let design = problem.design;
    let (n, d) = (design.nrows(), design.ncols());
    let tau = problem.tau.value();
    let mut basis = initial_basis(problem, resid)?;

    let y_scale = problem
        .responses
        .iter()
        .map(|y| y.abs())
        .fold(0.0_f64, f64::max);
    let zero_tol = 1e-13 * (1.0 + y_scale);
    // Fits built from earlier interpolating solutions leave many exact zero
    // residuals; a tiny fixed perturbation of the responses breaks the ties.
    let eta: Vec<f64> = (0..n)
        .map(|i| PERTURBATION * (1.0 + y_scale) * jitter(i))
        .collect();
    let sign_psi = |r: f64| if r < 0.0 { tau - 1.0 } else { tau };

    let mut in_basis = vec![false; n];
    let mut r = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut psi = vec![0.0; n];
    let mut row = vec![0.0; d];
    let mut g = DVector::<f64>::zeros(d);
    let mut beta = DVector::<f64>::zeros(d);
    let mut binv = DMatrix::<f64>::zeros(d, d);
    let mut kinks: Vec<Kink> = Vec::new();
    let mut best: Option<Vertex> = None;
    let mut stalled = 0;
    let mut left: Vec<usize> = Vec::new();
    let mut since_refactor = REFACTOR_EVERY;
    for pivot in 0..=max_pivots {
        if since_refactor == REFACTOR_EVERY {
            // Recompute everything from the basis to shed rounding drift.
            binv = basis_inverse(design, &basis)?;
            let yb =
                DVector::from_iterator(d, basis.iter().map(|&i| problem.responses[i] + eta[i]));
            beta = &binv * yb;
            if !beta.iter().all(|v| v.is_finite()) {
                break;
            }
            problem.residuals(beta.as_slice(), &mut r);
            for (ri, e) in r.iter_mut().zip(&eta) {
                *ri += e;
            }
            in_basis.iter_mut().for_each(|b| *b = false);
            for &i in &basis {
                in_basis[i] = true;
                r[i] = 0.0;
            }
            for i in 0..n {
                psi[i] = if problem.included(i) && !in_basis[i] {
                    sign_psi(r[i])
                } else {
                    0.0
                };
            }
            design.transpose_mul(&psi, g.as_mut_slice());
            since_refactor = 0;
        }
        let objective = problem.check_sum(&r);
        if let Some(b) = best.as_ref() {
            let noise = 1e-12 * b.objective;
            if objective > b.objective + noise {
                break;
            }
            if objective >= b.objective - noise {
                // Degenerate pivot; give up on a long run of them.
                stalled += 1;
                if stalled > d + 5 {
                    break;
                }
            } else {
                stalled = 0;
                left.clear();
            }
        }
        best = Some(Vertex {
            beta: beta.as_slice().to_vec(),
            objective,
            certified: objective == 0.0,
            basis: basis.clone(),
        });
        if objective == 0.0 {
            break;
        }

        let a = -(binv.tr_mul(&g));
        let (mut leave, mut worst) = (0, 0.0);
        for (l, &v) in a.iter().enumerate() {
            let violation = (v - tau).max(tau - 1.0 - v);
            if violation > worst {
                (leave, worst) = (l, violation);
            }
        }
        if worst <= DUAL_SLACK {
            let degenerate =
                (0..n).any(|i| problem.included(i) && !in_basis[i] && r[i].abs() <= zero_tol);
            if let Some(b) = best.as_mut() {
                b.certified = !degenerate;
            }
            break;
        }
        if pivot == max_pivots {
            break;
        }

        // Edge that keeps the other basis rows interpolated and moves the
        // residual of the leaving row by `s` per unit step.
        let s = if a[leave] > tau { 1.0 } else { -1.0 };
        let delta = binv.column(leave) * -s;
        design.fitted(delta.as_slice(), &mut c);
        let mut slope = if s > 0.0 { tau } else { 1.0 - tau };
        kinks.clear();
        for i in 0..n {
            if !problem.included(i) || in_basis[i] || c[i] == 0.0 {
                continue;
            }
            // The residual moves as r_i - α c_i.
            let at_zero = r[i].abs() <= zero_tol;
            if at_zero || r[i] * c[i] > 0.0 {
                let psi_before = if c[i] > 0.0 { tau } else { tau - 1.0 };
                slope -= psi_before * c[i];
                let alpha = if at_zero { 0.0 } else { r[i] / c[i] };
                kinks.push(Kink {
                    alpha,
                    jump: c[i].abs(),
                    row: i,
                });
            } else {
                slope -= psi[i] * c[i];
            }
        }
        if slope >= 0.0 {
            break;
        }
        let mut heap = BinaryHeap::from(std::mem::take(&mut kinks));
        let mut stop = None;
        while let Some(k) = heap.pop() {
            slope += k.jump;
            if slope >= 0.0 {
                stop = Some(k);
                break;
            }
        }
        let Some(stop) = stop else {
            break;
        };
        // Rows crossing at the same step all reach the same point; skip the
        // ones that left during the current run of degenerate pivots.
        let mut entering = (!left.contains(&stop.row)).then_some(stop.row);
        while entering.is_none() {
            match heap.pop() {
                Some(k) if k.alpha <= stop.alpha => {
                    if !left.contains(&k.row) {
                        entering = Some(k.row);
                    }
                }
                _ => break,
            }
        }
        kinks = heap.into_vec();
        let Some(entering) = entering else {
            break;
        };

        // Rank-one update of the basis inverse for the row swap.
        design.row_into(entering, &mut row);
        let v = binv.tr_mul(&DVector::from_column_slice(&row));
        let pivot_elem = v[leave];
        if pivot_elem.abs() < 1e-12 * v.amax() {
            break;
        }
        let mut col = binv.column(leave).clone_owned();
        col /= pivot_elem;
        let mut w = v;
        w[leave] -= 1.0;
        binv -= &col * w.transpose();

        let step = stop.alpha;
        beta.axpy(step, &delta, 1.0);
        for (ri, ci) in r.iter_mut().zip(&c) {
            *ri -= step * ci;
        }
        let leaving = basis[leave];
        left.push(leaving);
        basis[leave] = entering;
        in_basis[leaving] = false;
        in_basis[entering] = true;
        r[entering] = 0.0;
        since_refactor += 1;
        if since_refactor < REFACTOR_EVERY {
            for i in 0..n {
                let new = if problem.included(i) && !in_basis[i] {
                    sign_psi(r[i])
                } else {
                    0.0
                };
                if new != psi[i] {
                    design.row_into(i, &mut row);
                    for (gk, xk) in g.iter_mut().zip(&row) {
                        *gk += (new - psi[i]) * xk;
                    }
                    psi[i] = new;
                }
            }
        }
    }
    let mut best = best?;
    best.objective = problem.objective(&best.beta);
    // The same basis interpolating the unperturbed responses.
    if let Some(inv) = basis_inverse(design, &best.basis) {
        let yb = DVector::from_iterator(d, best.basis.iter().map(|&i| problem.responses[i]));
        let beta = inv * yb;
        if beta.iter().all(|v| v.is_finite()) {
            let objective = problem.objective(beta.as_slice());
            if objective <= best.objective {
                best.beta = beta.as_slice().to_vec();
                best.objective = objective;
            }
        }
    }
    Some(best)
}

/// Breakpoint of the line search, ordered so that a max-heap pops the
/// smallest step first (ties by row index).
struct Kink {
    alpha: f64,
    jump: f64,
    row: usize,
}

impl PartialEq for Kink {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Kink {}

impl PartialOrd for Kink {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Kink {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .alpha
            .total_cmp(&self.alpha)
            .then(other.row.cmp(&self.row))
    }
}

/// Inverse of the matrix whose rows are the basis rows of the design.
fn basis_inverse<D: Design>(design: &D, basis: &[usize]) -> Option<DMatrix<f64>> {
    let d = basis.len();
    let mut xb = DMatrix::zeros(d, d);
    let mut row = vec![0.0; d];
    for (l, &i) in basis.iter().enumerate() {
        design.row_into(i, &mut row);
        for k in 0..d {
            xb[(l, k)] = row[k];
        }
    }
    xb.try_inverse().filter(|m| m.iter().all(|v| v.is_finite()))
}

/// Deterministic value in `[-1, 1)` for row `i`.
fn jitter(i: usize) -> f64 {
    let mut z = (i as u64)
        .wrapping_add(1)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn initial_basis<D: Design>(problem: &QrProblem<'_, D>, resid: &[f64]) -> Option<Vec<usize>> {
    let design = problem.design;
    let (n, d) = (design.nrows(), design.ncols());
    let mut order: Vec<usize> = (0..n).filter(|&i| problem.included(i)).collect();
    order.sort_unstable_by(|&a, &b| resid[a].abs().total_cmp(&resid[b].abs()).then(a.cmp(&b)));

    let mut basis: Vec<usize> = Vec::with_capacity(d);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut row = vec![0.0; d];
    for &i in &order {
        design.row_into(i, &mut row);
        let norm0 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for _ in 0..2 {
            for q in &ortho {
                let p = design::dot(q, &v);
                for (vk, qk) in v.iter_mut().zip(q) {
                    *vk -= p * qk;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            ortho.push(v);
            basis.push(i);
            if basis.len() == d {
                return Some(basis);
            }
        }
    }
    None
}

/// Minimizes the kernel-smoothed loss `Σ [τ - K(r_i/h)] r_i` over the
/// included rows by damped Newton steps with an Armijo line search.
///
/// Without a warm start the unsmoothed solution is used as the start.
pub fn solve_qr_smoothed<D: Design>(
    problem: &QrProblem<'_, D>,
    kernel: &KernelSpec,
    warm_start: Option<&[f64]>,
    tol: f64,
) -> Result<SmoothedQrSolution> {
    if !(tol > 0.0) {
        return Err(MqfError::InvalidConfig(format!(
            "solver tolerance {tol} must be positive"
        )));
    }
    let design = problem.design;
    let (n, d) = (design.nrows(), design.ncols());
    let tau = problem.tau.value();
    let n_inc = problem.n_included() as f64;
    let mut beta = match warm_start {
        Some(_) => problem.check_warm(warm_start)?,
        None => solve_qr(problem, None, 1e-10)?.beta,
    };

    let loss_sum = |r: &[f64]| -> f64 {
        r.iter()
            .enumerate()
            .filter(|&(i, _)| problem.included(i))
            .map(|(_, &u)| kernel.loss(u, tau))
            .sum()
    };

    let ones: Vec<f64> = (0..n)
        .map(|i| if problem.included(i) { 1.0 } else { 0.0 })
        .collect();
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    design.weighted_cross(&ones, &vec![0.0; n], &mut gram, &mut rhs);
    let curvature = (0..d).map(|k| gram[(k, k)]).fold(0.0_f64, f64::max) / kernel.h();
    let curvature = if curvature > 0.0 { curvature } else { 1.0 };

    let mut resid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    problem.residuals(&beta, &mut resid);
    let mut value = loss_sum(&resid);
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut iterations = 0;
    let mut gradient_norm;
    let mut converged = false;
    loop {
        for i in 0..n {
            if problem.included(i) {
                let (d1, d2) = kernel.loss_derivatives(resid[i], tau);
                z[i] = d1;
                w[i] = d2;
            } else {
                z[i] = 0.0;
                w[i] = 0.0;
            }
        }
        // rhs = X'ℓ' is minus the gradient of the summed loss in β.
        design.weighted_cross(&w, &z, &mut gram, &mut rhs);
        gradient_norm = rhs.amax() / n_inc;
        if gradient_norm <= tol {
            converged = true;
            break;
        }
        if iterations >= 200 {
            break;
        }
        iterations += 1;

        let mut moved = false;
        for damping in std::iter::once(0.0).chain((0..7).map(|e| curvature * 10f64.powi(2 * e - 8)))
        {
            let mut h = gram.clone();
            for k in 0..d {
                h[(k, k)] += damping;
            }
            let Some(ch) = h.cholesky() else { continue };
            let step = ch.solve(&rhs);
            let slope = -rhs.dot(&step);
            if !(slope < 0.0) {
                continue;
            }
            let mut alpha = 1.0;
            for _ in 0..40 {
                let cand: Vec<f64> = beta
                    .iter()
                    .zip(step.iter())
                    .map(|(b, s)| b + alpha * s)
                    .collect();
                problem.residuals(&cand, &mut trial);
                let v = loss_sum(&trial);
                if v < value && v <= value + 1e-4 * alpha * slope {
                    beta = cand;
                    value = v;
                    std::mem::swap(&mut resid, &mut trial);
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(SmoothedQrSolution {
        beta,
        objective: value,
        gradient_norm,
        converged,
        iterations,
    })
}
