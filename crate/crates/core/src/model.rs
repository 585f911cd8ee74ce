//! Domain types shared by every stage of the estimation pipeline.

use nalgebra::DMatrix;

use crate::error::{MqfError, Result};

/// A quantile level τ, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(MqfError::InvalidTau(tau))
        }
    }

    pub fn median() -> Self {
        Self(0.5)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// The observed matrix sequence `X_1, ..., X_T` with an observation mask.
///
/// Storage is t-major, then row-major inside each matrix: entry `(t, i, j)`
/// lives at `t * p1 * p2 + i * p2 + j`. Masked-out entries (`false`) are
/// ignored by every objective; their stored value is never read.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPanel {
    periods: usize,
    p1: usize,
    p2: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl MatrixPanel {
    /// Fully observed panel.
    pub fn new(periods: usize, p1: usize, p2: usize, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::with_mask(periods, p1, p2, values, vec![true; n])
    }

    pub fn with_mask(
        periods: usize,
        p1: usize,
        p2: usize,
        values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if periods == 0 || p1 == 0 || p2 == 0 {
            return Err(MqfError::DimensionMismatch(format!(
                "panel dimensions must be positive, got T={periods}, p1={p1}, p2={p2}"
            )));
        }
        let n = periods * p1 * p2;
        if values.len() != n || mask.len() != n {
            return Err(MqfError::DimensionMismatch(format!(
                "expected {n} entries for T={periods}, p1={p1}, p2={p2}; got {} values and {} mask flags",
                values.len(),
                mask.len()
            )));
        }
        for (k, (&v, &m)) in values.iter().zip(&mask).enumerate() {
            if m && !v.is_finite() {
                let (t, i, j) = (k / (p1 * p2), (k / p2) % p1, k % p2);
                return Err(MqfError::NonFinite(format!(
                    "observed entry (t={}, i={}, j={})",
                    t + 1,
                    i + 1,
                    j + 1
                )));
            }
        }
        let panel = Self {
            periods,
            p1,
            p2,
            values,
            mask,
        };
        if !panel.mask.iter().any(|&m| m) {
            return Err(MqfError::EmptySlice("the whole panel".into()));
        }
        Ok(panel)
    }

    /// Builds a fully observed panel from a list of equally shaped matrices.
    pub fn from_matrices(mats: &[DMatrix<f64>]) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| MqfError::DimensionMismatch("empty matrix sequence".into()))?;
        let (p1, p2) = first.shape();
        let mut values = Vec::with_capacity(mats.len() * p1 * p2);
        for (t, m) in mats.iter().enumerate() {
            if m.shape() != (p1, p2) {
                return Err(MqfError::DimensionMismatch(format!(
                    "matrix {} has shape {:?}, expected {:?}",
                    t + 1,
                    m.shape(),
                    (p1, p2)
                )));
            }
            for i in 0..p1 {
                for j in 0..p2 {
                    values.push(m[(i, j)]);
                }
            }
        }
        Self::new(mats.len(), p1, p2, values)
    }

    #[inline]
    pub fn periods(&self) -> usize {
        self.periods
    }

    #[inline]
    pub fn p1(&self) -> usize {
        self.p1
    }

    #[inline]
    pub fn p2(&self) -> usize {
        self.p2
    }

    /// `(T, p1, p2)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.periods, self.p1, self.p2)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, t: usize, i: usize, j: usize) -> usize {
        (t * self.p1 + i) * self.p2 + j
    }

    #[inline]
    pub fn value(&self, t: usize, i: usize, j: usize) -> f64 {
        self.values[self.index(t, i, j)]
    }

    #[inline]
    pub fn is_observed(&self, t: usize, i: usize, j: usize) -> bool {
        self.mask[self.index(t, i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Flat index range of period `t`.
    pub fn slab(&self, t: usize) -> std::ops::Range<usize> {
        let size = self.p1 * self.p2;
        t * size..(t + 1) * size
    }

    pub fn n_observed(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Period `t` as a dense matrix; masked entries are returned as stored.
    pub fn matrix(&self, t: usize) -> DMatrix<f64> {
        let s = self.slab(t);
        DMatrix::from_row_slice(self.p1, self.p2, &self.values[s])
    }

    /// Same mask, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::with_mask(self.periods, self.p1, self.p2, values, self.mask.clone())
    }

    /// Same values, new mask.
    pub fn with_new_mask(&self, mask: Vec<bool>) -> Result<Self> {
        Self::with_mask(self.periods, self.p1, self.p2, self.values.clone(), mask)
    }

    /// Every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Reshapes every `X_t` into the column vector `vec(X_t)` (columns stacked),
    /// giving a `(p1 p2) x 1` panel.
    pub fn vectorized(&self) -> Self {
        let n = self.values.len();
        let mut values = Vec::with_capacity(n);
        let mut mask = Vec::with_capacity(n);
        for t in 0..self.periods {
            for j in 0..self.p2 {
                for i in 0..self.p1 {
                    let k = self.index(t, i, j);
                    values.push(self.values[k]);
                    mask.push(self.mask[k]);
                }
            }
        }
        Self {
            periods: self.periods,
            p1: self.p1 * self.p2,
            p2: 1,
            values,
            mask,
        }
    }
}

/// Model parameters θ: row loadings `R` (p1 x k1), column loadings `C`
/// (p2 x k2) and one `k1 x k2` factor matrix per period.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorParams {
    pub r: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub f: Vec<DMatrix<f64>>,
}

impl FactorParams {
    pub fn new(r: DMatrix<f64>, c: DMatrix<f64>, f: Vec<DMatrix<f64>>) -> Result<Self> {
        if f.is_empty() {
            return Err(MqfError::DimensionMismatch("no factor matrices".into()));
        }
        let (k1, k2) = (r.ncols(), c.ncols());
        if k1 == 0 || k2 == 0 {
            return Err(MqfError::DimensionMismatch(
                "loadings need at least one column".into(),
            ));
        }
        if let Some((t, ft)) = f.iter().enumerate().find(|(_, ft)| ft.shape() != (k1, k2)) {
            return Err(MqfError::DimensionMismatch(format!(
                "F_{} has shape {:?}, expected ({k1}, {k2})",
                t + 1,
                ft.shape()
            )));
        }
        Ok(Self { r, c, f })
    }

    #[inline]
    pub fn k1(&self) -> usize {
        self.r.ncols()
    }

    #[inline]
    pub fn k2(&self) -> usize {
        self.c.ncols()
    }

    #[inline]
    pub fn p1(&self) -> usize {
        self.r.nrows()
    }

    #[inline]
    pub fn p2(&self) -> usize {
        self.c.nrows()
    }

    #[inline]
    pub fn periods(&self) -> usize {
        self.f.len()
    }

    /// `(T, p1, p2)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.periods(), self.p1(), self.p2())
    }

    pub(crate) fn check_panel(&self, panel: &MatrixPanel) -> Result<()> {
        if self.dims() != panel.dims() {
            return Err(MqfError::DimensionMismatch(format!(
                "parameters have (T, p1, p2) = {:?} but the panel has {:?}",
                self.dims(),
                panel.dims()
            )));
        }
        Ok(())
    }

    /// `Σ_t F_t F_t' / T` (k1 x k1).
    pub fn row_second_moment(&self) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.k1(), self.k1());
        for ft in &self.f {
            acc += ft * ft.transpose();
        }
        acc / self.periods() as f64
    }

    /// `Σ_t F_t' F_t / T` (k2 x k2).
    pub fn col_second_moment(&self) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.k2(), self.k2());
        for ft in &self.f {
            acc += ft.transpose() * ft;
        }
        acc / self.periods() as f64
    }
}

/// Converged parameters together with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: FactorParams,
    /// Final value of the (check or smoothed) objective.
    pub objective: f64,
    /// Objective after every outer sweep, starting with the initial value.
    pub objective_trace: Vec<f64>,
    /// Diagonal of `Σ_t F_t F_t' / T`, descending.
    pub sigma1: Vec<f64>,
    /// Diagonal of `Σ_t F_t' F_t / T`, descending.
    pub sigma2: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some factor second-moment eigenvalues coincided within 1e-8.
    pub tied_eigenvalues: bool,
    /// Number of subproblems that needed the ridge fallback.
    pub ridge_fallbacks: usize,
}

/// The convergence-rate denominator `min(√(p1 p2), √(p2 T), √(p1 T))`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RateL(f64);

impl RateL {
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub(crate) fn from_dims(p1: usize, p2: usize, periods: usize) -> Self {
        let (p1, p2, t) = (p1 as f64, p2 as f64, periods as f64);
        Self((p1 * p2).sqrt().min((p2 * t).sqrt()).min((p1 * t).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_level_bounds() {
        assert!(QuantileLevel::new(0.0).is_err());
        assert!(QuantileLevel::new(1.0).is_err());
        assert!(QuantileLevel::new(f64::NAN).is_err());
        assert_eq!(QuantileLevel::new(0.25).unwrap().value(), 0.25);
    }

    #[test]
    fn panel_needs_one_observed_entry() {
        let err = MatrixPanel::with_mask(2, 1, 2, vec![1.0; 4], vec![false; 4]).unwrap_err();
        assert_eq!(err, MqfError::EmptySlice("the whole panel".into()));
        assert!(
            MatrixPanel::with_mask(2, 1, 2, vec![1.0; 4], vec![false, false, true, false]).is_ok()
        );
    }

    #[test]
    fn panel_rejects_non_finite_observed_value() {
        assert!(MatrixPanel::new(1, 1, 2, vec![1.0, f64::NAN]).is_err());
        // A masked NaN is fine.
        assert!(MatrixPanel::with_mask(1, 1, 2, vec![1.0, f64::NAN], vec![true, false]).is_ok());
    }

    #[test]
    fn panel_layout_is_t_major_row_major() {
        let p = MatrixPanel::new(2, 2, 3, (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(p.value(1, 0, 2), 8.0);
        assert_eq!(p.matrix(1)[(1, 0)], 9.0);
    }

    #[test]
    fn vectorized_stacks_columns() {
        let p = MatrixPanel::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = p.vectorized();
        assert_eq!(v.dims(), (1, 4, 1));
        assert_eq!(v.values(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn factor_params_shape_checks() {
        let r = DMatrix::zeros(3, 2);
        let c = DMatrix::zeros(4, 1);
        assert!(FactorParams::new(r.clone(), c.clone(), vec![DMatrix::zeros(2, 1)]).is_ok());
        assert!(FactorParams::new(r, c, vec![DMatrix::zeros(1, 2)]).is_err());
    }
}
