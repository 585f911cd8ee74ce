use nalgebra::{DMatrix, DVector};

use crate::error::{MqfError, Result};

/// Read-only access to the design matrix of a linear quantile regression.
///
/// The solvers only ever need fitted values and weighted cross products,
/// which structured designs can compute much faster than a dense loop.
pub trait Design: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// Copies row `idx` into `out` (length `ncols`).
    fn row_into(&self, idx: usize, out: &mut [f64]);

    /// `out = X β`.
    fn fitted(&self, beta: &[f64], out: &mut [f64]) {
        let mut row = vec![0.0; self.ncols()];
        for (idx, o) in out.iter_mut().enumerate() {
            self.row_into(idx, &mut row);
            *o = dot(&row, beta);
        }
    }

    /// `out = X' v`.
    fn transpose_mul(&self, v: &[f64], out: &mut [f64]) {
        let mut row = vec![0.0; self.ncols()];
        out.fill(0.0);
        for (idx, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            self.row_into(idx, &mut row);
            for (o, x) in out.iter_mut().zip(&row) {
                *o += vi * x;
            }
        }
    }

    /// `gram = X' diag(w) X` and `rhs = X' z`.
    fn weighted_cross(
        &self,
        w: &[f64],
        z: &[f64],
        gram: &mut DMatrix<f64>,
        rhs: &mut DVector<f64>,
    ) {
        let d = self.ncols();
        let mut row = vec![0.0; d];
        let mut acc = vec![0.0; d * d];
        let mut racc = vec![0.0; d];
        for idx in 0..self.nrows() {
            if w[idx] == 0.0 && z[idx] == 0.0 {
                continue;
            }
            self.row_into(idx, &mut row);
            accumulate(&row, w[idx], z[idx], &mut acc, &mut racc);
        }
        fill_symmetric(d, &acc, &racc, gram, rhs);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn accumulate(row: &[f64], w: f64, z: f64, acc: &mut [f64], racc: &mut [f64]) {
    let d = row.len();
    for a in 0..d {
        let wa = w * row[a];
        racc[a] += z * row[a];
        let base = a * d;
        for b in a..d {
            acc[base + b] += wa * row[b];
        }
    }
}

fn fill_symmetric(
    d: usize,
    acc: &[f64],
    racc: &[f64],
    gram: &mut DMatrix<f64>,
    rhs: &mut DVector<f64>,
) {
    for a in 0..d {
        rhs[a] = racc[a];
        for b in a..d {
            gram[(a, b)] = acc[a * d + b];
            gram[(b, a)] = acc[a * d + b];
        }
    }
}

/// Dense row-major design.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDesign {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl DenseDesign {
    /// `data` holds `n` rows of length `d`, row after row.
    pub fn from_row_major(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(MqfError::DimensionMismatch(
                "design needs at least one column".into(),
            ));
        }
        if data.len() != n * d {
            return Err(MqfError::DimensionMismatch(format!(
                "design data has {} entries, expected {n} x {d}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(MqfError::NonFinite("design matrix".into()));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = m.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            for j in 0..d {
                data.push(m[(i, j)]);
            }
        }
        Self::from_row_major(n, d, data)
    }

    /// Intercept-only design with `n` rows.
    pub fn intercept(n: usize) -> Self {
        Self {
            n,
            d: 1,
            data: vec![1.0; n],
        }
    }

    #[inline]
    pub fn row(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.d..(idx + 1) * self.d]
    }
}

impl Design for DenseDesign {
    fn nrows(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.d
    }

    fn row_into(&self, idx: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(idx));
    }

    fn fitted(&self, beta: &[f64], out: &mut [f64]) {
        for (idx, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(idx), beta);
        }
    }

    fn transpose_mul(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (idx, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (o, x) in out.iter_mut().zip(self.row(idx)) {
                    *o += vi * x;
                }
            }
        }
    }

    fn weighted_cross(
        &self,
        w: &[f64],
        z: &[f64],
        gram: &mut DMatrix<f64>,
        rhs: &mut DVector<f64>,
    ) {
        let d = self.d;
        let mut acc = vec![0.0; d * d];
        let mut racc = vec![0.0; d];
        for idx in 0..self.n {
            if w[idx] == 0.0 && z[idx] == 0.0 {
                continue;
            }
            accumulate(self.row(idx), w[idx], z[idx], &mut acc, &mut racc);
        }
        fill_symmetric(d, &acc, &racc, gram, rhs);
    }
}

/// Design of the factor-matrix subproblem of one period: observation
/// `(i, j)` (row index `i * p2 + j`) has regressor `vec(r_i c_j')`, so that
/// `x' vec(F) = r_i' F c_j` with `vec` stacking the columns of `F`.
#[derive(Debug, Clone)]
pub struct KronDesign {
    p1: usize,
    p2: usize,
    k1: usize,
    k2: usize,
    /// Rows of `R`, row-major.
    r_rows: Vec<f64>,
    /// Rows of `C`, row-major.
    c_rows: Vec<f64>,
}

impl KronDesign {
    pub fn new(r: &DMatrix<f64>, c: &DMatrix<f64>) -> Self {
        let (p1, k1) = r.shape();
        let (p2, k2) = c.shape();
        let mut r_rows = Vec::with_capacity(p1 * k1);
        for i in 0..p1 {
            r_rows.extend(r.row(i).iter());
        }
        let mut c_rows = Vec::with_capacity(p2 * k2);
        for j in 0..p2 {
            c_rows.extend(c.row(j).iter());
        }
        Self {
            p1,
            p2,
            k1,
            k2,
            r_rows,
            c_rows,
        }
    }

    #[inline]
    fn r_row(&self, i: usize) -> &[f64] {
        &self.r_rows[i * self.k1..(i + 1) * self.k1]
    }

    #[inline]
    fn c_row(&self, j: usize) -> &[f64] {
        &self.c_rows[j * self.k2..(j + 1) * self.k2]
    }
}

impl Design for KronDesign {
    fn nrows(&self) -> usize {
        self.p1 * self.p2
    }

    fn ncols(&self) -> usize {
        self.k1 * self.k2
    }

    fn row_into(&self, idx: usize, out: &mut [f64]) {
        let (i, j) = (idx / self.p2, idx % self.p2);
        let (r, c) = (self.r_row(i), self.c_row(j));
        for b in 0..self.k2 {
            for a in 0..self.k1 {
                out[a + self.k1 * b] = r[a] * c[b];
            }
        }
    }

    fn fitted(&self, beta: &[f64], out: &mut [f64]) {
        let (k1, k2) = (self.k1, self.k2);
        let mut u = vec![0.0; k1];
        for j in 0..self.p2 {
            let c = self.c_row(j);
            for (a, ua) in u.iter_mut().enumerate() {
                *ua = (0..k2).map(|b| beta[a + k1 * b] * c[b]).sum();
            }
            for i in 0..self.p1 {
                out[i * self.p2 + j] = dot(self.r_row(i), &u);
            }
        }
    }

    fn transpose_mul(&self, v: &[f64], out: &mut [f64]) {
        let k1 = self.k1;
        out.fill(0.0);
        let mut s = vec![0.0; k1];
        for j in 0..self.p2 {
            s.fill(0.0);
            for i in 0..self.p1 {
                let vi = v[i * self.p2 + j];
                if vi != 0.0 {
                    for (sa, ra) in s.iter_mut().zip(self.r_row(i)) {
                        *sa += vi * ra;
                    }
                }
            }
            for (b, cb) in self.c_row(j).iter().enumerate() {
                for a in 0..k1 {
                    out[a + k1 * b] += cb * s[a];
                }
            }
        }
    }

    fn weighted_cross(
        &self,
        w: &[f64],
        z: &[f64],
        gram: &mut DMatrix<f64>,
        rhs: &mut DVector<f64>,
    ) {
        let (k1, k2) = (self.k1, self.k2);
        let d = k1 * k2;
        gram.fill(0.0);
        rhs.fill(0.0);
        let mut a_j = vec![0.0; k1 * k1];
        let mut s_j = vec![0.0; k1];
        for j in 0..self.p2 {
            a_j.fill(0.0);
            s_j.fill(0.0);
            for i in 0..self.p1 {
                let idx = i * self.p2 + j;
                let (wi, zi) = (w[idx], z[idx]);
                if wi == 0.0 && zi == 0.0 {
                    continue;
                }
                let r = self.r_row(i);
                for a in 0..k1 {
                    s_j[a] += zi * r[a];
                    let wa = wi * r[a];
                    for a2 in a..k1 {
                        a_j[a * k1 + a2] += wa * r[a2];
                    }
                }
            }
            let c = self.c_row(j);
            for b in 0..k2 {
                for a in 0..k1 {
                    rhs[a + k1 * b] += c[b] * s_j[a];
                }
                for b2 in 0..k2 {
                    let cc = c[b] * c[b2];
                    if cc == 0.0 {
                        continue;
                    }
                    for a in 0..k1 {
                        for a2 in a..k1 {
                            let v = cc * a_j[a * k1 + a2];
                            gram[(a + k1 * b, a2 + k1 * b2)] += v;
                            if a2 != a {
                                gram[(a2 + k1 * b, a + k1 * b2)] += v;
                            }
                        }
                    }
                }
            }
        }
        debug_assert_eq!(gram.nrows(), d);
    }
}
