//! Dense row-major matrices and the handful of factorizations the solver needs.
//!
//! Products, norms and the tracked reduced row echelon form are implemented
//! here directly. The singular value decomposition comes from `faer`, LU and
//! QR from `nalgebra`; everything crossing this module boundary is a
//! [`Matrix`].

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative threshold used when flushing entries to zero during elimination.
pub const ELIMINATION_TOLERANCE: f64 = 1e-12;

/// Systems whose equilibrated 1-norm condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e15;

/// Dense real matrix stored in row-major order.
///
/// Zero-sized dimensions are allowed so that degenerate parameterizations
/// (for example a solution space with no free variables) stay representable.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_vec",
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row slices.
    ///
    /// # Panics
    /// Panics if the rows have different lengths.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product `self · rhs`.
    ///
    /// # Panics
    /// Panics if the inner dimensions disagree.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Multiplies every row `i` by `weights[i]`, i.e. `diag(weights) · self`.
    pub fn scale_rows(&self, weights: &[f64]) -> Matrix {
        assert_eq!(weights.len(), self.rows);
        let mut out = self.clone();
        for (i, &w) in weights.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|x| *x *= w);
        }
        out
    }

    /// Multiplies every column `j` by `weights[j]`, i.e. `self · diag(weights)`.
    pub fn scale_cols(&self, weights: &[f64]) -> Matrix {
        assert_eq!(weights.len(), self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for (x, &w) in out.row_mut(i).iter_mut().zip(weights) {
                *x *= w;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a * b)
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "elementwise shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Appends the columns of `rhs` to the right of `self`.
    pub fn hstack(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows);
        let cols = self.cols + rhs.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(rhs.row(i));
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Default for Matrix {
    fn default() -> Self {
        Matrix::zeros(0, 0)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub(crate) fn check_power(p: f64) -> Result<()> {
    if p > 0.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidPower(p))
    }
}

/// Row-wise mixed norm `(Σᵢ ‖aᵢ‖₂ᵖ)^(1/p)`.
///
/// A quasi-norm for `p < 1`. Returns 0 for the all-zero matrix.
pub fn l2p_norm(a: &Matrix, p: f64) -> Result<f64> {
    check_power(p)?;
    Ok(l2p_norm_from_row_norms(&a.row_norms(), p))
}

pub(crate) fn l2p_norm_from_row_norms(norms: &[f64], p: f64) -> f64 {
    let s: f64 = norms.iter().filter(|&&r| r > 0.0).map(|r| r.powf(p)).sum();
    if s == 0.0 {
        0.0
    } else {
        s.powf(1.0 / p)
    }
}

/// Moore–Penrose pseudo-inverse through the singular value decomposition.
///
/// Singular values below `max(rows, cols) · ε · σ_max` are treated as zero.
pub fn pseudo_inverse(a: &Matrix) -> Result<Matrix> {
    if !a.is_finite() {
        return Err(Error::NonFinite("pseudo_inverse input"));
    }
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Matrix::zeros(n, m));
    }
    let (u, sigma, v_t) = thin_svd(a)?;
    let s_max = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = m.max(n) as f64 * f64::EPSILON * s_max;

    // A⁺ = V · Σ⁺ · Uᵀ, accumulated one singular triple at a time.
    let mut out = Matrix::zeros(n, m);
    for (k, &s) in sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..n {
            let vik = v_t[(k, i)] * inv;
            if vik == 0.0 {
                continue;
            }
            let row = out.row_mut(i);
            for (j, o) in row.iter_mut().enumerate() {
                *o += vik * u[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Thin SVD `a = U·diag(σ)·Vᵀ`, returned as `(U, σ, Vᵀ)`.
fn thin_svd(a: &Matrix) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = fa.thin_svd().map_err(|_| Error::SvdFailure)?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let k = m.min(n);
    let sigma: Vec<f64> = (0..k).map(|i| s[i]).collect();
    Ok((
        DMatrix::from_fn(m, k, |i, j| u[(i, j)]),
        sigma,
        DMatrix::from_fn(k, n, |i, j| v[(j, i)]),
    ))
}

/// Output of [`rref_tracked`].
#[derive(Clone, Debug)]
pub struct RrefResult {
    /// The reduced row echelon form.
    pub reduced: Matrix,
    /// Accumulated row operations: `transform · input = reduced`.
    pub transform: Matrix,
    pub rank: usize,
    /// Column index of the leading one in each of the first `rank` rows.
    pub pivot_columns: Vec<usize>,
}

/// Gauss–Jordan elimination with partial (row) pivoting that also records
/// the accumulated row-operation matrix.
///
/// Columns are never permuted; pivot positions are reported instead. At every
/// column step entries whose magnitude is below
/// [`ELIMINATION_TOLERANCE`] times the largest entry of the working matrix are
/// flushed to exact zero, which makes the rank decision deterministic.
pub fn rref_tracked(a: &Matrix) -> Result<RrefResult> {
    if !a.is_finite() {
        return Err(Error::NonFinite("rref input"));
    }
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut d = Matrix::identity(m);
    let mut pivots = Vec::new();
    let mut lead = 0;

    for col in 0..n {
        if lead == m {
            break;
        }
        let tol = ELIMINATION_TOLERANCE * r.max_abs();
        let (p, best) = (lead..m)
            .map(|i| (i, r[(i, col)].abs()))
            .fold((lead, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol {
            for i in lead..m {
                r[(i, col)] = 0.0;
            }
            continue;
        }
        swap_rows(&mut r, lead, p);
        swap_rows(&mut d, lead, p);

        let inv = 1.0 / r[(lead, col)];
        r.row_mut(lead).iter_mut().for_each(|x| *x *= inv);
        d.row_mut(lead).iter_mut().for_each(|x| *x *= inv);
        r[(lead, col)] = 1.0;

        let pivot_r = r.row(lead).to_vec();
        let pivot_d = d.row(lead).to_vec();
        for i in 0..m {
            if i == lead {
                continue;
            }
            let f = r[(i, col)];
            if f == 0.0 {
                continue;
            }
            for (x, &y) in r.row_mut(i).iter_mut().zip(&pivot_r) {
                *x -= f * y;
            }
            for (x, &y) in d.row_mut(i).iter_mut().zip(&pivot_d) {
                *x -= f * y;
            }
            r[(i, col)] = 0.0;
        }

        let flush = ELIMINATION_TOLERANCE * r.max_abs();
        r.data.iter_mut().for_each(|x| {
            if x.abs() < flush {
                *x = 0.0
            }
        });
        pivots.push(col);
        lead += 1;
    }

    Ok(RrefResult {
        reduced: r,
        transform: d,
        rank: pivots.len(),
        pivot_columns: pivots,
    })
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    let cols = m.cols;
    let (lo, hi) = (a.min(b), a.max(b));
    let (head, tail) = m.data.split_at_mut(hi * cols);
    head[lo * cols..(lo + 1) * cols].swap_with_slice(&mut tail[..cols]);
}

/// Solves `a · x = b` for square nonsingular `a` by LU factorization.
///
/// The system is row- and column-equilibrated first; a Hager 1-norm condition
/// estimate of the equilibrated matrix above [`MAX_CONDITION`] is reported as
/// [`Error::Singular`].
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "solve_linear (square)",
            expected: (n, n),
            got: a.shape(),
        });
    }
    if b.rows() != n {
        return Err(Error::DimensionMismatch {
            op: "solve_linear (rhs)",
            expected: (n, b.cols()),
            got: b.shape(),
        });
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("solve_linear input"));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, b.cols()));
    }

    let (row_scale, col_scale) = equilibrate(a).ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let scaled = a.scale_rows(&row_scale).scale_cols(&col_scale);

    let na = scaled.to_nalgebra();
    let lu = na.clone().lu();
    let lu_t = na.transpose().lu();
    let condition = one_norm(&scaled) * inverse_one_norm_estimate(&lu, &lu_t, n);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular { condition });
    }

    let rhs = b.scale_rows(&row_scale).to_nalgebra();
    let y = lu.solve(&rhs).ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let x = Matrix::from_nalgebra(&y).scale_rows(&col_scale);
    if !x.is_finite() {
        return Err(Error::NonFinite("solve_linear result"));
    }
    Ok(x)
}

fn equilibrate(a: &Matrix) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = a.rows();
    let mut rs = vec![0.0; n];
    for (i, r) in rs.iter_mut().enumerate() {
        let mx = a.row(i).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if mx == 0.0 {
            return None;
        }
        *r = 1.0 / mx;
    }
    let mut cs = vec![0.0; a.cols()];
    for (j, c) in cs.iter_mut().enumerate() {
        let mx = (0..n).fold(0.0_f64, |m, i| m.max((a[(i, j)] * rs[i]).abs()));
        if mx == 0.0 {
            return None;
        }
        *c = 1.0 / mx;
    }
    Some((rs, cs))
}

fn one_norm(a: &Matrix) -> f64 {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Hager's estimator for ‖A⁻¹‖₁ using solves with A and Aᵀ.
fn inverse_one_norm_estimate(
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_t: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
) -> f64 {
    let mut x = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = 0.0;
    for _ in 0..5 {
        let Some(y) = lu.solve(&x) else {
            return f64::INFINITY;
        };
        estimate = y.iter().map(|v| v.abs()).sum();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let Some(z) = lu_t.solve(&xi) else {
            return f64::INFINITY;
        };
        let (j, zmax) = z.iter().enumerate().fold(
            (0, 0.0_f64),
            |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc },
        );
        if zmax <= z.dot(&x) {
            break;
        }
        x.fill(0.0);
        x[j] = 1.0;
    }
    estimate
}
