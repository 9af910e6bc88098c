//! Independent reference computations shared by the integration suites.
//! Everything here goes through nalgebra directly rather than the crate's own
//! linear algebra.

#![allow(dead_code)]

use l2p_select::{Dataset, Matrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn to_na(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

pub fn from_na(a: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Balanced labels `i mod c + 1`, shuffled.
pub fn shuffled_labels(rng: &mut ChaCha8Rng, m: usize, c: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..m).map(|i| i % c + 1).collect();
    for i in (1..m).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    labels
}

/// The random instance family of the monotonicity suite:
/// `m ∈ [10, 30]`, `n ∈ [20, 60]`, `c ∈ {2, 3, 4}`, standard normal features.
pub fn random_instance(seed: u64) -> Dataset {
    let mut r = rng(seed);
    let m = r.random_range(10..=30);
    let n = r.random_range(20..=60);
    let c = [2, 3, 4][r.random_range(0..3)];
    let x = gaussian(&mut r, m, n);
    let labels = shuffled_labels(&mut r, m, c);
    Dataset::new(x, labels, c).unwrap()
}

/// Features with a trailing ones column.
pub fn with_bias(features: &Matrix) -> DMatrix<f64> {
    let (m, n) = features.shape();
    DMatrix::from_fn(m, n + 1, |i, j| if j < n { features[(i, j)] } else { 1.0 })
}

pub fn label_matrix(labels: &[usize], c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), c, |i, j| if labels[i] == j + 1 { 1.0 } else { -1.0 })
}

/// Moore–Penrose inverse and an orthonormal null-space basis from the
/// symmetric eigendecomposition of `XᵀX`. Eigenvalues below `1e-12·λ_max`
/// count as zero, which suits the well-conditioned or exactly rank-deficient
/// matrices the suites build.
pub fn pinv_and_null(x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = x.ncols();
    let eig = nalgebra::SymmetricEigen::new(x.transpose() * x);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = 1e-12 * lmax;
    let mut pinv_gram = DMatrix::<f64>::zeros(n, n);
    let mut null_cols = Vec::new();
    for k in 0..n {
        let v = eig.eigenvectors.column(k);
        if eig.eigenvalues[k] > cutoff && lmax > 0.0 {
            pinv_gram += v * v.transpose() / eig.eigenvalues[k];
        } else {
            null_cols.push(k);
        }
    }
    (pinv_gram * x.transpose(), eig.eigenvectors.select_columns(&null_cols))
}

/// `min ‖A·x − b‖²  s.t.  x ≥ 0` by enumeration. Some minimizer is supported
/// on linearly independent columns, so only full-rank supports are solved,
/// each by QR, and kept when feasible. Returns the best objective and its
/// minimizer.
pub fn brute_force_nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (f64, Vec<f64>) {
    let n = a.ncols();
    let mut best = (b.norm_squared(), vec![0.0; n]);
    for mask in 1u32..(1u32 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        if cols.len() > a.nrows() {
            continue;
        }
        let sub = a.select_columns(&cols);
        let qr = sub.clone().qr();
        let r = qr.r();
        let rmax = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r.diagonal().iter().any(|v| v.abs() <= 1e-10 * rmax) {
            continue;
        }
        let qtb = qr.q().transpose() * b;
        let Some(coef) = r.solve_upper_triangular(&qtb) else {
            continue;
        };
        if coef.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (k, &j) in cols.iter().enumerate() {
            x[j] = coef[k];
        }
        let f = (b - a * DVector::from_column_slice(&x)).norm_squared();
        if f < best.0 {
            best = (f, x);
        }
    }
    best
}

/// Projected gradient with a `1/‖A‖²` step, for problems too large to
/// enumerate.
pub fn projected_gradient_nnls(a: &DMatrix<f64>, b: &DVector<f64>, iterations: usize) -> Vec<f64> {
    let step = 1.0 / a.norm_squared().max(f64::MIN_POSITIVE);
    let mut x = DVector::zeros(a.ncols());
    for _ in 0..iterations {
        let g = a.transpose() * (a * &x - b);
        x -= step * g;
        x.apply(|v| *v = v.max(0.0));
    }
    x.iter().copied().collect()
}

pub fn row_norm_sum(w: &DMatrix<f64>) -> f64 {
    w.row_iter().map(|r| r.norm()).sum()
}

/// Reference optimum of `min ‖W‖₂,₁` over `X·W = X·X⁺·(Y + E)`, `Y ⊙ E ≥ 0`.
///
/// Feasible points are `W = X⁺·(Y + Y⊙F) + Z·V` with `F ≥ 0` and `Z` a null
/// space basis, so projection only clips `F`. The nonsmooth row norms are
/// replaced by `√(‖w‖² + μ²)` and minimized by accelerated projected gradient,
/// with `μ` shrunk tenfold per stage and each stage warm-started. Returns the
/// exact `‖W‖₂,₁` of the last iterate, which is feasible.
pub fn convex_reference(features: &Matrix, labels: &[usize], c: usize, iterations_per_stage: usize) -> f64 {
    let x = with_bias(features);
    let y = label_matrix(labels, c);
    let (pinv, null) = pinv_and_null(&x);
    let (m, _) = x.shape();
    let k = null.ncols();
    let mut f = DMatrix::<f64>::zeros(m, c);
    let mut v = DMatrix::<f64>::zeros(k, c);
    let compose = |f: &DMatrix<f64>, v: &DMatrix<f64>| -> DMatrix<f64> {
        let e = y.component_mul(f);
        &pinv * (&y + e) + &null * v
    };
    let stacked = {
        let mut s = DMatrix::zeros(pinv.nrows(), m + k);
        s.view_mut((0, 0), (pinv.nrows(), m)).copy_from(&pinv);
        s.view_mut((0, m), (pinv.nrows(), k)).copy_from(&null);
        s
    };
    let op_norm2 = nalgebra::SymmetricEigen::new(stacked.transpose() * &stacked)
        .eigenvalues
        .max();

    let mut best = row_norm_sum(&compose(&f, &v));
    let mut mu = 1e-1;
    while mu >= 1e-9 {
        let step = mu / op_norm2;
        let (mut f_prev, mut v_prev) = (f.clone(), v.clone());
        let mut t = 1.0_f64;
        for _ in 0..iterations_per_stage {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let beta = (t - 1.0) / t_next;
            let fy = &f + (&f - &f_prev) * beta;
            let vy = &v + (&v - &v_prev) * beta;
            let w = compose(&fy, &vy);
            let mut g = w.clone();
            for mut row in g.row_iter_mut() {
                let r = row.norm();
                row /= (r * r + mu * mu).sqrt();
            }
            let grad_f = y.component_mul(&(pinv.transpose() * &g));
            let grad_v = null.transpose() * &g;
            f_prev = f;
            v_prev = v;
            f = fy - grad_f * step;
            f.apply(|z| *z = z.max(0.0));
            v = vy - grad_v * step;
            t = t_next;
        }
        best = best.min(row_norm_sum(&compose(&f, &v)));
        mu /= 10.0;
    }
    best
}
