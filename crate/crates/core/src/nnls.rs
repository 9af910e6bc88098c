//! Nonnegative least squares and the sign-constrained slack update built on it.
//!
//! The slack subproblem `min ‖Λ(L·E + H)‖_F²  s.t. Y ⊙ E ≥ 0` separates over
//! the columns of `E`. Because `Y` is `±1`, substituting `E = Y ⊙ Ẽ` turns the
//! sign constraint into `Ẽ ≥ 0`, and each column becomes an ordinary NNLS
//! problem with design `diag(λ)·L·diag(y_j)` and target `-diag(λ)·h_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::problem::LabelMatrix;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// `min ‖design·x - target‖₂²  s.t.  x ≥ 0`.
#[derive(Clone, Debug)]
pub struct NnlsProblem {
    pub design: Matrix,
    pub target: Vec<f64>,
    /// Budget on active-set changes; defaults to ten times the variable count.
    pub max_iterations: usize,
    /// A column may enter the passive set only while the cosine between it
    /// and the residual exceeds this.
    pub tolerance: f64,
    /// Feasible starting point. The objective never rises above its value here.
    pub initial: Option<Vec<f64>>,
}

impl NnlsProblem {
    pub fn new(design: Matrix, target: Vec<f64>) -> Result<Self> {
        if design.rows() != target.len() {
            return Err(Error::DimensionMismatch {
                op: "nnls",
                expected: (target.len(), design.cols()),
                got: design.shape(),
            });
        }
        let max_iterations = 10 * design.cols().max(1);
        Ok(NnlsProblem {
            design,
            target,
            max_iterations,
            tolerance: DEFAULT_TOLERANCE,
            initial: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NnlsSolution {
    /// Exactly nonnegative.
    pub x: Vec<f64>,
    /// `false` when the iteration budget ran out; `x` is then the last
    /// feasible iterate.
    pub converged: bool,
    pub iterations: usize,
}

/// Lawson–Hanson active-set NNLS.
pub fn nnls(problem: &NnlsProblem) -> Result<NnlsSolution> {
    let a = &problem.design;
    let (rows, n) = a.shape();
    if rows != problem.target.len() {
        return Err(Error::DimensionMismatch {
            op: "nnls",
            expected: (problem.target.len(), n),
            got: a.shape(),
        });
    }
    if !a.is_finite() || problem.target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("nnls input"));
    }
    let mut x = match &problem.initial {
        Some(x0) if x0.len() != n => {
            return Err(Error::DimensionMismatch {
                op: "nnls start",
                expected: (n, 1),
                got: (x0.len(), 1),
            })
        }
        Some(x0) => x0.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
        None => vec![0.0; n],
    };
    if n == 0 || rows == 0 {
        return Ok(NnlsSolution {
            x,
            converged: true,
            iterations: 0,
        });
    }

    let am = a.to_nalgebra();
    let b = DVector::from_column_slice(&problem.target);
    let column_norms: Vec<f64> = am.column_iter().map(|c| c.norm()).collect();
    let floor = f64::EPSILON * b.norm();

    let mut passive: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let mut rejected = vec![false; n];
    let mut iterations = 0;

    // A warm start first moves to the best point on its own support.
    if passive.iter().any(|&p| p) {
        if let Some(s) = passive_least_squares(&am, &b, &passive) {
            if !descend(
                &am,
                &b,
                &mut x,
                &mut passive,
                s,
                &mut iterations,
                problem.max_iterations,
            ) {
                return Ok(NnlsSolution {
                    x,
                    converged: false,
                    iterations,
                });
            }
        } else {
            // Dependent support: the active-set iteration cannot start here.
            // Solve cold and keep whichever point is better.
            let cold = nnls(&NnlsProblem {
                initial: None,
                ..problem.clone()
            })?;
            let residual = |v: &[f64]| (&b - &am * DVector::from_column_slice(v)).norm();
            if residual(&cold.x) <= residual(&x) {
                return Ok(cold);
            }
            return Ok(NnlsSolution {
                x,
                converged: cold.converged,
                iterations: cold.iterations,
            });
        }
    }

    loop {
        let (w, rnorm) = dual(&am, &b, &x);
        let entering = (0..n)
            .filter(|&j| {
                !passive[j] && !rejected[j] && rnorm > floor && w[j] > problem.tolerance * column_norms[j] * rnorm
            })
            .max_by(|&i, &j| (w[i] / column_norms[i]).total_cmp(&(w[j] / column_norms[j])));
        let Some(j) = entering else {
            return Ok(NnlsSolution {
                x,
                converged: true,
                iterations,
            });
        };
        if iterations >= problem.max_iterations {
            return Ok(NnlsSolution {
                x,
                converged: false,
                iterations,
            });
        }
        iterations += 1;

        passive[j] = true;
        let s = match passive_least_squares(&am, &b, &passive) {
            Some(s) if s[j] > 0.0 => s,
            // Dependent column, or rounding put the entering coefficient on the
            // wrong side: leave it out until the next accepted step.
            _ => {
                passive[j] = false;
                rejected[j] = true;
                continue;
            }
        };
        if !descend(
            &am,
            &b,
            &mut x,
            &mut passive,
            s,
            &mut iterations,
            problem.max_iterations,
        ) {
            return Ok(NnlsSolution {
                x,
                converged: false,
                iterations,
            });
        }
        rejected.iter_mut().for_each(|r| *r = false);
    }
}

// Moves from feasible `x` toward the passive-set solution `s`, stepping back
// and shrinking the passive set until `s` is strictly positive on it. Each
// move stays on the segment to a subspace minimizer, so the objective never
// rises. Returns `false` when the budget ran out.
fn descend(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &mut [f64],
    passive: &mut [bool],
    mut s: Vec<f64>,
    iterations: &mut usize,
    budget: usize,
) -> bool {
    let n = x.len();
    while let Some((blocking, alpha)) = step_length(x, &s, passive) {
        if *iterations >= budget {
            return false;
        }
        *iterations += 1;
        for i in 0..n {
            if passive[i] {
                x[i] += alpha * (s[i] - x[i]);
                if i == blocking || x[i] <= 0.0 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
        s = match passive_least_squares(a, b, passive) {
            Some(s) => s,
            None => return true,
        };
    }
    for i in 0..n {
        x[i] = if passive[i] { s[i].max(0.0) } else { 0.0 };
        if x[i] == 0.0 {
            passive[i] = false;
        }
    }
    true
}

// Negative gradient Aᵀ(b - Ax) and the residual norm.
fn dual(a: &DMatrix<f64>, b: &DVector<f64>, x: &[f64]) -> (Vec<f64>, f64) {
    let r = b - a * DVector::from_column_slice(x);
    ((a.transpose() * &r).iter().copied().collect(), r.norm())
}

fn step_length(x: &[f64], s: &[f64], passive: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..x.len() {
        if passive[i] && s[i] <= 0.0 {
            let alpha = x[i] / (x[i] - s[i]);
            if best.is_none_or(|(_, b)| alpha < b) {
                best = Some((i, alpha));
            }
        }
    }
    best
}

// Unconstrained least squares on the passive columns through Householder QR.
// Returns the full-length coefficient vector (zero off the passive set), or
// `None` when the passive columns are numerically dependent.
fn passive_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> Option<Vec<f64>> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let mut out = vec![0.0; passive.len()];
    if cols.is_empty() {
        return Some(out);
    }
    if cols.len() > a.nrows() {
        return None;
    }
    let sub = a.select_columns(&cols);
    let qr = sub.qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if rmax == 0.0 || r.diagonal().iter().any(|v| v.abs() <= 1e-12 * rmax) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    let coef = r.solve_upper_triangular(&qtb)?;
    if coef.iter().any(|v| !v.is_finite()) {
        return None;
    }
    for (k, &j) in cols.iter().enumerate() {
        out[j] = coef[k];
    }
    Some(out)
}

/// Result of [`solve_e_step`].
#[derive(Clone, Debug)]
pub struct EStepOutcome {
    /// `m × c` slack with `Y ⊙ E ≥ 0` exactly.
    pub e: Matrix,
    /// Columns whose NNLS ran out of budget.
    pub exhausted_columns: Vec<usize>,
}

/// `argmin_E ‖diag(λ)·(L·E + H)‖_F²  s.t.  Y ⊙ E ≥ 0`, one NNLS per column.
///
/// Rows with `λᵢ = 0` contribute nothing and are dropped. A feasible `start`
/// warm-starts every column, and the result is never worse than it.
pub fn solve_e_step(
    lambda_diag: &[f64],
    l: &Matrix,
    h: &Matrix,
    y: &LabelMatrix,
    start: Option<&Matrix>,
) -> Result<EStepOutcome> {
    let (m0, m) = l.shape();
    let c = y.classes();
    if lambda_diag.len() != m0 || h.shape() != (m0, c) || y.samples() != m {
        return Err(Error::DimensionMismatch {
            op: "solve_e_step",
            expected: (m0, c),
            got: h.shape(),
        });
    }
    if lambda_diag.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "slack weights must be finite and nonnegative".into(),
        ));
    }
    if let Some(e0) = start {
        if e0.shape() != (m, c) {
            return Err(Error::DimensionMismatch {
                op: "solve_e_step start",
                expected: (m, c),
                got: e0.shape(),
            });
        }
    }
    // Heaviest rows first keeps Householder QR accurate under stiff weights.
    let mut kept: Vec<usize> = (0..m0).filter(|&i| lambda_diag[i] > 0.0).collect();
    kept.sort_by(|&a, &b| lambda_diag[b].total_cmp(&lambda_diag[a]).then(a.cmp(&b)));
    let lambda: Vec<f64> = kept.iter().map(|&i| lambda_diag[i]).collect();
    let weighted_l = l.select_rows(&kept).scale_rows(&lambda);

    let mut e = Matrix::zeros(m, c);
    let mut exhausted_columns = Vec::new();
    for j in 0..c {
        let signs = y.values.column(j);
        let design = weighted_l.scale_cols(&signs);
        let target: Vec<f64> = kept.iter().zip(&lambda).map(|(&i, &w)| -w * h[(i, j)]).collect();
        let mut problem = NnlsProblem::new(design, target)?;
        problem.initial = start.map(|e0| (0..m).map(|i| signs[i] * e0[(i, j)]).collect());
        let sol = nnls(&problem)?;
        if !sol.converged {
            exhausted_columns.push(j);
        }
        for (i, (&xi, &si)) in sol.x.iter().zip(&signs).enumerate() {
            e[(i, j)] = si * xi;
        }
    }
    Ok(EStepOutcome { e, exhausted_columns })
}

/// `‖diag(λ)·(L·E + H)‖_F²`.
pub fn e_step_objective(lambda_diag: &[f64], l: &Matrix, h: &Matrix, e: &Matrix) -> f64 {
    l.matmul(e).add(h).scale_rows(lambda_diag).frobenius_norm().powi(2)
}
