//! Problem construction: datasets, the one-vs-rest label matrix, bias
//! absorption, standardization and the affine parameterization of every
//! weight matrix satisfying the projected data-fitting equation.
//!
//! For a design matrix `X` (bias column included) with rank `m0` and
//! `n0 = n - m0` free columns, tracked elimination gives `D·X = [I M; 0 0]`
//! up to column order. Every solution of `X·W = X·X⁺·(Y + E)` is then
//!
//! ```text
//! W[pivot] = N + L·E - M·U
//! W[free]  = U
//! ```
//!
//! with `L` the top `m0` rows of `D·X·X⁺` and `N = L·Y`. In matrix form this is
//! `W = P·U + Q + [L·E; 0]` where `P` carries `-M` on the pivot rows and the
//! identity on the free rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{pseudo_inverse, rref_tracked, Matrix};

/// Per-feature standardization parameters computed on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    /// Population standard deviation (divides by the sample count).
    pub std: Vec<f64>,
    /// Zero-variance columns. They are mapped to all zeros and never selected.
    pub constant: Vec<bool>,
}

impl Normalization {
    /// Applies these parameters to a feature matrix with the same column count.
    pub fn apply(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                op: "normalization",
                expected: (features.rows(), self.mean.len()),
                got: features.shape(),
            });
        }
        Ok(Matrix::from_fn(features.rows(), features.cols(), |i, j| {
            if self.constant[j] {
                0.0
            } else {
                (features[(i, j)] - self.mean[j]) / self.std[j]
            }
        }))
    }

    pub fn constant_features(&self) -> Vec<usize> {
        self.constant
            .iter()
            .enumerate()
            .filter_map(|(j, &c)| c.then_some(j))
            .collect()
    }
}

/// Samples, class labels and the normalization state.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `m × n` raw (or standardized) features, bias not included.
    pub features: Matrix,
    /// Class id of every sample, in `1..=class_count`.
    pub labels: Vec<usize>,
    pub class_count: usize,
    /// Original label text for class id `k` at index `k - 1`.
    pub class_names: Vec<String>,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    /// Builds a dataset and checks that every class `1..=class_count` occurs.
    pub fn new(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let names = (1..=class_count).map(|k| k.to_string()).collect();
        let ds = Dataset {
            features,
            labels,
            class_count,
            class_names: names,
            normalization: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn samples(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    /// Checks the training invariants: finite features, matching label count,
    /// at least two classes and every class present.
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.features.rows() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} samples",
                self.labels.len(),
                self.features.rows()
            )));
        }
        if self.class_count < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, got {}",
                self.class_count
            )));
        }
        if !self.features.is_finite() {
            return Err(Error::NonFinite("dataset features"));
        }
        let mut seen = vec![false; self.class_count];
        for &y in &self.labels {
            if y == 0 || y > self.class_count {
                return Err(Error::UnknownClass {
                    id: y,
                    class_count: self.class_count,
                });
            }
            seen[y - 1] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!("class {} has no samples", k + 1)));
        }
        Ok(())
    }

    /// Rows `indices` in the given order; class bookkeeping is preserved and
    /// classes may be absent from the subset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            class_names: self.class_names.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Column subset of the features, e.g. the selected features.
    pub fn with_features(&self, columns: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_cols(columns),
            normalization: None,
            ..self.clone()
        }
    }

    /// Zero-variance features recorded by the last normalization, if any.
    pub fn constant_features(&self) -> Vec<usize> {
        self.normalization
            .as_ref()
            .map(Normalization::constant_features)
            .unwrap_or_default()
    }
}

/// One-vs-rest `±1` label matrix (`m × c`).
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    pub values: Matrix,
}

impl LabelMatrix {
    pub fn samples(&self) -> usize {
        self.values.rows()
    }

    pub fn classes(&self) -> usize {
        self.values.cols()
    }
}

/// Row `i` is `+1` at the class of sample `i` and `-1` elsewhere.
pub fn build_label_matrix(labels: &[usize], class_count: usize) -> Result<LabelMatrix> {
    if labels.is_empty() {
        return Err(Error::InvalidDataset("no labels".into()));
    }
    let mut values = Matrix::from_fn(labels.len(), class_count, |_, _| -1.0);
    for (i, &y) in labels.iter().enumerate() {
        if y == 0 || y > class_count {
            return Err(Error::UnknownClass { id: y, class_count });
        }
        values[(i, y - 1)] = 1.0;
    }
    Ok(LabelMatrix { values })
}

/// Appends a column of ones so the last row of `W` acts as the bias.
pub fn absorb_bias(features: &Matrix) -> Matrix {
    features.hstack(&Matrix::from_fn(features.rows(), 1, |_, _| 1.0))
}

/// Standardizes every feature to zero mean and unit population standard
/// deviation. Constant columns become all zeros and are flagged.
pub fn normalize(dataset: &Dataset) -> Result<Dataset> {
    let m = dataset.samples();
    if m < 2 {
        return Err(Error::InvalidDataset(format!(
            "normalization needs at least 2 samples, got {m}"
        )));
    }
    let stats = fit_normalization(&dataset.features);
    Ok(Dataset {
        features: stats.apply(&dataset.features)?,
        normalization: Some(stats),
        ..dataset.clone()
    })
}

pub(crate) fn fit_normalization(features: &Matrix) -> Normalization {
    let (m, n) = features.shape();
    let mut mean = vec![0.0; n];
    let mut std = vec![0.0; n];
    let mut constant = vec![false; n];
    for j in 0..n {
        let col = features.column(j);
        let mu = col.iter().sum::<f64>() / m as f64;
        let var = col.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / m as f64;
        let sd = var.sqrt();
        mean[j] = mu;
        if sd <= 1e-12 * (1.0 + mu.abs()) {
            constant[j] = true;
            std[j] = 1.0;
        } else {
            std[j] = sd;
        }
    }
    Normalization { mean, std, constant }
}

/// Affine parameterization `W = P·U + Q + [L·E; 0]` of all solutions to the
/// projected data-fitting equation.
///
/// Rows of `P`, `Q` and of every composed `W` follow the original column
/// order of the design matrix; `pivot_columns[i]` is the feature behind the
/// `i`-th row of `M`, `N` and `L`, `free_columns[j]` the feature behind the
/// `j`-th row of `U`.
#[derive(Clone, Debug)]
pub struct SolutionSpace {
    pub m0: usize,
    pub n0: usize,
    /// `m0 × n0` free-column block of the reduced echelon form.
    pub m_mat: Matrix,
    /// `m0 × c`, equal to `L·Y`.
    pub n_mat: Matrix,
    /// `m0 × m`, the top `m0` rows of `D·X·X⁺`.
    pub l_mat: Matrix,
    /// `n × n0`.
    pub p_mat: Matrix,
    /// `n × c`.
    pub q_mat: Matrix,
    pub pivot_columns: Vec<usize>,
    pub free_columns: Vec<usize>,
    pub projector_applied: bool,
}

impl SolutionSpace {
    /// Number of rows of `W` (design columns, bias included).
    pub fn weight_rows(&self) -> usize {
        self.m0 + self.n0
    }

    pub fn classes(&self) -> usize {
        self.n_mat.cols()
    }

    pub fn samples(&self) -> usize {
        self.l_mat.cols()
    }

    /// `N + L·E - M·U`: the pivot rows of the composed weight matrix.
    pub fn pivot_rows(&self, u: &Matrix, e: &Matrix) -> Matrix {
        self.constant_part(e).sub(&self.m_mat.matmul(u))
    }

    /// `N + L·E`: the pivot rows of `Q + [L·E; 0]`.
    pub fn constant_part(&self, e: &Matrix) -> Matrix {
        self.n_mat.add(&self.l_mat.matmul(e))
    }

    /// Scatters pivot rows and free rows back into original feature order.
    pub fn assemble(&self, pivot_rows: &Matrix, u: &Matrix) -> Matrix {
        let mut w = Matrix::zeros(self.weight_rows(), self.classes());
        for (i, &r) in self.pivot_columns.iter().enumerate() {
            w.row_mut(r).copy_from_slice(pivot_rows.row(i));
        }
        for (j, &r) in self.free_columns.iter().enumerate() {
            w.row_mut(r).copy_from_slice(u.row(j));
        }
        w
    }

    /// `P·U + Q + [L·E; 0]`.
    pub fn compose(&self, u: &Matrix, e: &Matrix) -> Matrix {
        self.assemble(&self.pivot_rows(u, e), u)
    }
}

/// Runs tracked elimination on `x` and extracts `M`, `N`, `L`, `P`, `Q`.
///
/// The projector `X·X⁺` is always applied to the right-hand side; on a
/// consistent system it acts as the identity on the range of `X`.
pub fn build_solution_space(x: &Matrix, y: &LabelMatrix) -> Result<SolutionSpace> {
    let (m, n) = x.shape();
    if y.samples() != m {
        return Err(Error::DimensionMismatch {
            op: "build_solution_space",
            expected: (m, y.classes()),
            got: y.values.shape(),
        });
    }
    let rref = rref_tracked(x)?;
    let m0 = rref.rank;
    if m0 == 0 {
        return Err(Error::ZeroRank);
    }
    let pinv = pseudo_inverse(x)?;
    let projector = x.matmul(&pinv);

    let pivot_columns = rref.pivot_columns.clone();
    let mut is_pivot = vec![false; n];
    pivot_columns.iter().for_each(|&j| is_pivot[j] = true);
    let free_columns: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
    let n0 = free_columns.len();

    let top = rref.transform.row_block(0, m0);
    let l_mat = top.matmul(&projector);
    let n_mat = l_mat.matmul(&y.values);
    let m_mat = rref.reduced.row_block(0, m0).select_cols(&free_columns);

    let c = y.classes();
    let mut p_mat = Matrix::zeros(n, n0);
    let mut q_mat = Matrix::zeros(n, c);
    for (i, &r) in pivot_columns.iter().enumerate() {
        for j in 0..n0 {
            p_mat[(r, j)] = -m_mat[(i, j)];
        }
        q_mat.row_mut(r).copy_from_slice(n_mat.row(i));
    }
    for (j, &r) in free_columns.iter().enumerate() {
        p_mat[(r, j)] = 1.0;
    }

    Ok(SolutionSpace {
        m0,
        n0,
        m_mat,
        n_mat,
        l_mat,
        p_mat,
        q_mat,
        pivot_columns,
        free_columns,
        projector_applied: true,
    })
}
