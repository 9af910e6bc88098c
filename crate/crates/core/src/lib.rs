//! Embedded feature selection by direct minimization of the `ℓ₂,ₚ` row
//! sparsity of a linear one-vs-rest classifier, subject to large-margin
//! data-fitting constraints.
//!
//! The pipeline is: load a [`Dataset`](problem::Dataset), standardize it, build
//! the affine [`SolutionSpace`](problem::SolutionSpace) of weight matrices that
//! satisfy the constraints, then run the reweighting loop in [`solver`] and rank
//! features by the row norms of the final weight matrix.

pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod matrix;
pub mod nnls;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use problem::{Dataset, LabelMatrix, SolutionSpace};
pub use solver::{FeatureRanking, SolverConfig, SolverState};
