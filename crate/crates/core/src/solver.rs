//! Iteratively reweighted minimization of `‖W‖₂,ₚ` over the solution space.
//!
//! Each outer iteration alternates two exactly solved weighted least-squares
//! problems:
//!
//! 1. with the slack `E` fixed, `U ← argmin ‖Σ(P·U + G)‖_F²` where
//!    `G = Q + [L·E; 0]` and `Σᵢᵢ = ‖wᵢ‖^(p/2 - 1)` comes from the current `W`;
//! 2. with `U` fixed, `E ← argmin ‖Λ(L·E + H)‖_F²` subject to `Y ⊙ E ≥ 0`, where
//!    `H = N - M·U` and `Λ` is built the same way from the pivot rows of the
//!    intermediate weight matrix.
//!
//! Both steps minimize a quadratic majorizer of `‖·‖₂,ₚᵖ` anchored at the
//! current point, so the objective never increases.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_power, l2p_norm_from_row_norms, pseudo_inverse, solve_linear, Matrix};
use crate::nnls::solve_e_step;
use crate::problem::{absorb_bias, build_label_matrix, build_solution_space, Dataset, LabelMatrix, SolutionSpace};

/// Relative threshold below which a row counts as outside the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub p: f64,
    pub max_outer_iterations: usize,
    pub relative_objective_tolerance: f64,
    /// Row norms below this floor are clamped when forming reweighting weights.
    pub weight_floor: f64,
    pub feature_count_d: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            p: 1.0,
            max_outer_iterations: 200,
            relative_objective_tolerance: 1e-6,
            weight_floor: 1e-8,
            feature_count_d: 10,
        }
    }
}

impl SolverConfig {
    pub fn with_p(p: f64) -> Self {
        SolverConfig {
            p,
            ..Default::default()
        }
    }

    pub fn validate(&self, real_features: usize) -> Result<()> {
        check_power(self.p)?;
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidConfig("max_outer_iterations must be positive".into()));
        }
        if self.relative_objective_tolerance.is_nan() || self.relative_objective_tolerance <= 0.0 {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.weight_floor.is_finite() && self.weight_floor > 0.0) {
            return Err(Error::InvalidConfig("weight floor must be positive".into()));
        }
        if self.feature_count_d == 0 || self.feature_count_d > real_features {
            return Err(Error::FeatureCount {
                d: self.feature_count_d,
                available: real_features,
            });
        }
        Ok(())
    }
}

/// Per-iteration variables of the reweighting loop.
#[derive(Clone, Debug)]
pub struct SolverState {
    /// `n0 × c` free-row block of `W`.
    pub u: Matrix,
    /// `m × c` slack, `Y ⊙ E ≥ 0`.
    pub e: Matrix,
    /// `n × c`, always recomposed as `P·U + Q + [L·E; 0]`.
    pub w: Matrix,
    pub sigma_diag: Vec<f64>,
    /// `‖W‖₂,ₚ` after every completed iteration.
    pub objective_trace: Vec<f64>,
    /// `‖W‖₂,ₚ` of the intermediate point after each U-step.
    pub candidate_trace: Vec<f64>,
    pub iteration: usize,
    pub converged: bool,
    /// Slack subproblems that ran out of NNLS budget over the whole run.
    pub nnls_exhausted: usize,
}

impl SolverState {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Named intermediates of one iteration.
#[derive(Clone, Debug, Default)]
pub struct IterationScratch {
    /// `Q + [L·E; 0]`, `n × c`.
    pub g: Matrix,
    /// `N - M·U`, `m0 × c`.
    pub h: Matrix,
    /// `N + L·E`, the pivot rows of `G`.
    pub k_mat: Matrix,
    /// Pivot rows of the intermediate weight matrix after the U-step.
    pub v: Matrix,
    pub lambda_diag: Vec<f64>,
    /// Squared reweighting weights, one per row of `W`.
    pub s: Vec<f64>,
    /// `s` restricted to pivot rows.
    pub s1: Vec<f64>,
    /// `s` restricted to free rows.
    pub s2: Vec<f64>,
    /// `S₂⁻¹·Mᵀ·S₁`, only filled by the push-through routes.
    pub t: Matrix,
    /// Solution of `(M·T + I)·C = K`, only filled by the push-through routes.
    pub c_mat: Matrix,
}

impl IterationScratch {
    /// Sets `s`, `s1`, `s2` from reweighting weights `sigma`.
    pub fn set_weights(&mut self, space: &SolutionSpace, sigma: &[f64]) {
        self.s = sigma.iter().map(|x| x * x).collect();
        self.s1 = space.pivot_columns.iter().map(|&i| self.s[i]).collect();
        self.s2 = space.free_columns.iter().map(|&i| self.s[i]).collect();
    }
}

/// Which closed form the U-step uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UStepRoute {
    /// `(MᵀS₁M + S₂)·U = MᵀS₁K`, an `n0 × n0` solve.
    Normal,
    /// `U = T·(M·T + I)⁻¹·K` with the inverse formed through the pseudo-inverse.
    PushThroughInverse,
    /// `U = T·C` with `(M·T + I)·C = K` solved by factorization.
    PushThroughSolve,
    /// The normal-equation problem as a least-squares solve: QR of the
    /// stacked `[S₁^½·M; S₂^½]`.
    NormalQr,
    /// The push-through problem as a minimum-norm solve: QR of the
    /// `(n0 + m0) × m0` matrix `[S₂^-½·Mᵀ; S₁^-½]`, whose Gram matrix is
    /// `(M·T + I)·S₁⁻¹`.
    PushThroughQr,
}

/// U-step with the route picked by shape: push-through when `m0 < n0`.
///
/// Both defaults work on square-root weights through an orthogonal
/// factorization; the other routes form products of the squared weights and
/// lose accuracy once the weights span many orders of magnitude.
pub fn u_step(space: &SolutionSpace, scratch: &mut IterationScratch) -> Result<Matrix> {
    let route = if space.m0 < space.n0 {
        UStepRoute::PushThroughQr
    } else {
        UStepRoute::NormalQr
    };
    u_step_with_route(space, scratch, route)
}

/// Minimizer of `‖Σ(P·U + G)‖_F²` over `U`.
///
/// With `P = [-M; I]` the normal equations read
/// `(MᵀS₁M + S₂)·U = MᵀS₁K`; every route below solves the same system.
/// Reads `s1`, `s2`, `k_mat` from the scratch and fills `t`, `c_mat` when
/// the route uses them.
pub fn u_step_with_route(space: &SolutionSpace, scratch: &mut IterationScratch, route: UStepRoute) -> Result<Matrix> {
    let c = scratch.k_mat.cols();
    if space.n0 == 0 {
        return Ok(Matrix::zeros(0, c));
    }
    if scratch.s2.iter().chain(&scratch.s1).any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::InvalidConfig("reweighting weights must be positive".into()));
    }
    let m = &space.m_mat;
    let k = &scratch.k_mat;
    match route {
        UStepRoute::Normal => {
            let mt_s1 = m.transpose().scale_cols(&scratch.s1);
            let mut lhs = mt_s1.matmul(m);
            for (j, &s2) in scratch.s2.iter().enumerate() {
                lhs[(j, j)] += s2;
            }
            solve_linear(&lhs, &mt_s1.matmul(k))
        }
        UStepRoute::PushThroughInverse | UStepRoute::PushThroughSolve => {
            let inv_s2: Vec<f64> = scratch.s2.iter().map(|v| 1.0 / v).collect();
            let t = m.transpose().scale_rows(&inv_s2).scale_cols(&scratch.s1);
            let mut lhs = m.matmul(&t);
            for i in 0..space.m0 {
                lhs[(i, i)] += 1.0;
            }
            let c_mat = if route == UStepRoute::PushThroughSolve {
                solve_linear(&lhs, k)?
            } else {
                pseudo_inverse(&lhs)?.matmul(k)
            };
            let u = t.matmul(&c_mat);
            scratch.t = t;
            scratch.c_mat = c_mat;
            if !u.is_finite() {
                return Err(Error::NonFinite("u-step"));
            }
            Ok(u)
        }
        UStepRoute::NormalQr => normal_qr(m, k, &scratch.s1, &scratch.s2),
        UStepRoute::PushThroughQr => push_through_qr(m, k, &scratch.s1, &scratch.s2),
    }
}

// min ‖S₁^½(K - M·U)‖² + ‖S₂^½·U‖², rows sorted by weight so Householder
// QR stays accurate when the weights are stiff.
fn normal_qr(m: &Matrix, k: &Matrix, s1: &[f64], s2: &[f64]) -> Result<Matrix> {
    let (m0, n0) = m.shape();
    let c = k.cols();
    let mut rows: Vec<(f64, usize)> = s1.iter().chain(s2).map(|s| s.sqrt()).zip(0..).collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut a = DMatrix::zeros(m0 + n0, n0);
    let mut rhs = DMatrix::zeros(m0 + n0, c);
    for (out, &(w, i)) in rows.iter().enumerate() {
        if i < m0 {
            for j in 0..n0 {
                a[(out, j)] = w * m[(i, j)];
            }
            for j in 0..c {
                rhs[(out, j)] = w * k[(i, j)];
            }
        } else {
            a[(out, i - m0)] = w;
        }
    }
    let qr = a.qr();
    let r = qr.r();
    check_triangle(&r)?;
    let qtb = qr.q().transpose() * rhs;
    let u = r.solve_upper_triangular(&qtb).ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    finite_u(Matrix::from_nalgebra(&u))
}

// Minimum-norm solution of [S₁^-½  M·S₂^-½]·[ξ; Z] = K, then U = S₂^-½·Z.
fn push_through_qr(m: &Matrix, k: &Matrix, s1: &[f64], s2: &[f64]) -> Result<Matrix> {
    let (m0, n0) = m.shape();
    let pi2: Vec<f64> = s2.iter().map(|s| 1.0 / s.sqrt()).collect();
    let mut at = DMatrix::zeros(n0 + m0, m0);
    for j in 0..n0 {
        for i in 0..m0 {
            at[(j, i)] = pi2[j] * m[(i, j)];
        }
    }
    for (i, s) in s1.iter().enumerate() {
        at[(n0 + i, i)] = 1.0 / s.sqrt();
    }
    let qr = at.qr();
    let r = qr.r();
    check_triangle(&r)?;
    let y = r
        .transpose()
        .solve_lower_triangular(&k.to_nalgebra())
        .ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
    let z = qr.q() * y;
    let u = Matrix::from_fn(n0, k.cols(), |j, col| pi2[j] * z[(j, col)]);
    finite_u(u)
}

fn check_triangle(r: &DMatrix<f64>) -> Result<()> {
    let diag: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if min.is_nan() || min <= max * 1e-15 {
        return Err(Error::Singular { condition: max / min });
    }
    Ok(())
}

fn finite_u(u: Matrix) -> Result<Matrix> {
    if u.is_finite() {
        Ok(u)
    } else {
        Err(Error::NonFinite("u-step"))
    }
}

/// Reweighting weights `1 / max(‖rowᵢ‖, floor)^(1 - p/2)`.
pub fn reweight(row_norms: &[f64], p: f64, floor: f64) -> Vec<f64> {
    let exponent = 1.0 - p / 2.0;
    row_norms.iter().map(|&r| r.max(floor).powf(-exponent)).collect()
}

/// Row norms and the descending-norm order of the real features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRanking {
    /// `‖wᵢ‖₂` for every real feature, indexed by original (0-based) feature.
    pub row_norms: Vec<f64>,
    /// All real features, by descending norm, ties by ascending index.
    pub order: Vec<usize>,
    /// The top-`d` features of `order`.
    pub selected: Vec<usize>,
}

impl FeatureRanking {
    /// Rows whose norm exceeds [`SUPPORT_THRESHOLD`] times the largest norm.
    pub fn support_size(&self) -> usize {
        support_size(&self.row_norms)
    }
}

pub fn support_size(norms: &[f64]) -> usize {
    let max = norms.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    norms.iter().filter(|&&r| r > SUPPORT_THRESHOLD * max).count()
}

/// Sorts the first `feature_count` rows of `w` by norm and keeps the top `d`.
///
/// Rows past `feature_count` (the bias) are ignored. Features listed in
/// `excluded` (zero-variance columns) are moved to the end of the order and
/// are never selected.
pub fn rank_features(w: &Matrix, feature_count: usize, d: usize, excluded: &[usize]) -> Result<FeatureRanking> {
    if d == 0 || d > feature_count {
        return Err(Error::FeatureCount {
            d,
            available: feature_count,
        });
    }
    if w.rows() < feature_count {
        return Err(Error::DimensionMismatch {
            op: "rank_features",
            expected: (feature_count, w.cols()),
            got: w.shape(),
        });
    }
    let row_norms: Vec<f64> = w.row_block(0, feature_count).row_norms();
    let mut is_excluded = vec![false; feature_count];
    excluded
        .iter()
        .filter(|&&j| j < feature_count)
        .for_each(|&j| is_excluded[j] = true);

    let mut order: Vec<usize> = (0..feature_count).collect();
    order.sort_by(|&a, &b| {
        is_excluded[a]
            .cmp(&is_excluded[b])
            .then(row_norms[b].total_cmp(&row_norms[a]))
            .then(a.cmp(&b))
    });
    let selected = order.iter().copied().filter(|&j| !is_excluded[j]).take(d).collect();
    Ok(FeatureRanking {
        row_norms,
        order,
        selected,
    })
}

/// Snapshot handed to an observer after every completed iteration.
pub struct IterationRecord<'a> {
    pub iteration: usize,
    pub u: &'a Matrix,
    pub e: &'a Matrix,
    pub w: &'a Matrix,
    pub candidate_objective: f64,
    pub objective: f64,
    pub scratch: &'a IterationScratch,
}

/// Runs the reweighting loop on a prebuilt solution space.
///
/// `observer` sees every iteration. The returned state is the last one when
/// the run converged, otherwise the iterate with the lowest objective.
pub fn solve_in_space(
    space: &SolutionSpace,
    y: &LabelMatrix,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&IterationRecord<'_>),
) -> Result<SolverState> {
    check_power(config.p)?;
    let p = config.p;
    let (m, c) = y.values.shape();
    let n = space.weight_rows();

    let mut e = Matrix::zeros(m, c);
    let mut sigma = vec![1.0; n];
    let mut scratch = IterationScratch::default();
    let mut objective_trace = Vec::new();
    let mut candidate_trace = Vec::new();
    let mut nnls_exhausted = 0;
    let mut best: Option<(f64, Matrix, Matrix, Matrix, Vec<f64>)> = None;
    let mut converged = false;
    let mut current = None;

    for iteration in 1..=config.max_outer_iterations {
        scratch.set_weights(space, &sigma);
        scratch.k_mat = space.constant_part(&e);
        scratch.g = space.assemble(&scratch.k_mat, &Matrix::zeros(space.n0, c));

        let u = u_step(space, &mut scratch)?;
        scratch.v = scratch.k_mat.sub(&space.m_mat.matmul(&u));
        let candidate = space.assemble(&scratch.v, &u);
        let candidate_objective = l2p_norm_from_row_norms(&candidate.row_norms(), p);

        scratch.lambda_diag = reweight(&scratch.v.row_norms(), p, config.weight_floor);
        scratch.h = space.n_mat.sub(&space.m_mat.matmul(&u));
        let outcome = solve_e_step(&scratch.lambda_diag, &space.l_mat, &scratch.h, y, Some(&e))?;
        nnls_exhausted += outcome.exhausted_columns.len();
        e = outcome.e;

        let pivot = space.l_mat.matmul(&e).add(&scratch.h);
        let w = space.assemble(&pivot, &u);
        let norms = w.row_norms();
        let objective = l2p_norm_from_row_norms(&norms, p);
        if !objective.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        let previous = objective_trace.last().copied();
        objective_trace.push(objective);
        candidate_trace.push(candidate_objective);

        observer(&IterationRecord {
            iteration,
            u: &u,
            e: &e,
            w: &w,
            candidate_objective,
            objective,
            scratch: &scratch,
        });

        sigma = reweight(&norms, p, config.weight_floor);
        if best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, u.clone(), e.clone(), w.clone(), sigma.clone()));
        }
        current = Some((u, w));

        if let Some(prev) = previous {
            if (prev - objective).abs() <= config.relative_objective_tolerance * prev.abs() {
                converged = true;
                break;
            }
        }
    }

    let iteration = objective_trace.len();
    let (u, e, w, sigma_diag) = if converged {
        let (u, w) = current.expect("at least one iteration");
        (u, e, w, sigma)
    } else {
        let (_, u, e, w, s) = best.expect("at least one iteration");
        (u, e, w, s)
    };
    Ok(SolverState {
        u,
        e,
        w,
        sigma_diag,
        objective_trace,
        candidate_trace,
        iteration,
        converged,
        nnls_exhausted,
    })
}

/// Design matrix with bias, label matrix and solution space for a dataset.
pub fn prepare(dataset: &Dataset) -> Result<(Matrix, LabelMatrix, SolutionSpace)> {
    dataset.validate()?;
    let x = absorb_bias(&dataset.features);
    let y = build_label_matrix(&dataset.labels, dataset.class_count)?;
    let space = build_solution_space(&x, &y)?;
    Ok((x, y, space))
}

/// Full selection run: builds the problem, iterates to convergence and ranks
/// the features.
pub fn run(dataset: &Dataset, config: &SolverConfig) -> Result<(SolverState, FeatureRanking)> {
    run_observed(dataset, config, &mut |_| {})
}

pub fn run_observed(
    dataset: &Dataset,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&IterationRecord<'_>),
) -> Result<(SolverState, FeatureRanking)> {
    let n = dataset.feature_count();
    config.validate(n)?;
    let (_, y, space) = prepare(dataset)?;
    let state = solve_in_space(&space, &y, config, observer)?;
    let ranking = rank_features(&state.w, n, config.feature_count_d, &dataset.constant_features())?;
    Ok((state, ranking))
}

/// One record of a p-sweep.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub p: f64,
    pub state: SolverState,
    pub ranking: FeatureRanking,
}

/// Runs the solver once per `p` on identical data. Runs execute on separate
/// threads; results come back in grid order.
pub fn sweep_p(dataset: &Dataset, p_grid: &[f64], config: &SolverConfig) -> Result<Vec<SweepResult>> {
    for &p in p_grid {
        check_power(p).map_err(|e| Error::SweepFailed { p, source: Box::new(e) })?;
    }
    let outcomes: Vec<Result<(SolverState, FeatureRanking)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = p_grid
            .iter()
            .map(|&p| {
                let cfg = SolverConfig { p, ..config.clone() };
                scope.spawn(move || run(dataset, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    p_grid
        .iter()
        .zip(outcomes)
        .map(|(&p, r)| {
            r.map(|(state, ranking)| SweepResult { p, state, ranking })
                .map_err(|e| Error::SweepFailed { p, source: Box::new(e) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::l2p_norm;

    #[test]
    fn ranking_examples() {
        let w = Matrix::from_rows(&[[0.0, 0.0], [3.0, 0.0], [0.0, 1.0], [9.0, 9.0]]);
        let r = rank_features(&w, 3, 2, &[]).unwrap();
        assert_eq!(r.row_norms, vec![0.0, 3.0, 1.0]);
        assert_eq!(r.order, vec![1, 2, 0]);
        assert_eq!(r.selected, vec![1, 2]);

        let r = rank_features(&Matrix::zeros(5, 2), 4, 2, &[]).unwrap();
        assert_eq!(r.order, vec![0, 1, 2, 3]);
        assert_eq!(r.row_norms, vec![0.0; 4]);
    }

    #[test]
    fn ranking_rejects_bad_d() {
        let w = Matrix::zeros(3, 2);
        assert!(matches!(rank_features(&w, 3, 0, &[]), Err(Error::FeatureCount { .. })));
        assert!(matches!(rank_features(&w, 3, 4, &[]), Err(Error::FeatureCount { .. })));
    }

    #[test]
    fn excluded_features_go_last() {
        let w = Matrix::from_rows(&[[5.0], [1.0], [2.0]]);
        let r = rank_features(&w, 3, 2, &[0]).unwrap();
        assert_eq!(r.order, vec![2, 1, 0]);
        assert_eq!(r.selected, vec![2, 1]);
    }

    #[test]
    fn u_step_zero_g_gives_zero() {
        let x = Matrix::from_rows(&[[1.0, 0.0, 2.0, 1.0], [0.0, 1.0, 3.0, -1.0]]);
        let y = build_label_matrix(&[1, 2], 2).unwrap();
        let space = build_solution_space(&x, &y).unwrap();
        let mut scratch = IterationScratch::default();
        scratch.set_weights(&space, &[1.0, 2.0, 0.5, 3.0]);
        scratch.k_mat = Matrix::zeros(2, 2);
        for route in [
            UStepRoute::Normal,
            UStepRoute::PushThroughInverse,
            UStepRoute::PushThroughSolve,
            UStepRoute::NormalQr,
            UStepRoute::PushThroughQr,
        ] {
            let u = u_step_with_route(&space, &mut scratch, route).unwrap();
            assert_eq!(u.shape(), (2, 2));
            assert!(u.max_abs() == 0.0);
        }
    }

    #[test]
    fn u_step_matches_dense_normal_equations() {
        // m0 = 2, n0 = 1, Σ = I: minimize ‖P·U + G‖_F² directly.
        let x = Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.0, 1.0, 3.0]]);
        let y = build_label_matrix(&[1, 2], 2).unwrap();
        let space = build_solution_space(&x, &y).unwrap();
        let mut scratch = IterationScratch::default();
        scratch.set_weights(&space, &[1.0; 3]);
        scratch.k_mat = Matrix::from_rows(&[[0.7, -1.2], [0.3, 2.0]]);
        let g = space.assemble(&scratch.k_mat, &Matrix::zeros(1, 2));
        // Oracle: U = -(PᵀP)⁻¹ Pᵀ G, PᵀP is the scalar 4 + 9 + 1.
        let p = &space.p_mat;
        let ptp: f64 = p.column(0).iter().map(|v| v * v).sum();
        let oracle = p.transpose().matmul(&g).scale(-1.0 / ptp);
        let u = u_step(&space, &mut scratch).unwrap();
        assert!(u.sub(&oracle).max_abs() < 1e-10);
        for route in [
            UStepRoute::Normal,
            UStepRoute::PushThroughSolve,
            UStepRoute::PushThroughQr,
        ] {
            let u = u_step_with_route(&space, &mut scratch, route).unwrap();
            assert!(u.sub(&oracle).max_abs() < 1e-10, "{route:?}");
        }
    }

    #[test]
    fn degenerate_space_runs() {
        // square full-rank design with bias: m = n + 1
        let features = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, 3.0]]);
        let ds = Dataset::new(features, vec![1, 2, 2], 2).unwrap();
        let cfg = SolverConfig {
            feature_count_d: 1,
            ..Default::default()
        };
        let (_, _, space) = prepare(&ds).unwrap();
        assert_eq!(space.n0, 0);
        let (state, ranking) = run(&ds, &cfg).unwrap();
        assert!(!state.objective_trace.is_empty());
        for pair in state.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-9) + 1e-9);
        }
        assert_eq!(state.u.shape(), (0, 2));
        assert_eq!(ranking.selected.len(), 1);
        let e_zero = space.compose(&state.u, &state.e);
        assert!(e_zero.sub(&state.w).max_abs() < 1e-10);
    }

    #[test]
    fn reweight_floor() {
        let w = reweight(&[0.0, 1.0, 4.0], 1.0, 1e-8);
        assert!((w[0] - 1e4).abs() < 1e-6);
        assert_eq!(w[1], 1.0);
        assert!((w[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn objective_trace_matches_composed_w() {
        let features = Matrix::from_fn(6, 9, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * j as f64);
        let ds = Dataset::new(features, vec![1, 2, 1, 2, 1, 2], 2).unwrap();
        let cfg = SolverConfig {
            p: 0.5,
            feature_count_d: 3,
            ..Default::default()
        };
        let (state, _) = run(&ds, &cfg).unwrap();
        let obj = l2p_norm(&state.w, 0.5).unwrap();
        assert!((obj - state.objective()).abs() <= 1e-12 * obj);
    }
}
