//! Synthetic planted-support data, a ridge one-vs-rest proxy classifier,
//! cross-validation over `p` and recovery metrics.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{split, SplitSpec};
use crate::matrix::{solve_linear, Matrix};
use crate::problem::{fit_normalization, Dataset};
use crate::solver::{run, support_size, FeatureRanking, SolverConfig};

/// Gaussian classes whose means differ only on the informative features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    /// 0-based informative feature indices.
    pub informative: Vec<usize>,
    pub class_separation: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl PlantedSpec {
    /// `k` informative features drawn uniformly without replacement from the
    /// seed, returned in ascending order.
    pub fn with_random_support(
        samples: usize,
        features: usize,
        classes: usize,
        k: usize,
        class_separation: f64,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self> {
        if k > features {
            return Err(Error::InvalidConfig(format!(
                "{k} informative features out of {features}"
            )));
        }
        // A stream separate from the sample noise so the support does not
        // shift the data draws.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut informative = index::sample(&mut rng, features, k).into_vec();
        informative.sort_unstable();
        Ok(PlantedSpec {
            samples,
            features,
            classes,
            informative,
            class_separation,
            noise_std,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.informative.is_empty() {
            return bad("need at least one informative feature".into());
        }
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.samples < self.classes {
            return bad(format!(
                "{} samples cannot cover {} classes",
                self.samples, self.classes
            ));
        }
        if self.features == 0 {
            return bad("need at least one feature".into());
        }
        if !(self.class_separation.is_finite() && self.class_separation > 0.0) {
            return bad(format!("class separation {} must be positive", self.class_separation));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise std {} must be nonnegative", self.noise_std));
        }
        let mut seen = vec![false; self.features];
        for &j in &self.informative {
            if j >= self.features || seen[j] {
                return bad(format!("informative feature {j} is out of range or repeated"));
            }
            seen[j] = true;
        }
        Ok(())
    }
}

/// Sample `i` belongs to class `i mod c + 1`. Informative feature number `t`
/// (in the order listed) belongs to class `t mod c + 1`: its mean is
/// `+separation/2` for that class and `-separation/2` for every other class.
/// All features get `N(0, noise_std²)` noise.
pub fn generate_planted(spec: &PlantedSpec) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    let (m, n, c) = (spec.samples, spec.features, spec.classes);
    let mut owner = vec![None; n];
    for (t, &j) in spec.informative.iter().enumerate() {
        owner[j] = Some(t % c);
    }
    let half = spec.class_separation / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<usize> = (0..m).map(|i| i % c + 1).collect();
    let mut data = Vec::with_capacity(m * n);
    for &label in &labels {
        for slot in &owner {
            let mean = match slot {
                Some(k) if *k == label - 1 => half,
                Some(_) => -half,
                None => 0.0,
            };
            let z: f64 = rng.sample(StandardNormal);
            data.push(mean + spec.noise_std * z);
        }
    }
    let ds = Dataset::new(Matrix::from_vec(m, n, data)?, labels, c)?;
    let mut truth = spec.informative.clone();
    truth.sort_unstable();
    Ok((ds, truth))
}

/// One-vs-rest ridge regression on a feature subset plus a bias, all
/// coefficients penalized.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeModel {
    /// 0-based columns of the training features the model reads.
    pub selected: Vec<usize>,
    /// `(|selected| + 1) × c`, bias last.
    pub weights: Matrix,
}

pub fn fit_ridge(train: &Dataset, selected: &[usize], ridge: f64) -> Result<RidgeModel> {
    if selected.is_empty() {
        return Err(Error::InvalidConfig("classifier needs at least one feature".into()));
    }
    if !(ridge.is_finite() && ridge > 0.0) {
        return Err(Error::InvalidConfig(format!("ridge {ridge} must be positive")));
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= train.feature_count()) {
        return Err(Error::FeatureCount {
            d: j + 1,
            available: train.feature_count(),
        });
    }
    let a = design(&train.features, selected);
    let y = crate::problem::build_label_matrix(&train.labels, train.class_count)?.values;
    let mut gram = a.transpose().matmul(&a);
    for i in 0..gram.rows() {
        gram[(i, i)] += ridge;
    }
    let weights = solve_linear(&gram, &a.transpose().matmul(&y))?;
    Ok(RidgeModel {
        selected: selected.to_vec(),
        weights,
    })
}

fn design(features: &Matrix, selected: &[usize]) -> Matrix {
    let cols = features.select_cols(selected);
    crate::problem::absorb_bias(&cols)
}

impl RidgeModel {
    /// Class of the largest score; scores within `1e-12·(1 + max|score|)` of
    /// the best count as ties and go to the lowest class id.
    pub fn predict(&self, features: &Matrix) -> Vec<usize> {
        let scores = design(features, &self.selected).matmul(&self.weights);
        (0..scores.rows())
            .map(|i| {
                let row = scores.row(i);
                let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let scale = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                let tol = 1e-12 * (1.0 + scale);
                row.iter().position(|&s| s >= best - tol).unwrap_or(0) + 1
            })
            .collect()
    }

    /// Fraction of correctly predicted samples.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let predicted = self.predict(&data.features);
        let hits = predicted.iter().zip(&data.labels).filter(|(a, b)| a == b).count();
        hits as f64 / data.samples().max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub precision_at_d: f64,
    pub support_size: usize,
}

/// `|top-d ∩ truth| / d` over the ranking order, and the count of rows above
/// the support threshold.
pub fn recovery_metrics(ranking: &FeatureRanking, truth: &[usize], d: usize) -> Result<RecoveryMetrics> {
    if d == 0 || d > ranking.order.len() {
        return Err(Error::FeatureCount {
            d,
            available: ranking.order.len(),
        });
    }
    let hits = ranking.order[..d].iter().filter(|j| truth.contains(j)).count();
    Ok(RecoveryMetrics {
        precision_at_d: hits as f64 / d as f64,
        support_size: support_size(&ranking.row_norms),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub seed: u64,
    pub ridge: f64,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            folds: 3,
            seed: 0,
            ridge: 1.0,
        }
    }
}

/// The `p` values tried by cross-validation unless told otherwise.
pub const DEFAULT_P_GRID: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub p_grid: Vec<f64>,
    pub mean_accuracy: Vec<f64>,
    pub best_p: f64,
}

/// Fold id of every sample: each class is shuffled and dealt round-robin.
pub fn stratified_folds(dataset: &Dataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    let mut members = vec![Vec::new(); dataset.class_count];
    for (i, &y) in dataset.labels.iter().enumerate() {
        members[y - 1].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; dataset.samples()];
    for (k, mut idx) in members.into_iter().enumerate() {
        if idx.len() < folds {
            return Err(Error::Stratification {
                class: k + 1,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        for (r, i) in idx.into_iter().enumerate() {
            fold_of[i] = r % folds;
        }
    }
    Ok(fold_of)
}

/// Mean validation accuracy of the solver-plus-classifier pipeline for each
/// `p`, using only `train`. Each fold is standardized with its own training
/// statistics. The best `p` wins; ties go to the larger `p`.
pub fn cross_validate_p(train: &Dataset, p_grid: &[f64], cv: &CvSpec, config: &SolverConfig) -> Result<CvOutcome> {
    if p_grid.is_empty() {
        return Err(Error::InvalidConfig("empty p grid".into()));
    }
    let fold_of = stratified_folds(train, cv.folds, cv.seed)?;
    let mut mean_accuracy = vec![0.0; p_grid.len()];
    for fold in 0..cv.folds {
        let fit_idx: Vec<usize> = (0..train.samples()).filter(|&i| fold_of[i] != fold).collect();
        let val_idx: Vec<usize> = (0..train.samples()).filter(|&i| fold_of[i] == fold).collect();
        let mut fit = train.subset(&fit_idx);
        let mut val = train.subset(&val_idx);
        let stats = fit_normalization(&fit.features);
        fit.features = stats.apply(&fit.features)?;
        val.features = stats.apply(&val.features)?;
        fit.normalization = Some(stats);
        for (slot, &p) in mean_accuracy.iter_mut().zip(p_grid) {
            let cfg = SolverConfig { p, ..config.clone() };
            let (_, ranking) = run(&fit, &cfg)?;
            let model = fit_ridge(&fit, &ranking.selected, cv.ridge)?;
            *slot += model.accuracy(&val) / cv.folds as f64;
        }
    }
    let mut best = 0;
    for (i, &acc) in mean_accuracy.iter().enumerate() {
        let b = mean_accuracy[best];
        if acc > b + 1e-12 || ((acc - b).abs() <= 1e-12 && p_grid[i] > p_grid[best]) {
            best = i;
        }
    }
    Ok(CvOutcome {
        p_grid: p_grid.to_vec(),
        mean_accuracy,
        best_p: p_grid[best],
    })
}

/// How `p` is chosen in each evaluation trial.
#[derive(Clone, Debug, PartialEq)]
pub enum PChoice {
    Fixed(f64),
    CrossValidated { grid: Vec<f64>, folds: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSpec {
    pub choice: PChoice,
    pub train_fraction: f64,
    pub trials: usize,
    /// Trial `t` uses `seed + t` for its split and cross-validation.
    pub seed: u64,
    pub ridge: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub p: f64,
    /// 1-based selected features.
    pub selected: Vec<usize>,
    pub accuracy: f64,
    pub support_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_at_d: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub trials: Vec<TrialOutcome>,
    pub mean_accuracy: f64,
    /// Sample standard deviation over trials; zero for a single trial.
    pub std_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_precision_at_d: Option<f64>,
}

/// Repeated seeded splits: select features on the training part, fit the
/// ridge classifier on them and score the test part. With `truth` (0-based
/// feature indices) each trial also reports precision at `d`.
pub fn evaluate_trials(
    dataset: &Dataset,
    spec: &EvalSpec,
    config: &SolverConfig,
    truth: Option<&[usize]>,
) -> Result<EvalReport> {
    if spec.trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let mut outcomes = Vec::with_capacity(spec.trials);
    for t in 0..spec.trials as u64 {
        let seed = spec.seed.wrapping_add(t);
        let split_spec = SplitSpec {
            train_fraction: spec.train_fraction,
            seed,
            stratified: true,
        };
        let (train, test) = split(dataset, &split_spec)?;
        let p = match &spec.choice {
            PChoice::Fixed(p) => *p,
            PChoice::CrossValidated { grid, folds } => {
                let cv = CvSpec {
                    folds: *folds,
                    seed,
                    ridge: spec.ridge,
                };
                cross_validate_p(&train, grid, &cv, config)?.best_p
            }
        };
        let cfg = SolverConfig { p, ..config.clone() };
        let (state, ranking) = run(&train, &cfg)?;
        let model = fit_ridge(&train, &ranking.selected, spec.ridge)?;
        let precision_at_d = match truth {
            Some(truth) => Some(recovery_metrics(&ranking, truth, cfg.feature_count_d)?.precision_at_d),
            None => None,
        };
        outcomes.push(TrialOutcome {
            seed,
            p,
            selected: ranking.selected.iter().map(|j| j + 1).collect(),
            accuracy: model.accuracy(&test),
            support_size: ranking.support_size(),
            precision_at_d,
            converged: state.converged,
        });
    }
    let (mean, std) = mean_std(&outcomes.iter().map(|o| o.accuracy).collect::<Vec<_>>());
    let mean_precision_at_d =
        truth.map(|_| outcomes.iter().filter_map(|o| o.precision_at_d).sum::<f64>() / outcomes.len() as f64);
    Ok(EvalReport {
        trials: outcomes,
        mean_accuracy: mean,
        std_accuracy: std,
        mean_precision_at_d,
    })
}

/// Mean and sample standard deviation (zero below two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::rank_features;

    fn spec(k: usize, sep: f64, noise: f64) -> PlantedSpec {
        PlantedSpec {
            samples: 8,
            features: 4,
            classes: 2,
            informative: (0..k).collect(),
            class_separation: sep,
            noise_std: noise,
            seed: 3,
        }
    }

    #[test]
    fn noiseless_planted_columns() {
        let (ds, truth) = generate_planted(&spec(1, 2.0, 0.0)).unwrap();
        assert_eq!(truth, vec![0]);
        assert!(generate_planted(&spec(0, 2.0, 0.0)).is_err());
        for i in 0..ds.samples() {
            let want = if ds.labels[i] == 1 { 1.0 } else { -1.0 };
            assert_eq!(ds.features[(i, 0)], want);
            assert!(ds.features.row(i)[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn planted_is_deterministic() {
        let s = PlantedSpec::with_random_support(20, 30, 3, 4, 3.0, 1.0, 11).unwrap();
        assert_eq!(s, PlantedSpec::with_random_support(20, 30, 3, 4, 3.0, 1.0, 11).unwrap());
        assert_eq!(generate_planted(&s).unwrap(), generate_planted(&s).unwrap());
        assert_eq!(s.informative.len(), 4);
    }

    #[test]
    fn planted_rejects_bad_specs() {
        let mut s = spec(1, 2.0, 0.0);
        s.class_separation = 0.0;
        assert!(generate_planted(&s).is_err());
        let mut s = spec(1, 2.0, 0.0);
        s.informative = vec![1, 1];
        assert!(generate_planted(&s).is_err());
        assert!(PlantedSpec::with_random_support(5, 3, 2, 4, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn separable_toy_is_fit() {
        let features = Matrix::from_rows(&[[1.0, 0.3], [2.0, -0.1], [-1.0, 0.2], [-2.0, 0.0]]);
        let ds = Dataset::new(features, vec![1, 1, 2, 2], 2).unwrap();
        let model = fit_ridge(&ds, &[0], 1e-3).unwrap();
        assert_eq!(model.accuracy(&ds), 1.0);
    }

    #[test]
    fn huge_ridge_collapses_to_lowest_class() {
        let features = Matrix::from_rows(&[[1.0], [2.0], [-1.0], [-2.0], [0.5]]);
        let ds = Dataset::new(features, vec![2, 2, 1, 3, 3], 3).unwrap();
        let model = fit_ridge(&ds, &[0], 1e300).unwrap();
        assert!(model.weights.max_abs() < 1e-290);
        assert_eq!(model.predict(&ds.features), vec![1; 5]);
    }

    #[test]
    fn classifier_rejects_bad_input() {
        let ds = Dataset::new(Matrix::from_rows(&[[1.0], [2.0]]), vec![1, 2], 2).unwrap();
        assert!(fit_ridge(&ds, &[], 1.0).is_err());
        assert!(fit_ridge(&ds, &[0], 0.0).is_err());
        assert!(fit_ridge(&ds, &[1], 1.0).is_err());
    }

    fn ranking_of(norms: &[f64], d: usize) -> FeatureRanking {
        let w = Matrix::from_fn(norms.len(), 1, |i, _| norms[i]);
        rank_features(&w, norms.len(), d, &[]).unwrap()
    }

    #[test]
    fn precision_extremes() {
        let r = ranking_of(&[5.0, 4.0, 0.0, 0.0], 2);
        let hit = recovery_metrics(&r, &[0, 1], 2).unwrap();
        assert_eq!(hit.precision_at_d, 1.0);
        assert_eq!(hit.support_size, 2);
        assert_eq!(recovery_metrics(&r, &[2, 3], 2).unwrap().precision_at_d, 0.0);
        assert!(recovery_metrics(&r, &[0], 0).is_err());
    }

    #[test]
    fn random_ranking_matches_hypergeometric_mean() {
        // n = 100, |truth| = 5, d = 5: mean 0.05, variance of the hit count
        // K·(k/n)·((n-k)/n)·((n-K)/(n-1)).
        let (n, k, d, trials) = (100usize, 5usize, 5usize, 4000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let truth: Vec<usize> = (0..k).collect();
        let mut total = 0.0;
        for _ in 0..trials {
            let norms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            total += recovery_metrics(&ranking_of(&norms, d), &truth, d)
                .unwrap()
                .precision_at_d;
        }
        let mean = total / trials as f64;
        let (nf, kf, df) = (n as f64, k as f64, d as f64);
        let var_hits = df * (kf / nf) * ((nf - kf) / nf) * ((nf - df) / (nf - 1.0));
        let se = (var_hits / (df * df) / trials as f64).sqrt();
        assert!((mean - 0.05).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn folds_are_stratified() {
        let ds = Dataset::new(Matrix::zeros(9, 1), vec![1, 1, 1, 2, 2, 2, 2, 2, 2], 2).unwrap();
        let f = stratified_folds(&ds, 3, 1).unwrap();
        for fold in 0..3 {
            let ones = (0..3).filter(|&i| f[i] == fold).count();
            let twos = (3..9).filter(|&i| f[i] == fold).count();
            assert_eq!((ones, twos), (1, 2));
        }
        assert!(matches!(
            stratified_folds(&ds, 4, 1),
            Err(Error::Stratification { class: 1, .. })
        ));
        assert!(stratified_folds(&ds, 1, 1).is_err());
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
