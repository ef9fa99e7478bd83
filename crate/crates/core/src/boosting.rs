//! Least-squares gradient boosting over learned landmark kernels.
//!
//! The ensemble is `H(x) = h0 + Σ_t v α_t h_t(x)` where `h0` is the mean
//! training label and each `h_t` is a [`BaseLearner`] fitted to the residuals
//! `y − H_{t−1}`. Round `t` (1-based) draws its features from
//! `derive_seed(seed, t)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::base_learner::{worst_fit_index, BaseLearner, LandmarkDescentConfig, LandmarkObjective, Projections};
use crate::data::Dataset;
use crate::error::{check_dim, invalid, Error, Result};
use crate::rff::{weighted_cos, RffSet};
use crate::seed;

/// How each round picks its landmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkMode {
    /// Start at the worst-fit training point and run gradient descent.
    #[default]
    Learned,
    /// A uniformly random training point, no descent.
    Random,
}

/// Stop once `patience` consecutive rounds each improve the training MSE by
/// less than `min_rel_improvement` (relative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_rel_improvement: f64,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        Self {
            patience: 10,
            min_rel_improvement: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrffConfig {
    pub t_rounds: usize,
    pub k_features: usize,
    /// Shrinkage in `(0, 1]`.
    pub v: f64,
    /// Posterior temperature, `c ≥ 0`.
    pub c: f64,
    pub descent: LandmarkDescentConfig,
    pub landmark_mode: LandmarkMode,
    pub seed: u64,
    /// Frequencies are drawn from `N(0, I / bandwidth²)`.
    pub bandwidth: f64,
    pub early_stopping: Option<EarlyStopping>,
}

impl Default for GbrffConfig {
    fn default() -> Self {
        Self {
            t_rounds: 200,
            k_features: 100,
            v: 1.0,
            c: 0.0,
            descent: LandmarkDescentConfig::default(),
            landmark_mode: LandmarkMode::Learned,
            seed: 0,
            bandwidth: 1.0,
            early_stopping: None,
        }
    }
}

impl GbrffConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_rounds == 0 {
            return Err(invalid("t_rounds must be at least 1"));
        }
        if self.k_features == 0 {
            return Err(invalid("k_features must be at least 1"));
        }
        if !(self.v > 0.0 && self.v <= 1.0) {
            return Err(invalid(format!("learning rate v must lie in (0, 1], got {}", self.v)));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("c must be finite and non-negative, got {}", self.c)));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        self.descent.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub alpha: f64,
    pub learner: BaseLearner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub h0: f64,
    pub v: f64,
    pub rounds: Vec<Round>,
}

impl Ensemble {
    /// Input dimension, or `None` for a constant model.
    pub fn dim(&self) -> Option<usize> {
        self.rounds.first().map(|r| r.learner.dim())
    }

    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            check_dim("input point", d, x.len())?;
        }
        Ok(self.raw_unchecked(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_raw(x).map(sign)
    }

    /// Raw scores for every row of `ds`.
    pub fn predict_raw_batch(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if let Some(d) = self.dim() {
            check_dim("dataset dimension", d, ds.dim())?;
        }
        Ok(ds.rows().map(|x| self.raw_unchecked(x)).collect())
    }

    /// Fraction of rows of `ds` whose label matches the predicted sign.
    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        let raw = self.predict_raw_batch(ds)?;
        Ok(accuracy(&raw, ds.y()))
    }

    fn raw_unchecked(&self, x: &[f64]) -> f64 {
        self.h0
            + self
                .rounds
                .iter()
                .map(|r| {
                    self.v * r.alpha * weighted_cos(r.learner.rff(), r.learner.q().as_slice(), r.learner.landmark(), x)
                })
                .sum::<f64>()
    }
}

/// `sign` with `sign(0) = +1`.
pub fn sign(raw: f64) -> f64 {
    if raw >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Share of `raw` scores whose sign agrees with `labels`.
pub fn accuracy(raw: &[f64], labels: &[f64]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = raw.iter().zip(labels).filter(|(r, y)| sign(**r) == **y).count();
    hits as f64 / labels.len() as f64
}

pub fn init_h0(labels: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(invalid("cannot initialize from an empty label vector"));
    }
    Ok(labels.iter().sum::<f64>() / labels.len() as f64)
}

pub fn residuals(labels: &[f64], raw_predictions: &[f64]) -> Result<Vec<f64>> {
    if labels.len() != raw_predictions.len() {
        return Err(invalid(format!(
            "{} labels but {} predictions",
            labels.len(),
            raw_predictions.len()
        )));
    }
    Ok(labels.iter().zip(raw_predictions).map(|(y, h)| y - h).collect())
}

/// `α = Σ ỹ_i h_i / Σ h_i²`, the minimizer of `Σ (ỹ_i − α h_i)²`.
pub fn optimal_step(residuals: &[f64], base_outputs: &[f64]) -> Result<f64> {
    if residuals.len() != base_outputs.len() {
        return Err(invalid(format!(
            "{} residuals but {} base outputs",
            residuals.len(),
            base_outputs.len()
        )));
    }
    let hh: f64 = base_outputs.iter().map(|h| h * h).sum();
    if hh == 0.0 {
        return Err(Error::DegenerateLearner);
    }
    let rh: f64 = residuals.iter().zip(base_outputs).map(|(r, h)| r * h).sum();
    Ok(rh / hh)
}

/// Training trace returned by [`fit_with_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub ensemble: Ensemble,
    /// Training MSE of the raw scores; entry 0 is the constant model,
    /// entry `i` follows the `i`-th executed round.
    pub train_mse: Vec<f64>,
    /// 1-based indices of rounds dropped because every base output was zero.
    pub skipped_rounds: Vec<usize>,
    /// Number of rounds run before early stopping fired.
    pub stopped_after: Option<usize>,
}

/// Features of round `t` (1-based): `K` frequencies from `derive_seed(seed, t)`.
pub fn round_rff(k_features: usize, dim: usize, seed: u64, t: usize, bandwidth: f64) -> Result<RffSet> {
    let rff = RffSet::sample(k_features, dim, seed::derive_seed(seed, t as u64))?;
    if bandwidth == 1.0 {
        Ok(rff)
    } else {
        rff.with_bandwidth(bandwidth)
    }
}

/// Per-round features and training-set projections for one training set.
/// Fits that differ only in `c`, `v`, `t_rounds` (up to [`RoundFeatures::len`])
/// or landmark mode draw identical features and can share this cache.
#[derive(Debug, Clone)]
pub struct RoundFeatures {
    seed: u64,
    k_features: usize,
    bandwidth: f64,
    n: usize,
    rounds: Vec<(RffSet, Projections)>,
}

impl RoundFeatures {
    pub fn new(train: &Dataset, t_rounds: usize, k_features: usize, seed: u64, bandwidth: f64) -> Result<Self> {
        let rounds = (1..=t_rounds)
            .map(|t| {
                let rff = round_rff(k_features, train.dim(), seed, t, bandwidth)?;
                let proj = Projections::new(&rff, train.x().view())?;
                Ok((rff, proj))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            seed,
            k_features,
            bandwidth,
            n: train.n(),
            rounds,
        })
    }

    /// Cache sized for `cfg` on `train`.
    pub fn for_config(train: &Dataset, cfg: &GbrffConfig) -> Result<Self> {
        Self::new(train, cfg.t_rounds, cfg.k_features, cfg.seed, cfg.bandwidth)
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    fn check(&self, train: &Dataset, cfg: &GbrffConfig) -> Result<()> {
        let matches = self.seed == cfg.seed
            && self.k_features == cfg.k_features
            && self.bandwidth == cfg.bandwidth
            && self.n == train.n()
            && self.rounds.first().is_none_or(|(r, _)| r.dim() == train.dim());
        if !matches {
            return Err(invalid("round features were drawn for a different seed, K, bandwidth or training set"));
        }
        if cfg.t_rounds > self.len() {
            return Err(invalid(format!(
                "{} rounds requested but only {} cached",
                cfg.t_rounds,
                self.len()
            )));
        }
        Ok(())
    }
}

pub fn fit(train: &Dataset, cfg: &GbrffConfig) -> Result<Ensemble> {
    fit_with_report(train, cfg).map(|r| r.ensemble)
}

pub fn fit_with_report(train: &Dataset, cfg: &GbrffConfig) -> Result<FitReport> {
    fit_observed(train, cfg, None, |_, _| {})
}

/// [`fit_with_report`] using cached round features.
pub fn fit_with_features(train: &Dataset, cfg: &GbrffConfig, features: &RoundFeatures) -> Result<FitReport> {
    fit_observed(train, cfg, Some(features), |_, _| {})
}

/// Full training loop. `on_round(t, round)` runs after each round `t`
/// (1-based); `round` is `None` when the round was skipped.
pub fn fit_observed(
    train: &Dataset,
    cfg: &GbrffConfig,
    features: Option<&RoundFeatures>,
    mut on_round: impl FnMut(usize, Option<&Round>),
) -> Result<FitReport> {
    cfg.validate()?;
    if let Some(f) = features {
        f.check(train, cfg)?;
    }
    let y = train.y();
    let n = train.n();
    let h0 = init_h0(y)?;
    let mut raw = vec![h0; n];
    let mut mse = mean_sq_error(y, &raw);
    let mut report = FitReport {
        ensemble: Ensemble {
            h0,
            v: cfg.v,
            rounds: Vec::with_capacity(cfg.t_rounds),
        },
        train_mse: vec![mse],
        skipped_rounds: Vec::new(),
        stopped_after: None,
    };
    let mut stale = 0;

    for t in 1..=cfg.t_rounds {
        if cfg.early_stopping.is_some_and(|es| stale >= es.patience) {
            report.stopped_after = Some(t - 1);
            break;
        }
        let drawn;
        let (rff, proj) = match features {
            Some(f) => (&f.rounds[t - 1].0, &f.rounds[t - 1].1),
            None => {
                let rff = round_rff(cfg.k_features, train.dim(), cfg.seed, t, cfg.bandwidth)?;
                let proj = Projections::new(&rff, train.x().view())?;
                drawn = (rff, proj);
                (&drawn.0, &drawn.1)
            }
        };
        let res = residuals(y, &raw)?;
        let objective = LandmarkObjective::with_projections(rff, &res, proj)?;

        let landmark = match cfg.landmark_mode {
            LandmarkMode::Learned => {
                let start = worst_fit_index(&res).expect("non-empty residuals");
                objective.descend(train.row(start), &cfg.descent)?.landmark
            }
            LandmarkMode::Random => {
                let round_seed = seed::derive_seed(cfg.seed, t as u64);
                let mut rng = seed::rng(seed::derive_seed(round_seed, seed::LANDMARK_STREAM));
                train.row(rng.random_range(0..n)).to_vec()
            }
        };
        let q = objective.posterior(&landmark, cfg.c)?;
        let outputs = objective.base_outputs(&landmark, &q)?;
        let alpha = match optimal_step(&res, &outputs) {
            Ok(a) => a,
            Err(Error::DegenerateLearner) => {
                log::warn!("round {t}: all base outputs are zero, skipping");
                report.skipped_rounds.push(t);
                on_round(t, None);
                continue;
            }
            Err(e) => return Err(e),
        };
        for (r, h) in raw.iter_mut().zip(&outputs) {
            *r += cfg.v * alpha * h;
        }
        report.ensemble.rounds.push(Round {
            alpha,
            learner: BaseLearner::new(landmark, rff.clone(), q)?,
        });
        on_round(t, report.ensemble.rounds.last());

        let next = mean_sq_error(y, &raw);
        if let Some(es) = cfg.early_stopping {
            let rel = if mse > 0.0 { (mse - next) / mse } else { 0.0 };
            stale = if rel < es.min_rel_improvement { stale + 1 } else { 0 };
        }
        mse = next;
        report.train_mse.push(next);
    }
    if !report.skipped_rounds.is_empty() {
        log::info!("{} of {} rounds skipped", report.skipped_rounds.len(), cfg.t_rounds);
    }
    Ok(report)
}

pub fn predict(ens: &Ensemble, x: &[f64]) -> Result<f64> {
    ens.predict(x)
}

pub fn predict_raw(ens: &Ensemble, x: &[f64]) -> Result<f64> {
    ens.predict_raw(x)
}

fn mean_sq_error(y: &[f64], raw: &[f64]) -> f64 {
    y.iter().zip(raw).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rff::SimplexWeights;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = seed::rng(seed);
        let mut x = Array2::zeros((n, d));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                x[[i, j]] = z + 0.8 * label;
            }
            y.push(label);
        }
        Dataset::new("blobs", x, y).unwrap()
    }

    #[test]
    fn h0_examples() {
        assert_eq!(init_h0(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(init_h0(&[1.0, -1.0, -1.0, 1.0]).unwrap(), 0.0);
        assert!(init_h0(&[]).is_err());
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residuals(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(residuals(&[1.0, -1.0], &[1.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(residuals(&[1.0, -1.0], &[0.5, -0.25]).unwrap(), vec![0.5, -0.75]);
        assert!(residuals(&[1.0], &[]).is_err());
    }

    #[test]
    fn step_examples() {
        let r = [0.3, -1.2, 0.7];
        assert_abs_diff_eq!(optimal_step(&r, &r).unwrap(), 1.0, epsilon = 1e-15);
        let h: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        assert_abs_diff_eq!(optimal_step(&r, &h).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(optimal_step(&r, &[0.0; 3]), Err(Error::DegenerateLearner)));
        assert!(optimal_step(&r, &[1.0]).is_err());
    }

    #[test]
    fn empty_ensemble_is_constant() {
        let ens = Ensemble { h0: -0.4, v: 1.0, rounds: vec![] };
        assert_eq!(predict_raw(&ens, &[3.0, 1.0]).unwrap(), -0.4);
        assert_eq!(predict(&ens, &[3.0]).unwrap(), -1.0);
        let zero = Ensemble { h0: 0.0, v: 1.0, rounds: vec![] };
        assert_eq!(predict(&zero, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn single_round_at_landmark() {
        let rff = RffSet::sample(5, 2, 1).unwrap();
        let learner = BaseLearner::new(vec![0.3, -0.2], rff, SimplexWeights::uniform(5)).unwrap();
        let ens = Ensemble {
            h0: 0.25,
            v: 1.0,
            rounds: vec![Round { alpha: 1.0, learner }],
        };
        assert_abs_diff_eq!(ens.predict_raw(&[0.3, -0.2]).unwrap(), 1.25, epsilon = 1e-15);
        assert!(ens.predict_raw(&[0.3]).is_err());
    }

    #[test]
    fn raw_score_is_explicit_sum() {
        let ds = blobs(30, 3, 2);
        let cfg = GbrffConfig { t_rounds: 6, k_features: 7, v: 0.5, c: 4.0, ..Default::default() };
        let ens = fit(&ds, &cfg).unwrap();
        let x = [0.1, -0.7, 1.3];
        let mut expected = ens.h0;
        for r in &ens.rounds {
            let mut h = 0.0;
            for (j, q) in r.learner.q().as_slice().iter().enumerate() {
                let w = r.learner.rff().omega(j);
                let arg: f64 = (0..3).map(|k| w[k] * (r.learner.landmark()[k] - x[k])).sum();
                h += q * arg.cos();
            }
            expected += ens.v * r.alpha * h;
        }
        assert_abs_diff_eq!(ens.predict_raw(&x).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn fit_is_deterministic_and_counts_rounds() {
        let ds = blobs(40, 2, 5);
        let cfg = GbrffConfig { t_rounds: 8, k_features: 10, seed: 9, ..Default::default() };
        let a = fit_with_report(&ds, &cfg).unwrap();
        let b = fit_with_report(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ensemble.rounds.len() + a.skipped_rounds.len(), 8);
        assert_eq!(a.train_mse.len(), a.ensemble.rounds.len() + 1);
    }

    #[test]
    fn zero_patience_keeps_constant_model() {
        let ds = blobs(20, 2, 0);
        let cfg = GbrffConfig {
            t_rounds: 5,
            k_features: 4,
            early_stopping: Some(EarlyStopping { patience: 0, min_rel_improvement: 1e-6 }),
            ..Default::default()
        };
        let rep = fit_with_report(&ds, &cfg).unwrap();
        assert_eq!(rep.stopped_after, Some(0));
        assert!(rep.ensemble.rounds.is_empty());
        let h0 = rep.ensemble.h0;
        for x in ds.rows() {
            assert_eq!(rep.ensemble.predict(x).unwrap(), sign(h0));
        }
    }

    #[test]
    fn cached_features_reproduce_plain_fit() {
        let ds = blobs(30, 3, 8);
        let cfg = GbrffConfig { t_rounds: 6, k_features: 9, v: 0.5, c: 4.0, seed: 11, ..Default::default() };
        let cache = RoundFeatures::new(&ds, 10, 9, 11, 1.0).unwrap();
        assert_eq!(fit_with_features(&ds, &cfg, &cache).unwrap(), fit_with_report(&ds, &cfg).unwrap());
        let other_seed = GbrffConfig { seed: 12, ..cfg };
        assert!(fit_with_features(&ds, &other_seed, &cache).is_err());
        let too_long = GbrffConfig { t_rounds: 11, ..cfg };
        assert!(fit_with_features(&ds, &too_long, &cache).is_err());
    }

    #[test]
    fn shorter_runs_are_prefixes() {
        let ds = blobs(30, 2, 1);
        let long = GbrffConfig { t_rounds: 8, k_features: 6, v: 0.5, c: 2.0, ..Default::default() };
        let short = GbrffConfig { t_rounds: 3, ..long };
        let a = fit(&ds, &long).unwrap();
        let b = fit(&ds, &short).unwrap();
        assert_eq!(&a.rounds[..3], &b.rounds[..]);
        let mut seen = Vec::new();
        fit_observed(&ds, &long, None, |t, r| seen.push((t, r.is_some()))).unwrap();
        assert_eq!(seen, (1..=8).map(|t| (t, true)).collect::<Vec<_>>());
    }

    #[test]
    fn random_mode_uses_training_points() {
        let ds = blobs(25, 3, 4);
        let cfg = GbrffConfig {
            t_rounds: 5,
            k_features: 6,
            landmark_mode: LandmarkMode::Random,
            ..Default::default()
        };
        let ens = fit(&ds, &cfg).unwrap();
        for r in &ens.rounds {
            assert!(ds.rows().any(|x| x == r.learner.landmark()));
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let ds = blobs(60, 2, 3);
        let cfg = GbrffConfig { t_rounds: 30, k_features: 20, v: 0.5, c: 8.0, ..Default::default() };
        let ens = fit(&ds, &cfg).unwrap();
        assert!(ens.accuracy(&ds).unwrap() >= 0.9);
    }

    #[test]
    fn config_validation() {
        assert!(GbrffConfig { v: 0.0, ..Default::default() }.validate().is_err());
        assert!(GbrffConfig { v: 1.5, ..Default::default() }.validate().is_err());
        assert!(GbrffConfig { t_rounds: 0, ..Default::default() }.validate().is_err());
        assert!(GbrffConfig { k_features: 0, ..Default::default() }.validate().is_err());
        assert!(GbrffConfig { c: -1.0, ..Default::default() }.validate().is_err());
        assert!(GbrffConfig::default().validate().is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn training_mse_never_increases(seed in 0u64..1000, v_idx in 0usize..3) {
            let v = [1.0, 0.5, 0.1][v_idx];
            let ds = blobs(24, 2, seed);
            let cfg = GbrffConfig { t_rounds: 10, k_features: 8, v, c: 2.0, seed, ..Default::default() };
            let rep = fit_with_report(&ds, &cfg).unwrap();
            for w in rep.train_mse.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
            }
        }

        #[test]
        fn alpha_minimizes_squared_error(
            r in prop::collection::vec(-2.0f64..2.0, 1..30),
            seed in 0u64..100,
        ) {
            let mut rng = seed::rng(seed);
            let h: Vec<f64> = r.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = optimal_step(&r, &h).unwrap();
            let sse = |alpha: f64| r.iter().zip(&h).map(|(ri, hi)| (ri - alpha * hi).powi(2)).sum::<f64>();
            prop_assert!(sse(a) <= sse(a + 1e-3));
            prop_assert!(sse(a) <= sse(a - 1e-3));
        }
    }
}
