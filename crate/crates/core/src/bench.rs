//! Benchmark harness: cross-validated grid search, repeated train/test
//! evaluation, landmark-budget sweeps and result files.
//!
//! Work is split into independent `(dataset, split, method)` units. Each unit
//! evaluates every budget of its method at once: GBRFF with `T = b` rounds is
//! the first `b` rounds of a longer run with the same seed, and PBRFF with
//! `n_L = b` landmarks uses the first `b` landmarks of a larger bank, so one
//! long fit scores all budgets. Seeds are
//!
//! * split plan: `derive_seed(seed, name_tag(dataset))`
//! * folds of split `s`: `derive_seed_path(seed, [name_tag(dataset), s, FOLD_STREAM])`
//! * unit model seed: `derive_seed_path(seed, [name_tag(dataset), s, method_tag])`,
//!   and fold `f` (0-based) of the inner CV uses `derive_seed(unit_seed, f + 1)`.
//!
//! so the records of a unit do not depend on which other units run or on the
//! worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::s;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_learner::LandmarkDescentConfig;
use crate::boosting::{self, fit_observed, GbrffConfig, LandmarkMode, RoundFeatures};
use crate::data::{self, load_and_binarize, make_folds, make_splits, Dataset, DatasetSpec, Fold, SplitPlan};
use crate::error::{invalid, Error, Result};
use crate::pbrff::{train_linear, LandmarkBank, LinearModel};
use crate::rff::{weighted_cos, Bandwidth};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gbrff,
    GbrffRandom,
    Pbrff,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gbrff, Method::GbrffRandom, Method::Pbrff];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gbrff => "gbrff",
            Method::GbrffRandom => "gbrff_random",
            Method::Pbrff => "pbrff",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Method::Gbrff => 1,
            Method::GbrffRandom => 2,
            Method::Pbrff => 3,
        }
    }

    fn is_boosting(self) -> bool {
        matches!(self, Method::Gbrff | Method::GbrffRandom)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gbrff" => Ok(Method::Gbrff),
            "gbrff_random" => Ok(Method::GbrffRandom),
            "pbrff" => Ok(Method::Pbrff),
            other => Err(invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// Hyperparameter grids. GBRFF iterates `c` in the outer loop and `v` in the
/// inner loop; PBRFF iterates `beta` outer and `c_svm` inner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub c: Vec<f64>,
    pub v: Vec<f64>,
    pub beta: Vec<f64>,
    pub c_svm: Vec<f64>,
}

fn powers(base: f64, lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| base.powi(e)).collect()
}

impl Grids {
    /// `c ∈ {0} ∪ 2^{0..10}`, `v ∈ {1, 0.5, 0.1, 0.05, 0.01}`,
    /// `β, C ∈ 10^{−3..3}`.
    pub fn full() -> Self {
        let mut c = vec![0.0];
        c.extend(powers(2.0, 0, 10));
        Self {
            c,
            v: vec![1.0, 0.5, 0.1, 0.05, 0.01],
            beta: powers(10.0, -3, 3),
            c_svm: powers(10.0, -3, 3),
        }
    }

    /// `c ∈ {0, 32}`, `v ∈ {1, 0.1}`; the PBRFF axes are unchanged.
    pub fn fast() -> Self {
        Self {
            c: vec![0.0, 32.0],
            v: vec![1.0, 0.1],
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.is_empty() || self.v.is_empty() || self.beta.is_empty() || self.c_svm.is_empty() {
            return Err(invalid("every grid axis must be non-empty"));
        }
        Ok(())
    }

    /// Grid points of `method` in iteration order.
    pub fn points(&self, method: Method) -> Vec<HyperParams> {
        if method.is_boosting() {
            self.c
                .iter()
                .flat_map(|&c| self.v.iter().map(move |&v| HyperParams::Gbrff { c, v }))
                .collect()
        } else {
            self.beta
                .iter()
                .flat_map(|&beta| self.c_svm.iter().map(move |&c_svm| HyperParams::Pbrff { beta, c_svm }))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HyperParams {
    Gbrff { c: f64, v: f64 },
    Pbrff { beta: f64, c_svm: f64 },
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperParams::Gbrff { c, v } => write!(f, "c={c};v={v}"),
            HyperParams::Pbrff { beta, c_svm } => write!(f, "beta={beta};C={c_svm}"),
        }
    }
}

/// Model settings that are fixed rather than searched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub k_features: usize,
    pub descent: LandmarkDescentConfig,
    pub bandwidth: Bandwidth,
    pub svm_epochs: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            k_features: 100,
            descent: LandmarkDescentConfig::default(),
            bandwidth: Bandwidth::Dimension,
            svm_epochs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    /// Keep only this many datasets, smallest row count first.
    pub max_datasets: Option<usize>,
    pub methods: Vec<Method>,
    pub grids: Grids,
    /// Boosting rounds evaluated for the GBRFF methods, ascending.
    pub t_rounds: Vec<usize>,
    /// Landmark counts evaluated for PBRFF, ascending.
    pub n_landmarks: Vec<usize>,
    pub settings: ModelSettings,
    pub plan: SplitPlan,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub worker_count: usize,
}

impl ExperimentConfig {
    /// Main benchmark: GBRFF and PBRFF, full grids, `T = n_L = 200`,
    /// 20 splits.
    pub fn table(datasets: Vec<DatasetSpec>) -> Self {
        Self {
            datasets,
            max_datasets: None,
            methods: vec![Method::Gbrff, Method::Pbrff],
            grids: Grids::full(),
            t_rounds: vec![200],
            n_landmarks: vec![200],
            settings: ModelSettings::default(),
            plan: SplitPlan::default(),
            seed: 0,
            output_path: None,
            worker_count: default_workers(),
        }
    }

    /// Reduced profile: fast grids, 5 splits, the 6 smallest datasets.
    pub fn fast(mut self) -> Self {
        self.grids = Grids::fast();
        self.plan.n_repeats = 5;
        self.max_datasets = Some(6);
        self
    }

    /// Sweep protocol: all three methods over `budgets`.
    pub fn sweep(datasets: Vec<DatasetSpec>, budgets: Vec<usize>) -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            t_rounds: budgets.clone(),
            n_landmarks: budgets,
            ..Self::table(datasets)
        }
    }

    pub fn budgets(&self, method: Method) -> &[usize] {
        if method.is_boosting() {
            &self.t_rounds
        } else {
            &self.n_landmarks
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grids.validate()?;
        self.plan.validate()?;
        if self.methods.is_empty() {
            return Err(invalid("no methods selected"));
        }
        for m in &self.methods {
            let b = self.budgets(*m);
            if b.is_empty() || b.contains(&0) {
                return Err(invalid(format!("{m}: budgets must be non-empty and positive")));
            }
            if b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!("{m}: budgets must be strictly ascending")));
            }
        }
        if self.settings.k_features == 0 || self.settings.svm_epochs == 0 {
            return Err(invalid("k_features and svm_epochs must be at least 1"));
        }
        if self.worker_count == 0 {
            return Err(invalid("worker_count must be at least 1"));
        }
        self.settings.descent.validate()
    }
}

pub const DEFAULT_SWEEP_BUDGETS: [usize; 10] = [1, 2, 3, 5, 10, 15, 25, 50, 100, 200];

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub method: Method,
    pub split_index: usize,
    pub chosen_hyperparameters: HyperParams,
    pub test_accuracy: f64,
    /// Wall time of the whole `(dataset, split, method)` unit, CV included.
    pub train_time_seconds: f64,
    pub landmark_budget: usize,
}

/// Mean validation accuracy of every grid point, per budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub points: Vec<HyperParams>,
    pub budgets: Vec<usize>,
    /// `scores[b][g]`: mean fold accuracy of grid point `g` at budget `b`.
    pub scores: Vec<Vec<f64>>,
}

impl CvResult {
    /// Index of the best grid point at budget index `b`; the first wins ties.
    pub fn best(&self, b: usize) -> usize {
        let row = &self.scores[b];
        let mut best = 0;
        for (g, &s) in row.iter().enumerate() {
            if s > row[best] {
                best = g;
            }
        }
        best
    }

    pub fn chosen(&self, b: usize) -> HyperParams {
        self.points[self.best(b)]
    }
}

/// Model seed of inner CV fold `f` (0-based).
pub fn fold_seed(unit_seed: u64, f: usize) -> u64 {
    seed::derive_seed(unit_seed, f as u64 + 1)
}

/// Grid search over `grids` for `method` at a single budget, scored by
/// `fold_count`-fold cross-validation on `train`.
pub fn grid_search_cv(
    train: &Dataset,
    method: Method,
    grids: &Grids,
    budget: usize,
    settings: &ModelSettings,
    fold_count: usize,
    seed: u64,
) -> Result<(HyperParams, CvResult)> {
    grids.validate()?;
    let all: Vec<usize> = (0..train.n()).collect();
    let folds = make_folds(&all, fold_count, seed::derive_seed(seed, seed::FOLD_STREAM))?;
    let cv = cross_validate(train, &folds, method, grids, &[budget], settings, seed)?;
    Ok((cv.chosen(0), cv))
}

/// Scores every grid point of `method` at every budget over `folds`.
pub fn cross_validate(
    train: &Dataset,
    folds: &[Fold],
    method: Method,
    grids: &Grids,
    budgets: &[usize],
    settings: &ModelSettings,
    unit_seed: u64,
) -> Result<CvResult> {
    let points = grids.points(method);
    let mut scores = vec![vec![0.0; points.len()]; budgets.len()];
    for (f, fold) in folds.iter().enumerate() {
        let fit = train.subset(&fold.fit)?;
        let val = train.subset(&fold.val)?;
        let seed = fold_seed(unit_seed, f);
        // acc[g][b]
        let acc = match method {
            Method::Gbrff | Method::GbrffRandom => {
                boosting_scores(&fit, &[&val], method, &points, budgets, settings, seed)?
                    .into_iter()
                    .map(|mut per_set| per_set.swap_remove(0))
                    .collect::<Vec<_>>()
            }
            Method::Pbrff => pbrff_scores(&fit, &val, grids, budgets, settings, seed)?,
        };
        for (g, per_budget) in acc.iter().enumerate() {
            for (b, a) in per_budget.iter().enumerate() {
                scores[b][g] += a;
            }
        }
    }
    let k = folds.len() as f64;
    scores.iter_mut().flatten().for_each(|s| *s /= k);
    Ok(CvResult {
        points,
        budgets: budgets.to_vec(),
        scores,
    })
}

fn gbrff_config(method: Method, hp: HyperParams, t_rounds: usize, dim: usize, settings: &ModelSettings, seed: u64) -> GbrffConfig {
    let HyperParams::Gbrff { c, v } = hp else {
        unreachable!("boosting methods only see boosting grid points")
    };
    GbrffConfig {
        t_rounds,
        k_features: settings.k_features,
        v,
        c,
        descent: settings.descent,
        landmark_mode: if method == Method::GbrffRandom {
            LandmarkMode::Random
        } else {
            LandmarkMode::Learned
        },
        seed,
        bandwidth: settings.bandwidth.resolve(dim),
        early_stopping: None,
    }
}

/// Accuracy on each of `evals` after each budget, for every grid point:
/// `out[g][e][b]`.
fn boosting_scores(
    fit: &Dataset,
    evals: &[&Dataset],
    method: Method,
    points: &[HyperParams],
    budgets: &[usize],
    settings: &ModelSettings,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let t_max = *budgets.last().expect("non-empty budgets");
    let features = RoundFeatures::new(fit, t_max, settings.k_features, seed, settings.bandwidth.resolve(fit.dim()))?;
    points
        .iter()
        .map(|&hp| {
            let cfg = gbrff_config(method, hp, t_max, fit.dim(), settings, seed);
            staged_accuracy(fit, evals, &cfg, Some(&features), budgets)
        })
        .collect()
}

/// Fits `cfg` once and reports the accuracy on each eval set after each
/// round count in `budgets`: `out[e][b]`.
fn staged_accuracy(
    fit: &Dataset,
    evals: &[&Dataset],
    cfg: &GbrffConfig,
    features: Option<&RoundFeatures>,
    budgets: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let h0 = boosting::init_h0(fit.y())?;
    let mut raw: Vec<Vec<f64>> = evals.iter().map(|e| vec![h0; e.n()]).collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(budgets.len()); evals.len()];
    let mut next = 0;
    let v = cfg.v;
    fit_observed(fit, cfg, features, |t, round| {
        if let Some(r) = round {
            let l = &r.learner;
            for (scores, ds) in raw.iter_mut().zip(evals) {
                for (s, x) in scores.iter_mut().zip(ds.rows()) {
                    *s += v * r.alpha * weighted_cos(l.rff(), l.q().as_slice(), l.landmark(), x);
                }
            }
        }
        while next < budgets.len() && budgets[next] == t {
            for ((o, scores), ds) in out.iter_mut().zip(&raw).zip(evals) {
                o.push(boosting::accuracy(scores, ds.y()));
            }
            next += 1;
        }
    })?;
    Ok(out)
}

/// Validation accuracy `out[g][b]` with `g` in PBRFF grid order.
fn pbrff_scores(
    fit: &Dataset,
    val: &Dataset,
    grids: &Grids,
    budgets: &[usize],
    settings: &ModelSettings,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let b_max = *budgets.last().expect("non-empty budgets");
    let bank = LandmarkBank::sample(fit, b_max, settings.k_features, seed, settings.bandwidth.resolve(fit.dim()))?;
    let fit_table = bank.cos_table(fit)?;
    let val_table = bank.cos_table(val)?;
    let mut out = Vec::with_capacity(grids.beta.len() * grids.c_svm.len());
    for &beta in &grids.beta {
        let post = bank.posteriors(beta)?;
        let f_fit = fit_table.features(&post)?;
        let f_val = val_table.features(&post)?;
        let mut per_c = vec![Vec::with_capacity(budgets.len()); grids.c_svm.len()];
        for &b in budgets {
            let xf = f_fit.slice(s![.., ..b]);
            let xv = f_val.slice(s![.., ..b]);
            for (ci, &c_svm) in grids.c_svm.iter().enumerate() {
                let model = train_linear(xf, fit.y(), c_svm, settings.svm_epochs)?;
                per_c[ci].push(linear_accuracy(&model, xv, val.y()));
            }
        }
        out.extend(per_c);
    }
    Ok(out)
}

fn linear_accuracy(model: &LinearModel, x: ndarray::ArrayView2<'_, f64>, y: &[f64]) -> f64 {
    let raw: Vec<f64> = x.rows().into_iter().map(|r| model.decision(&r.to_vec())).collect();
    boosting::accuracy(&raw, y)
}

/// One `(dataset, split, method)` unit: CV on the training part, refit with
/// the chosen point per budget, score on the test part.
pub fn run_unit(
    ds: &Dataset,
    split_index: usize,
    split: &data::Split,
    method: Method,
    cfg: &ExperimentConfig,
) -> Result<Vec<RunRecord>> {
    let start = Instant::now();
    let tag = seed::name_tag(&ds.name);
    let unit_seed = seed::derive_seed_path(cfg.seed, &[tag, split_index as u64, method.tag()]);
    let fold_rng = seed::derive_seed_path(cfg.seed, &[tag, split_index as u64, seed::FOLD_STREAM]);
    let budgets = cfg.budgets(method);

    let train_raw = ds.subset(&split.train)?;
    let test_raw = ds.subset(&split.test)?;
    let (train, others) = data::standardize(&train_raw, &[test_raw])?;
    let test = &others[0];
    let all: Vec<usize> = (0..train.n()).collect();
    let folds = make_folds(&all, cfg.plan.fold_count, fold_rng)?;
    let cv = cross_validate(&train, &folds, method, &cfg.grids, budgets, &cfg.settings, unit_seed)?;

    // Budgets sharing a chosen point are scored from one refit.
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for b in 0..budgets.len() {
        groups.entry(cv.best(b)).or_default().push(b);
    }
    let mut acc = vec![0.0; budgets.len()];
    for (&g, idx) in &groups {
        let hp = cv.points[g];
        let group_budgets: Vec<usize> = idx.iter().map(|&b| budgets[b]).collect();
        let scores = if method.is_boosting() {
            let t_max = *group_budgets.last().expect("non-empty group");
            let gcfg = gbrff_config(method, hp, t_max, train.dim(), &cfg.settings, unit_seed);
            staged_accuracy(&train, &[test], &gcfg, None, &group_budgets)?.swap_remove(0)
        } else {
            pbrff_refit_accuracy(&train, test, hp, &group_budgets, &cfg.settings, unit_seed)?
        };
        for (&b, a) in idx.iter().zip(scores) {
            acc[b] = a;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(budgets
        .iter()
        .enumerate()
        .map(|(b, &budget)| RunRecord {
            dataset: ds.name.clone(),
            method,
            split_index,
            chosen_hyperparameters: cv.chosen(b),
            test_accuracy: acc[b],
            train_time_seconds: elapsed,
            landmark_budget: budget,
        })
        .collect())
}

fn pbrff_refit_accuracy(
    train: &Dataset,
    test: &Dataset,
    hp: HyperParams,
    budgets: &[usize],
    settings: &ModelSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    let HyperParams::Pbrff { beta, c_svm } = hp else {
        unreachable!("PBRFF only sees PBRFF grid points")
    };
    let b_max = *budgets.last().expect("non-empty budgets");
    let bank = LandmarkBank::sample(train, b_max, settings.k_features, seed, settings.bandwidth.resolve(train.dim()))?;
    let post = bank.posteriors(beta)?;
    let features = bank.cos_table(train)?.features(&post)?;
    budgets
        .iter()
        .map(|&b| {
            let linear = train_linear(features.slice(s![.., ..b]), train.y(), c_svm, settings.svm_epochs)?;
            let model = bank.prefix(b)?.model(post[..b].to_vec(), linear)?;
            model.accuracy(test)
        })
        .collect()
}

/// Per-dataset failure, kept apart from the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub records: Vec<RunRecord>,
    pub failures: Vec<Failure>,
}

/// Loads the configured datasets, keeping load failures apart.
pub fn load_datasets(cfg: &ExperimentConfig) -> (Vec<Dataset>, Vec<Failure>) {
    let mut loaded = Vec::new();
    let mut failures = Vec::new();
    for spec in &cfg.datasets {
        match load_and_binarize(spec) {
            Ok(ds) => loaded.push(ds),
            Err(e) => {
                log::error!("{}: {e}", spec.name());
                failures.push(Failure {
                    dataset: spec.name(),
                    error: e.to_string(),
                });
            }
        }
    }
    if let Some(k) = cfg.max_datasets {
        loaded.sort_by(|a, b| a.n().cmp(&b.n()).then_with(|| a.name.cmp(&b.name)));
        loaded.truncate(k);
    }
    loaded.sort_by(|a, b| a.name.cmp(&b.name));
    (loaded, failures)
}

/// Runs every `(dataset, split, method)` unit of `cfg` on a pool of
/// `cfg.worker_count` threads.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let (datasets, load_failures) = load_datasets(cfg);
    let mut out = run_on_datasets(&datasets, cfg)?;
    out.failures.extend(load_failures);
    out.failures.sort_by(|a, b| a.dataset.cmp(&b.dataset));
    Ok(out)
}

/// [`run_benchmark`] on already loaded datasets.
pub fn run_on_datasets(datasets: &[Dataset], cfg: &ExperimentConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let mut units = Vec::new();
    let mut failures = Vec::new();
    for (d, ds) in datasets.iter().enumerate() {
        let plan = SplitPlan {
            seed: seed::derive_seed(cfg.seed, seed::name_tag(&ds.name)),
            ..cfg.plan
        };
        match make_splits(ds.n(), &plan) {
            Ok(splits) => {
                for (s, split) in splits.into_iter().enumerate() {
                    for &m in &cfg.methods {
                        units.push((d, s, split.clone(), m));
                    }
                }
            }
            Err(e) => failures.push(Failure {
                dataset: ds.name.clone(),
                error: e.to_string(),
            }),
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let total = units.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<(usize, Result<Vec<RunRecord>>)> = pool.install(|| {
        units
            .par_iter()
            .map(|(d, s, split, m)| {
                let r = run_unit(&datasets[*d], *s, split, *m, cfg);
                let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                log::info!("[{k}/{total}] {} split {s} {m}", datasets[*d].name);
                (*d, r)
            })
            .collect()
    });

    let mut failed = vec![None; datasets.len()];
    let mut records = Vec::new();
    for (d, r) in results {
        match r {
            Ok(recs) => records.extend(recs),
            Err(e) => {
                log::error!("{}: {e}", datasets[d].name);
                failed[d].get_or_insert(e.to_string());
            }
        }
    }
    for (d, err) in failed.into_iter().enumerate() {
        if let Some(error) = err {
            records.retain(|r| r.dataset != datasets[d].name);
            failures.push(Failure {
                dataset: datasets[d].name.clone(),
                error,
            });
        }
    }
    sort_records(&mut records);
    failures.sort_by(|a, b| a.dataset.cmp(&b.dataset));
    Ok(BenchOutput { records, failures })
}

pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        (&a.dataset, a.method, a.landmark_budget, a.split_index).cmp(&(&b.dataset, b.method, b.landmark_budget, b.split_index))
    });
}

/// Landmark-budget sweep: [`run_benchmark`] with every method evaluated at
/// every budget.
pub fn landmark_sweep(cfg: &ExperimentConfig) -> Result<BenchOutput> {
    run_benchmark(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: Method,
    pub landmark_budget: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation over splits; 0 for a single split.
    pub std_accuracy: f64,
    /// Rank among the methods on this dataset and budget, ties averaged.
    pub rank: f64,
    pub n_splits: usize,
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize, Method), Vec<f64>> = BTreeMap::new();
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    for r in &sorted {
        groups
            .entry((r.dataset.clone(), r.landmark_budget, r.method))
            .or_default()
            .push(r.test_accuracy);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((dataset, landmark_budget, method), acc)| {
            let n = acc.len();
            let mean = acc.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                dataset,
                method,
                landmark_budget,
                mean_accuracy: mean,
                std_accuracy: std,
                rank: 0.0,
                n_splits: n,
            }
        })
        .collect();
    // rows are grouped by (dataset, budget)
    let mut start = 0;
    while start < rows.len() {
        let key = (rows[start].dataset.clone(), rows[start].landmark_budget);
        let mut end = start;
        while end < rows.len() && (rows[end].dataset.clone(), rows[end].landmark_budget) == key {
            end += 1;
        }
        let means: Vec<f64> = rows[start..end].iter().map(|r| r.mean_accuracy).collect();
        for (row, rank) in rows[start..end].iter_mut().zip(average_ranks(&means)) {
            row.rank = rank;
        }
        start = end;
    }
    rows.sort_by(|a, b| (&a.dataset, a.method, a.landmark_budget).cmp(&(&b.dataset, b.method, b.landmark_budget)));
    rows
}

/// Rank 1 for the highest value; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let above = values.iter().filter(|&&o| o > v).count();
            let tied = values.iter().filter(|&&o| o == v).count();
            above as f64 + (tied as f64 + 1.0) / 2.0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub method: Method,
    pub landmark_budget: usize,
    pub average_rank: f64,
    pub n_datasets: usize,
}

pub fn rank_table(summary: &[SummaryRow]) -> Vec<RankRow> {
    let mut groups: BTreeMap<(Method, usize), Vec<f64>> = BTreeMap::new();
    for r in summary {
        groups.entry((r.method, r.landmark_budget)).or_default().push(r.rank);
    }
    groups
        .into_iter()
        .map(|((method, landmark_budget), ranks)| RankRow {
            method,
            landmark_budget,
            average_rank: ranks.iter().sum::<f64>() / ranks.len() as f64,
            n_datasets: ranks.len(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub landmark_budget: usize,
    pub method: Method,
    /// Mean over datasets of the per-dataset mean accuracy.
    pub mean_accuracy: f64,
    /// Datasets on which this method has the best mean (ties count for all).
    pub win_count: usize,
}

pub fn sweep_table(summary: &[SummaryRow]) -> Vec<SweepRow> {
    let mut groups: BTreeMap<(usize, Method), (Vec<f64>, usize)> = BTreeMap::new();
    for r in summary {
        let e = groups.entry((r.landmark_budget, r.method)).or_default();
        e.0.push(r.mean_accuracy);
        if r.rank == best_rank(summary, &r.dataset, r.landmark_budget) && is_top(summary, r) {
            e.1 += 1;
        }
    }
    groups
        .into_iter()
        .map(|((landmark_budget, method), (means, wins))| SweepRow {
            landmark_budget,
            method,
            mean_accuracy: means.iter().sum::<f64>() / means.len() as f64,
            win_count: wins,
        })
        .collect()
}

fn best_rank(summary: &[SummaryRow], dataset: &str, budget: usize) -> f64 {
    summary
        .iter()
        .filter(|r| r.dataset == dataset && r.landmark_budget == budget)
        .map(|r| r.rank)
        .fold(f64::INFINITY, f64::min)
}

fn is_top(summary: &[SummaryRow], row: &SummaryRow) -> bool {
    summary
        .iter()
        .filter(|r| r.dataset == row.dataset && r.landmark_budget == row.landmark_budget)
        .all(|r| r.mean_accuracy <= row.mean_accuracy)
}

/// File names written by [`emit_results`].
pub const RESULT_FILES: [&str; 6] = ["runs.csv", "timings.csv", "summary.csv", "ranks.csv", "sweep.csv", "failures.csv"];

/// Writes the result files into `dir`. Everything except `timings.csv` is a
/// pure function of the records.
pub fn emit_results(output: &BenchOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut records = output.records.clone();
    sort_records(&mut records);
    let summary = summarize(&records);

    write_csv(
        &dir.join("runs.csv"),
        &["dataset", "method", "split_index", "landmark_budget", "chosen_hyperparameters", "test_accuracy"],
        records.iter().map(|r| {
            vec![
                r.dataset.clone(),
                r.method.to_string(),
                r.split_index.to_string(),
                r.landmark_budget.to_string(),
                r.chosen_hyperparameters.to_string(),
                fixed(r.test_accuracy),
            ]
        }),
    )?;
    write_csv(
        &dir.join("timings.csv"),
        &["dataset", "method", "split_index", "landmark_budget", "train_time_seconds"],
        records.iter().map(|r| {
            vec![
                r.dataset.clone(),
                r.method.to_string(),
                r.split_index.to_string(),
                r.landmark_budget.to_string(),
                format!("{:.3}", r.train_time_seconds),
            ]
        }),
    )?;
    write_csv(
        &dir.join("summary.csv"),
        &["dataset", "method", "landmark_budget", "mean_accuracy", "std_accuracy", "rank", "n_splits"],
        summary.iter().map(|r| {
            vec![
                r.dataset.clone(),
                r.method.to_string(),
                r.landmark_budget.to_string(),
                fixed(r.mean_accuracy),
                fixed(r.std_accuracy),
                fixed(r.rank),
                r.n_splits.to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.join("ranks.csv"),
        &["method", "landmark_budget", "average_rank", "n_datasets"],
        rank_table(&summary).iter().map(|r| {
            vec![
                r.method.to_string(),
                r.landmark_budget.to_string(),
                fixed(r.average_rank),
                r.n_datasets.to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.join("sweep.csv"),
        &["landmark_budget", "method", "mean_accuracy", "win_count"],
        sweep_table(&summary).iter().map(|r| {
            vec![
                r.landmark_budget.to_string(),
                r.method.to_string(),
                fixed(r.mean_accuracy),
                r.win_count.to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.join("failures.csv"),
        &["dataset", "error"],
        output.failures.iter().map(|f| vec![f.dataset.clone(), f.error.clone()]),
    )?;
    Ok(())
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record(header).map_err(|e| io(e.into()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}
