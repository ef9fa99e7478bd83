//! Dataset ingestion, binarization, standardization and resampling.
//!
//! Datasets are CSV files (comma separated, header row, UTF-8) described by a
//! TOML [`DatasetSpec`]:
//!
//! ```toml
//! name = "wine"
//! source_path = "../csv/wine.csv"   # relative to the spec file
//! label_column = "class"
//! negative_classes = ["2", "3"]
//! positive_classes = ["1"]
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

/// Feature matrix with labels in `{−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    x: Array2<f64>,
    y: Vec<f64>,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, x: Array2<f64>, y: Vec<f64>) -> Result<Self> {
        let (n, d) = x.dim();
        if n == 0 || d == 0 {
            return Err(invalid(format!("dataset must be non-empty (got {n}×{d})")));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: n,
                got: y.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains non-finite values"));
        }
        if let Some(bad) = y.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(invalid(format!("label {bad} is not ±1")));
        }
        Ok(Self {
            name: name.into(),
            x: x.as_standard_layout().into_owned(),
            y,
            feature_names: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.x.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x
            .as_slice()
            .expect("standard layout")
            .chunks_exact(self.dim())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(invalid(format!("row index {bad} out of range for n={}", self.n())));
        }
        let mut out = Self::new(
            self.name.clone(),
            self.x.select(Axis(0), indices),
            indices.iter().map(|&i| self.y[i]).collect(),
        )?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    /// Count of `+1` labels.
    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&l| l > 0.0).count()
    }
}

/// How to read and binarize one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub source_path: PathBuf,
    pub label_column: String,
    pub negative_classes: BTreeSet<String>,
    pub positive_classes: BTreeSet<String>,
}

impl DatasetSpec {
    /// Reads a TOML spec; a relative `source_path` is resolved against the
    /// spec file's directory. The name defaults to the file stem.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec: Self = toml::from_str(&text).map_err(|e| Error::Spec {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        if spec.source_path.is_relative() {
            if let Some(dir) = path.parent() {
                spec.source_path = dir.join(&spec.source_path);
            }
        }
        if spec.name.is_none() {
            spec.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        spec.validate().map_err(|msg| Error::Spec {
            path: path.to_path_buf(),
            msg,
        })?;
        Ok(spec)
    }

    /// Loads every `*.toml` spec in `dir`, sorted by file name.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<Self>> {
        let dir = dir.as_ref();
        let io_err = |source| Error::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "toml"))
            .collect();
        paths.sort();
        paths.iter().map(Self::from_file).collect()
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.source_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.negative_classes.is_empty() || self.positive_classes.is_empty() {
            return Err("both class sets must be non-empty".into());
        }
        if let Some(c) = self.negative_classes.intersection(&self.positive_classes).next() {
            return Err(format!("class {c:?} is listed as both negative and positive"));
        }
        Ok(())
    }

    fn label_of(&self, raw: &str) -> Option<f64> {
        if self.positive_classes.contains(raw) {
            Some(1.0)
        } else if self.negative_classes.contains(raw) {
            Some(-1.0)
        } else {
            None
        }
    }
}

/// Reads the CSV named by `spec` and maps raw classes to `±1`.
pub fn load_and_binarize(spec: &DatasetSpec) -> Result<Dataset> {
    let path = spec.source_path.as_path();
    spec.validate().map_err(|msg| Error::Spec {
        path: path.to_path_buf(),
        msg,
    })?;
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format_err = |line: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| format_err(1, e.to_string()))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == spec.label_column)
        .ok_or_else(|| format_err(1, format!("no column named {:?}", spec.label_column)))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let d = feature_names.len();
    if d == 0 {
        return Err(format_err(1, "no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| format_err(line, e.to_string()))?;
        if record.len() != d + 1 {
            return Err(format_err(line, format!("expected {} fields, found {}", d + 1, record.len())));
        }
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                let label = spec.label_of(field).ok_or_else(|| Error::SpecCoverage {
                    path: path.to_path_buf(),
                    line,
                    class: field.to_string(),
                })?;
                labels.push(label);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| format_err(line, format!("cannot parse {field:?} as a number")))?;
                if !v.is_finite() {
                    return Err(format_err(line, format!("non-finite value {field:?}")));
                }
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(format_err(2, "no data rows".into()));
    }
    let x = Array2::from_shape_vec((labels.len(), d), values).expect("row lengths checked");
    let mut ds = Dataset::new(spec.name(), x, labels)?;
    ds.feature_names = Some(feature_names);
    Ok(ds)
}

/// Per-feature affine map fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; 0 marks a constant feature.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Self {
        let n = train.n() as f64;
        let mean: Vec<f64> = train.x().mean_axis(Axis(0)).expect("non-empty").to_vec();
        let std = train
            .x()
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(col, m)| (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        crate::error::check_dim("standardizer", self.mean.len(), ds.dim())?;
        let mut x = ds.x().clone();
        for mut row in x.axis_iter_mut(Axis(0)) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                // Constant columns, or columns whose spread is at rounding level.
                *v = if *s > 1e-12 * m.abs().max(1.0) { (*v - m) / s } else { 0.0 };
            }
        }
        let mut out = Dataset::new(ds.name.clone(), x, ds.y().to_vec())?;
        out.feature_names = ds.feature_names.clone();
        Ok(out)
    }

    pub fn transform_row(&self, row: ArrayView1<'_, f64>) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s > 1e-12 * m.abs().max(1.0) { (v - m) / s } else { 0.0 })
            .collect()
    }
}

/// Fits mean/std on `train` and applies them to `train` and every other set.
pub fn standardize(train: &Dataset, others: &[Dataset]) -> Result<(Dataset, Vec<Dataset>)> {
    let s = Standardizer::fit(train);
    let t = s.apply(train)?;
    let o = others.iter().map(|d| s.apply(d)).collect::<Result<_>>()?;
    Ok((t, o))
}

/// Repeated random train/test splitting plus inner cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub n_repeats: usize,
    pub fold_count: usize,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            seed: 0,
            train_fraction: 0.3,
            n_repeats: 20,
            fold_count: 5,
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(invalid(format!("train fraction {} not in (0, 1)", self.train_fraction)));
        }
        if self.n_repeats == 0 {
            return Err(invalid("n_repeats must be at least 1"));
        }
        if self.fold_count < 2 {
            return Err(invalid("fold_count must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `plan.n_repeats` random partitions of `0..n`, each with
/// `floor(train_fraction · n)` training indices. Repeat `r` only depends on
/// `(plan.seed, r)`. Both index lists are sorted.
pub fn make_splits(n: usize, plan: &SplitPlan) -> Result<Vec<Split>> {
    plan.validate()?;
    if n < 2 {
        return Err(invalid(format!("need at least 2 rows to split, got {n}")));
    }
    let n_train = (plan.train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(invalid(format!(
            "train fraction {} leaves an empty side for n={n}",
            plan.train_fraction
        )));
    }
    Ok((0..plan.n_repeats)
        .map(|r| {
            let mut rng = seed::rng(seed::derive_seed_path(plan.seed, &[seed::SPLIT_STREAM, r as u64]));
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut train = idx[..n_train].to_vec();
            let mut test = idx[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub fit: Vec<usize>,
    pub val: Vec<usize>,
}

/// Shuffles `train_indices` and cuts them into `fold_count` contiguous
/// blocks; the first `len % fold_count` blocks get one extra element.
pub fn make_folds(train_indices: &[usize], fold_count: usize, seed: u64) -> Result<Vec<Fold>> {
    let n = train_indices.len();
    if fold_count < 2 {
        return Err(invalid("fold_count must be at least 2"));
    }
    if fold_count > n {
        return Err(invalid(format!("{fold_count} folds requested for {n} indices")));
    }
    let mut shuffled = train_indices.to_vec();
    shuffled.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / fold_count, n % fold_count);
    let mut folds = Vec::with_capacity(fold_count);
    let mut start = 0;
    for f in 0..fold_count {
        let end = start + base + usize::from(f < extra);
        let mut val = shuffled[start..end].to_vec();
        let mut fit: Vec<usize> = shuffled[..start].iter().chain(&shuffled[end..]).copied().collect();
        val.sort_unstable();
        fit.sort_unstable();
        folds.push(Fold { fit, val });
        start = end;
    }
    Ok(folds)
}
