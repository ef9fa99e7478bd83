//! Two-step landmark baseline.
//!
//! `n_L` landmarks are drawn with replacement from the training set. Landmark
//! `t` gets its own [`RffSet`] and feature weights
//! `Q_j ∝ exp(−β √n L_j)`, where `L_j` is the linear kernel-alignment loss of
//! feature `j` against the other training points. Every point is then mapped
//! to its `n_L` landmark kernel values and a linear hinge-loss classifier is
//! trained on the mapped data.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boosting::{accuracy, sign};
use crate::data::Dataset;
use crate::error::{check_dim, invalid, Result};
use crate::rff::{dot, weighted_cos, RffSet, SimplexWeights};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbrffConfig {
    pub n_landmarks: usize,
    pub k_features: usize,
    pub beta: f64,
    /// Hinge-loss trade-off; the regularizer is `λ = 1/(C·n)`.
    pub c_param: f64,
    pub epochs: usize,
    pub seed: u64,
    pub bandwidth: f64,
}

impl Default for PbrffConfig {
    fn default() -> Self {
        Self {
            n_landmarks: 200,
            k_features: 100,
            beta: 1.0,
            c_param: 1.0,
            epochs: 1000,
            seed: 0,
            bandwidth: 1.0,
        }
    }
}

impl PbrffConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_landmarks == 0 || self.k_features == 0 || self.epochs == 0 {
            return Err(invalid("n_landmarks, k_features and epochs must be at least 1"));
        }
        check_beta(self.beta)?;
        check_c(self.c_param)?;
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        Ok(())
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("beta must be finite and non-negative, got {beta}")))
    }
}

fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("C must be positive, got {c}")))
    }
}

/// Linear loss `½ − ½ y_t y_i cos(ω_j·(x_t − x_i))` of feature `j`, averaged
/// over every training row except `landmark_row`.
pub fn alignment_loss(
    j: usize,
    rff: &RffSet,
    landmark: (&[f64], f64),
    train: &Dataset,
    landmark_row: Option<usize>,
) -> Result<f64> {
    if j >= rff.k() {
        return Err(invalid(format!("feature index {j} out of range for K={}", rff.k())));
    }
    check_dim("landmark", rff.dim(), landmark.0.len())?;
    check_dim("dataset dimension", rff.dim(), train.dim())?;
    let omega = rff.omega(j);
    let omega = omega.as_slice().expect("contiguous row");
    let (x_t, y_t) = landmark;
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, (x, &y)) in train.rows().zip(train.y()).enumerate() {
        if Some(i) == landmark_row {
            continue;
        }
        let arg: f64 = omega.iter().zip(x_t.iter().zip(x)).map(|(w, (a, b))| w * (a - b)).sum();
        total += 0.5 - 0.5 * y_t * y * arg.cos();
        count += 1;
    }
    if count == 0 {
        return Err(invalid("alignment loss needs at least one comparison point"));
    }
    Ok(total / count as f64)
}

/// `Q_j ∝ exp(−β √n L_j)`.
pub fn compute_q_pbrff(losses: &[f64], beta: f64, n: usize) -> Result<SimplexWeights> {
    check_beta(beta)?;
    if losses.is_empty() {
        return Err(invalid("empty loss vector"));
    }
    if n < 2 {
        return Err(invalid(format!("need n ≥ 2, got {n}")));
    }
    if beta == 0.0 {
        return Ok(SimplexWeights::uniform(losses.len()));
    }
    let scale = beta * (n as f64).sqrt();
    let logits: Vec<f64> = losses.iter().map(|l| -scale * l).collect();
    Ok(SimplexWeights::softmax(&logits))
}

/// `Σ q_j L_j + (KL(q‖uniform) + s²/(2(n−1)) + ln(1/ε)) / s`.
pub fn pac_bayes_bound(emp_losses: &[f64], q: &SimplexWeights, s: f64, epsilon: f64, n: usize) -> Result<f64> {
    check_dim("losses", q.len(), emp_losses.len())?;
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("s must be positive, got {s}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if n < 2 {
        return Err(invalid(format!("need n ≥ 2, got {n}")));
    }
    if emp_losses.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(invalid("empirical losses must lie in [0, 1]"));
    }
    let risk = dot(q.as_slice(), emp_losses);
    let complexity = q.kl_to_uniform() + s * s / (2.0 * (n as f64 - 1.0)) + (1.0 / epsilon).ln();
    Ok(risk + complexity / s)
}

/// `w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// Stopping threshold on the spread of the projected dual gradient.
pub const SVM_TOLERANCE: f64 = 1e-6;

/// Minimizes `λ/2 (‖w‖² + b²) + 1/n Σ max(0, 1 − y_i (w·x_i + b))` with
/// `λ = 1/(C·n)` by coordinate ascent on the dual, visiting rows in order.
///
/// Stops after `epochs` passes or once the projected dual gradient spans
/// less than [`SVM_TOLERANCE`]. The returned model is the epoch-end iterate
/// with the lowest primal objective, so [`LinearTrace::objective`] is
/// non-increasing.
pub fn train_linear(features: ArrayView2<'_, f64>, labels: &[f64], c_param: f64, epochs: usize) -> Result<LinearModel> {
    Ok(train_linear_traced(features, labels, c_param, epochs)?.model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrace {
    pub model: LinearModel,
    /// Objective of the returned model after each epoch.
    pub objective: Vec<f64>,
}

pub fn train_linear_traced(
    features: ArrayView2<'_, f64>,
    labels: &[f64],
    c_param: f64,
    epochs: usize,
) -> Result<LinearTrace> {
    check_c(c_param)?;
    let (n, m) = features.dim();
    if n == 0 {
        return Err(invalid("linear training needs at least one row"));
    }
    if epochs == 0 {
        return Err(invalid("epochs must be at least 1"));
    }
    check_dim("labels", n, labels.len())?;
    let features = features.as_standard_layout();
    let flat = features.as_slice().expect("standard layout");
    let lambda = 1.0 / (c_param * n as f64);
    let inv_n = 1.0 / n as f64;

    // Bias is stored as weight `m` against a constant feature of 1.
    let decision = |v: &[f64], x: &[f64]| dot(&v[..m], x) + v[m];
    let objective = |v: &[f64]| -> f64 {
        let hinge: f64 = flat
            .chunks_exact(m)
            .zip(labels)
            .map(|(x, y)| (1.0 - y * decision(v, x)).max(0.0))
            .sum();
        0.5 * lambda * dot(v, v) + hinge * inv_n
    };
    // ‖(x_i, 1)‖²
    let q_diag: Vec<f64> = flat.chunks_exact(m).map(|x| dot(x, x) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; m + 1];
    let mut best = w.clone();
    let mut best_obj = objective(&w);
    let mut trace = Vec::with_capacity(epochs);

    for _ in 0..epochs {
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for ((x, &y), (a, &qii)) in flat.chunks_exact(m).zip(labels).zip(alpha.iter_mut().zip(&q_diag)) {
            let g = y * decision(&w, x) - 1.0;
            let pg = if *a <= 0.0 {
                g.min(0.0)
            } else if *a >= c_param {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let new = (*a - g / qii).clamp(0.0, c_param);
                let step = (new - *a) * y;
                *a = new;
                for (wi, xi) in w[..m].iter_mut().zip(x) {
                    *wi += step * xi;
                }
                w[m] += step;
            }
        }
        let obj = objective(&w);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&w);
        }
        trace.push(best_obj);
        if pg_max - pg_min < SVM_TOLERANCE {
            break;
        }
    }
    let bias = best[m];
    best.truncate(m);
    Ok(LinearTrace {
        model: LinearModel { weights: best, bias },
        objective: trace,
    })
}

/// One sampled landmark with its features and posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkKernel {
    pub point: Vec<f64>,
    pub label: f64,
    pub rff: RffSet,
    pub q: SimplexWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbrffModel {
    pub landmarks: Vec<LandmarkKernel>,
    pub linear: LinearModel,
}

impl PbrffModel {
    pub fn dim(&self) -> usize {
        self.landmarks[0].point.len()
    }

    pub fn n_landmarks(&self) -> usize {
        self.landmarks.len()
    }

    pub fn map_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("input point", self.dim(), x.len())?;
        Ok(self.map_unchecked(x))
    }

    fn map_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.landmarks
            .iter()
            .map(|l| weighted_cos(&l.rff, l.q.as_slice(), &l.point, x))
            .collect()
    }

    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        let z = self.map_features(x)?;
        Ok(self.linear.decision(&z))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_raw(x).map(sign)
    }

    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        check_dim("dataset dimension", self.dim(), ds.dim())?;
        let raw: Vec<f64> = ds.rows().map(|x| self.linear.decision(&self.map_unchecked(x))).collect();
        Ok(accuracy(&raw, ds.y()))
    }
}

pub fn map_features(model: &PbrffModel, x: &[f64]) -> Result<Vec<f64>> {
    model.map_features(x)
}

/// The β-independent part of a PBRFF fit: sampled landmarks, their features
/// and per-feature alignment losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkBank {
    /// Row of each landmark in the training set.
    pub rows: Vec<usize>,
    pub rffs: Vec<RffSet>,
    /// `losses[t][j]`, alignment loss of feature `j` of landmark `t`.
    pub losses: Vec<Vec<f64>>,
    n_train: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl LandmarkBank {
    /// Landmark rows come from `derive_seed(seed, LANDMARK_STREAM)`; landmark
    /// `t` (1-based) draws its features from `derive_seed(seed, t)`.
    pub fn sample(train: &Dataset, n_landmarks: usize, k_features: usize, seed: u64, bandwidth: f64) -> Result<Self> {
        let n = train.n();
        if n < 2 {
            return Err(invalid("landmark sampling needs at least 2 training points"));
        }
        if n_landmarks == 0 {
            return Err(invalid("n_landmarks must be at least 1"));
        }
        let mut rng = seed::rng(seed::derive_seed(seed, seed::LANDMARK_STREAM));
        let rows: Vec<usize> = (0..n_landmarks).map(|_| rng.random_range(0..n)).collect();
        let mut rffs = Vec::with_capacity(n_landmarks);
        let mut losses = Vec::with_capacity(n_landmarks);
        let y = train.y();
        for (t, &row) in rows.iter().enumerate() {
            let mut rff = RffSet::sample(k_features, train.dim(), seed::derive_seed(seed, t as u64 + 1))?;
            if bandwidth != 1.0 {
                rff = rff.with_bandwidth(bandwidth)?;
            }
            let table = cos_block(&rff, train.row(row), train);
            let k = rff.k();
            let mut acc = vec![0.0; k];
            for (i, (c, &yi)) in table.chunks_exact(k).zip(y).enumerate() {
                if i == row {
                    continue;
                }
                let s = y[row] * yi;
                for (a, cj) in acc.iter_mut().zip(c) {
                    *a += s * cj;
                }
            }
            let inv = 1.0 / (n - 1) as f64;
            losses.push(acc.iter().map(|a| (0.5 - 0.5 * a * inv).clamp(0.0, 1.0)).collect());
            rffs.push(rff);
        }
        Ok(Self {
            points: rows.iter().map(|&r| train.row(r).to_vec()).collect(),
            labels: rows.iter().map(|&r| y[r]).collect(),
            rows,
            rffs,
            losses,
            n_train: n,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The first `b` landmarks. Equal to sampling `b` landmarks with the
    /// same seed.
    pub fn prefix(&self, b: usize) -> Result<Self> {
        if b == 0 || b > self.len() {
            return Err(invalid(format!("prefix of {b} landmarks from a bank of {}", self.len())));
        }
        Ok(Self {
            rows: self.rows[..b].to_vec(),
            rffs: self.rffs[..b].to_vec(),
            losses: self.losses[..b].to_vec(),
            n_train: self.n_train,
            points: self.points[..b].to_vec(),
            labels: self.labels[..b].to_vec(),
        })
    }

    pub fn posteriors(&self, beta: f64) -> Result<Vec<SimplexWeights>> {
        self.losses
            .iter()
            .map(|l| compute_q_pbrff(l, beta, self.n_train))
            .collect()
    }

    /// `cos(ω_j^t · (x_t − x_i))` for every landmark `t`, row `i` of `points`
    /// and feature `j`.
    pub fn cos_table(&self, points: &Dataset) -> Result<CosTable> {
        check_dim("dataset dimension", self.points[0].len(), points.dim())?;
        let blocks = self
            .rffs
            .iter()
            .zip(&self.points)
            .map(|(rff, p)| cos_block(rff, p, points))
            .collect();
        Ok(CosTable {
            blocks,
            n: points.n(),
            k: self.rffs[0].k(),
        })
    }

    pub fn model(&self, posteriors: Vec<SimplexWeights>, linear: LinearModel) -> Result<PbrffModel> {
        check_dim("posteriors", self.len(), posteriors.len())?;
        check_dim("linear weights", self.len(), linear.weights.len())?;
        let landmarks = self
            .points
            .iter()
            .zip(&self.labels)
            .zip(&self.rffs)
            .zip(posteriors)
            .map(|(((p, &label), rff), q)| LandmarkKernel {
                point: p.clone(),
                label,
                rff: rff.clone(),
                q,
            })
            .collect();
        Ok(PbrffModel { landmarks, linear })
    }
}

/// Cached landmark cosines for a fixed point set; see [`LandmarkBank::cos_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct CosTable {
    /// One `n × K` row-major block per landmark.
    blocks: Vec<Vec<f64>>,
    n: usize,
    k: usize,
}

impl CosTable {
    /// `n × n_L` mapped features under the given posteriors.
    pub fn features(&self, posteriors: &[SimplexWeights]) -> Result<Array2<f64>> {
        check_dim("posteriors", self.blocks.len(), posteriors.len())?;
        let n_l = self.blocks.len();
        let mut out = Array2::zeros((self.n, n_l));
        for (t, (block, q)) in self.blocks.iter().zip(posteriors).enumerate() {
            check_dim("simplex weights", self.k, q.len())?;
            for (i, c) in block.chunks_exact(self.k).enumerate() {
                out[[i, t]] = dot(c, q.as_slice()).clamp(-1.0, 1.0);
            }
        }
        Ok(out)
    }
}

fn cos_block(rff: &RffSet, landmark: &[f64], points: &Dataset) -> Vec<f64> {
    let a = rff.project(landmark);
    let mut out = Vec::with_capacity(points.n() * rff.k());
    for x in points.rows() {
        for (p, aj) in rff.project(x).into_iter().zip(&a) {
            out.push((aj - p).cos());
        }
    }
    out
}

pub fn fit_pbrff(train: &Dataset, cfg: &PbrffConfig) -> Result<PbrffModel> {
    cfg.validate()?;
    let bank = LandmarkBank::sample(train, cfg.n_landmarks, cfg.k_features, cfg.seed, cfg.bandwidth)?;
    let posteriors = bank.posteriors(cfg.beta)?;
    let features = bank.cos_table(train)?.features(&posteriors)?;
    let linear = train_linear(features.view(), train.y(), cfg.c_param, cfg.epochs)?;
    bank.model(posteriors, linear)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rff::kernel_value;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_ds(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = seed::rng(seed);
        let x = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
        let y = (0..n).map(|i| if (i * 7 + 3) % 5 < 2 { 1.0 } else { -1.0 }).collect();
        Dataset::new("r", x, y).unwrap()
    }

    #[test]
    fn alignment_loss_perfect_and_uninformative() {
        let rff = RffSet::from_omegas(array![[1.0]], 0).unwrap();
        let same = Dataset::new("s", array![[0.5], [0.5], [0.5]], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(alignment_loss(0, &rff, (&[0.5], 1.0), &same, Some(0)).unwrap(), 0.0);

        let half_pi = std::f64::consts::FRAC_PI_2;
        let shifted = Dataset::new("q", array![[0.0], [0.0]], vec![1.0, -1.0]).unwrap();
        let l = alignment_loss(0, &rff, (&[half_pi], 1.0), &shifted, None).unwrap();
        assert_abs_diff_eq!(l, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn alignment_loss_matches_direct_sum() {
        let ds = random_ds(15, 3, 4);
        let rff = RffSet::sample(5, 3, 8).unwrap();
        let t = 6;
        for j in 0..5 {
            let w = rff.omega(j);
            let mut direct = 0.0;
            for i in (0..15).filter(|&i| i != t) {
                let arg: f64 = (0..3).map(|k| w[k] * (ds.x()[[t, k]] - ds.x()[[i, k]])).sum();
                direct += 0.5 - 0.5 * ds.y()[t] * ds.y()[i] * arg.cos();
            }
            direct /= 14.0;
            let got = alignment_loss(j, &rff, (ds.row(t), ds.y()[t]), &ds, Some(t)).unwrap();
            assert_abs_diff_eq!(got, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn alignment_loss_needs_comparison_points() {
        let rff = RffSet::from_omegas(array![[1.0]], 0).unwrap();
        let one = Dataset::new("o", array![[0.0]], vec![1.0]).unwrap();
        assert!(alignment_loss(0, &rff, (&[0.0], 1.0), &one, Some(0)).is_err());
    }

    #[test]
    fn bank_losses_match_alignment_loss() {
        let ds = random_ds(12, 2, 1);
        let bank = LandmarkBank::sample(&ds, 4, 6, 3, 1.0).unwrap();
        for (t, &row) in bank.rows.iter().enumerate() {
            for j in 0..6 {
                let l = alignment_loss(j, &bank.rffs[t], (ds.row(row), ds.y()[row]), &ds, Some(row)).unwrap();
                assert_abs_diff_eq!(bank.losses[t][j], l, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn q_examples() {
        let q = compute_q_pbrff(&[0.3, 0.1, 0.9], 0.0, 10).unwrap();
        assert_eq!(q, SimplexWeights::uniform(3));
        // β√n = 30
        let q = compute_q_pbrff(&[0.0, 1.0], 3.0, 100).unwrap();
        assert_abs_diff_eq!(q.as_slice()[0], 1.0 / (1.0 + (-30.0f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(q.as_slice()[0], 1.0, epsilon = 1e-12);
        assert!(compute_q_pbrff(&[0.1], -1.0, 10).is_err());
        assert!(compute_q_pbrff(&[0.1], 1.0, 1).is_err());
    }

    #[test]
    fn bound_examples() {
        let losses = [0.2, 0.4, 0.3];
        let (s, eps, n) = (5.0, 0.05, 50);
        let u = SimplexWeights::uniform(3);
        let expected = 0.3 + (s * s / (2.0 * 49.0) + (1.0f64 / eps).ln()) / s;
        assert_abs_diff_eq!(pac_bayes_bound(&losses, &u, s, eps, n).unwrap(), expected, epsilon = 1e-12);

        let one_hot = SimplexWeights::new(vec![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(one_hot.kl_to_uniform(), 2f64.ln(), epsilon = 1e-15);

        let a = pac_bayes_bound(&losses, &u, s, 0.1, n).unwrap();
        let b = pac_bayes_bound(&losses, &u, s, 0.5, n).unwrap();
        assert!(b < a);
        assert!(pac_bayes_bound(&losses, &u, s, 1.0, n).is_err());
        assert!(pac_bayes_bound(&losses, &u, 0.0, 0.1, n).is_err());
        assert!(pac_bayes_bound(&[1.5, 0.0, 0.0], &u, s, 0.1, n).is_err());
    }

    #[test]
    fn linear_separates_toy_set() {
        let x = array![[-1.0], [1.0]];
        let m = train_linear(x.view(), &[-1.0, 1.0], 10.0, 500).unwrap();
        assert!(m.decision(&[-1.0]) < 0.0);
        assert!(m.decision(&[1.0]) > 0.0);
    }

    #[test]
    fn linear_collapses_under_heavy_regularization() {
        let ds = random_ds(20, 3, 5);
        let m = train_linear(ds.x().view(), ds.y(), 1e-9, 100).unwrap();
        assert!(dot(&m.weights, &m.weights).sqrt() < 1e-3);
    }

    #[test]
    fn linear_objective_trace_never_increases() {
        let ds = random_ds(30, 4, 6);
        let tr = train_linear_traced(ds.x().view(), ds.y(), 1.0, 50).unwrap();
        for w in tr.objective.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn duplicated_rows_keep_the_decision_function() {
        let ds = random_ds(25, 3, 7);
        let idx: Vec<usize> = (0..25).chain(0..25).collect();
        let dup = ds.subset(&idx).unwrap();
        // C halves so that λ = 1/(C·n) is unchanged when n doubles.
        let a = train_linear(ds.x().view(), ds.y(), 2.0, 100).unwrap();
        let b = train_linear(dup.x().view(), dup.y(), 1.0, 100).unwrap();
        for x in ds.rows() {
            assert_abs_diff_eq!(a.decision(x), b.decision(x), epsilon = 1e-4);
        }
    }

    #[test]
    fn linear_solution_satisfies_optimality_conditions() {
        // With margins m_i = y_i f(x_i), the optimum has dual weights a_i with
        // w = Σ a_i y_i x_i; a_i = 0 needs m_i ≥ 1, a_i = C needs m_i ≤ 1.
        // Checked through the primal: no coordinate direction lowers it.
        let ds = random_ds(40, 5, 9);
        for c in [0.01, 1.0, 100.0] {
            let tr = train_linear_traced(ds.x().view(), ds.y(), c, 5000).unwrap();
            let m = &tr.model;
            let lambda = 1.0 / (c * 40.0);
            let obj = |w: &[f64], b: f64| {
                let hinge: f64 = ds.rows().zip(ds.y()).map(|(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0)).sum();
                0.5 * lambda * (dot(w, w) + b * b) + hinge / 40.0
            };
            let base = obj(&m.weights, m.bias);
            assert_abs_diff_eq!(base, *tr.objective.last().unwrap(), epsilon = 1e-12);
            for j in 0..=5 {
                for h in [1e-3, -1e-3] {
                    let mut w = m.weights.clone();
                    let mut b = m.bias;
                    if j < 5 { w[j] += h } else { b += h }
                    assert!(obj(&w, b) >= base - 1e-7, "C={c} coordinate {j}");
                }
            }
        }
    }

    #[test]
    fn large_c_fits_a_separable_set() {
        let ds = random_ds(30, 2, 10);
        let y: Vec<f64> = ds.rows().map(|x| if x[0] + 0.5 * x[1] > 0.0 { 1.0 } else { -1.0 }).collect();
        let m = train_linear(ds.x().view(), &y, 1000.0, 1000).unwrap();
        let correct = ds.rows().zip(&y).filter(|(x, y)| m.decision(x) * **y > 0.0).count();
        assert_eq!(correct, 30);
    }

    #[test]
    fn features_delegate_to_kernel_value() {
        let ds = random_ds(20, 3, 2);
        let cfg = PbrffConfig { n_landmarks: 5, k_features: 8, beta: 1.0, epochs: 20, seed: 4, ..Default::default() };
        let model = fit_pbrff(&ds, &cfg).unwrap();
        let x = [0.3, -1.0, 0.2];
        let z = model.map_features(&x).unwrap();
        assert_eq!(z.len(), 5);
        for (zt, l) in z.iter().zip(&model.landmarks) {
            assert_abs_diff_eq!(*zt, kernel_value(&l.rff, &l.q, &l.point, &x).unwrap(), epsilon = 1e-15);
        }
        let at_landmark = model.map_features(&model.landmarks[2].point).unwrap();
        assert_abs_diff_eq!(at_landmark[2], 1.0, epsilon = 1e-12);
        assert!(model.map_features(&[0.0]).is_err());
    }

    #[test]
    fn cos_table_matches_model_features() {
        let ds = random_ds(18, 2, 8);
        let bank = LandmarkBank::sample(&ds, 3, 4, 1, 1.0).unwrap();
        let post = bank.posteriors(2.0).unwrap();
        let f = bank.cos_table(&ds).unwrap().features(&post).unwrap();
        let model = bank.model(post, LinearModel { weights: vec![0.0; 3], bias: 0.0 }).unwrap();
        for (i, x) in ds.rows().enumerate() {
            let z = model.map_features(x).unwrap();
            for t in 0..3 {
                assert_abs_diff_eq!(f[[i, t]], z[t], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn single_landmark_zero_beta_is_uniform_kernel() {
        let ds = random_ds(10, 2, 3);
        let cfg = PbrffConfig { n_landmarks: 1, k_features: 6, beta: 0.0, epochs: 10, ..Default::default() };
        let model = fit_pbrff(&ds, &cfg).unwrap();
        assert_eq!(model.n_landmarks(), 1);
        assert_eq!(model.landmarks[0].q, SimplexWeights::uniform(6));
        assert!(ds.rows().any(|x| x == model.landmarks[0].point.as_slice()));
    }

    #[test]
    fn bank_prefix_equals_smaller_sample() {
        let ds = random_ds(14, 3, 6);
        let big = LandmarkBank::sample(&ds, 9, 4, 21, 1.0).unwrap();
        let small = LandmarkBank::sample(&ds, 4, 4, 21, 1.0).unwrap();
        assert_eq!(big.prefix(4).unwrap(), small);
        assert!(big.prefix(10).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let ds = random_ds(16, 2, 9);
        let cfg = PbrffConfig { n_landmarks: 4, k_features: 5, epochs: 15, seed: 2, ..Default::default() };
        assert_eq!(fit_pbrff(&ds, &cfg).unwrap(), fit_pbrff(&ds, &cfg).unwrap());
    }

    proptest! {
        #[test]
        fn alignment_loss_is_bounded(seed in 0u64..500, j in 0usize..4) {
            let ds = random_ds(8, 2, seed);
            let rff = RffSet::sample(4, 2, seed).unwrap();
            let l = alignment_loss(j, &rff, (ds.row(0), ds.y()[0]), &ds, Some(0)).unwrap();
            prop_assert!((0.0..=1.0).contains(&l));
        }

        #[test]
        fn weights_reverse_loss_order(
            losses in prop::collection::vec(0.0f64..1.0, 2..12),
            beta in 0.01f64..100.0,
        ) {
            let q = compute_q_pbrff(&losses, beta, 50).unwrap();
            let s: f64 = q.as_slice().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            for a in 0..losses.len() {
                for b in 0..losses.len() {
                    if losses[a] < losses[b] {
                        prop_assert!(q.as_slice()[a] >= q.as_slice()[b]);
                    }
                }
            }
        }

        #[test]
        fn kl_is_non_negative_and_bound_finite(
            logits in prop::collection::vec(-5.0f64..5.0, 1..10),
            s in 0.1f64..50.0,
        ) {
            let q = SimplexWeights::softmax(&logits);
            let losses = vec![0.5; q.len()];
            prop_assert!(q.kl_to_uniform() >= 0.0);
            prop_assert!(pac_bayes_bound(&losses, &q, s, 0.05, 30).unwrap().is_finite());
        }
    }
}
