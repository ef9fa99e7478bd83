//! One boosting round: landmark fitting and the feature pseudo-posterior.
//!
//! Given residuals `ỹ` and a fresh [`RffSet`], the landmark `x_t` minimizes
//!
//! ```text
//! f(x_t) = 1/n Σ_i ( ỹ_i − 1/K Σ_j cos(ω_j·(x_t − x_i)) )²
//! ```
//!
//! by gradient descent, and the feature weights are then
//! `Q_j ∝ exp(−c f_j(x_t))` where `f_j` is the same loss restricted to feature `j`.
//!
//! [`LandmarkObjective`] caches `cos(ω_j·x_i)` and `sin(ω_j·x_i)` for the
//! training points so that each evaluation only needs `K` new sines and
//! cosines: `cos(a − p) = cos a cos p + sin a sin p`.

use std::borrow::Cow;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::rff::{dot, weighted_cos, RffSet, SimplexWeights};

/// Gradient-descent settings for the landmark search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkDescentConfig {
    pub step_size: f64,
    pub max_iterations: usize,
    /// Stop once `‖∇f‖_∞` falls to this value.
    pub grad_tolerance: f64,
}

/// Maximum number of step halvings tried before the descent gives up.
pub const MAX_STEP_HALVINGS: usize = 10;

impl Default for LandmarkDescentConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_iterations: 100,
            grad_tolerance: 1e-6,
        }
    }
}

impl LandmarkDescentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(invalid(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if self.grad_tolerance.is_nan() || self.grad_tolerance < 0.0 {
            return Err(invalid("gradient tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// `h(x) = Σ_j q_j cos(ω_j · (landmark − x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseLearner {
    landmark: Vec<f64>,
    rff: RffSet,
    q: SimplexWeights,
}

impl BaseLearner {
    pub fn new(landmark: Vec<f64>, rff: RffSet, q: SimplexWeights) -> Result<Self> {
        check_dim("simplex weights", rff.k(), q.len())?;
        check_dim("landmark", rff.dim(), landmark.len())?;
        if landmark.iter().any(|v| !v.is_finite()) {
            return Err(invalid("landmark has non-finite coordinates"));
        }
        Ok(Self { landmark, rff, q })
    }

    pub fn landmark(&self) -> &[f64] {
        &self.landmark
    }

    pub fn rff(&self) -> &RffSet {
        &self.rff
    }

    pub fn q(&self) -> &SimplexWeights {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.landmark.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim("input point", self.dim(), x.len())?;
        Ok(weighted_cos(&self.rff, self.q.as_slice(), &self.landmark, x))
    }
}

pub fn predict_base(learner: &BaseLearner, x: &[f64]) -> Result<f64> {
    learner.predict(x)
}

/// `cos(ω_j · x_i)` and `sin(ω_j · x_i)` for a fixed point set. Row `i`
/// holds `[cos p_i0, sin p_i0, cos p_i1, sin p_i1, …]` with `p_ij = ω_j · x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    table: Vec<f64>,
    n: usize,
    k: usize,
}

impl Projections {
    pub fn new(rff: &RffSet, points: ArrayView2<'_, f64>) -> Result<Self> {
        let (n, d) = points.dim();
        check_dim("point dimension", rff.dim(), d)?;
        let k = rff.k();
        // n × K matrix of ω_j · x_i
        let phase = points.dot(&rff.omegas().t());
        let mut table = Vec::with_capacity(2 * n * k);
        for p in phase.iter() {
            let (s, c) = p.sin_cos();
            table.push(c);
            table.push(s);
        }
        Ok(Self { table, n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Interleaved `(cos, sin)` row of point `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.table[2 * self.k * i..2 * self.k * (i + 1)]
    }

    fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.table.chunks_exact(2 * self.k)
    }
}

/// Residual-fitting objective for one round, with the training-point
/// projections precomputed.
#[derive(Debug, Clone)]
pub struct LandmarkObjective<'a> {
    rff: &'a RffSet,
    residuals: &'a [f64],
    proj: Cow<'a, Projections>,
}

/// Result of [`LandmarkObjective::descend`].
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkDescent {
    pub landmark: Vec<f64>,
    pub initial_loss: f64,
    pub loss: f64,
    /// Accepted updates.
    pub iterations: usize,
    /// Step size in effect when the descent stopped.
    pub step_size: f64,
}

impl<'a> LandmarkObjective<'a> {
    pub fn new(rff: &'a RffSet, residuals: &'a [f64], points: ArrayView2<'_, f64>) -> Result<Self> {
        let proj = Projections::new(rff, points)?;
        Self::build(rff, residuals, Cow::Owned(proj))
    }

    /// Reuses projections computed for the same `rff` and point set.
    pub fn with_projections(rff: &'a RffSet, residuals: &'a [f64], proj: &'a Projections) -> Result<Self> {
        Self::build(rff, residuals, Cow::Borrowed(proj))
    }

    fn build(rff: &'a RffSet, residuals: &'a [f64], proj: Cow<'a, Projections>) -> Result<Self> {
        if proj.n() == 0 {
            return Err(invalid("landmark objective needs at least one point"));
        }
        check_dim("residuals", proj.n(), residuals.len())?;
        check_dim("projection width", rff.k(), proj.k())?;
        Ok(Self { rff, residuals, proj })
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    fn k(&self) -> usize {
        self.rff.k()
    }

    /// Interleaved `(cos a_j, sin a_j)` with `a_j = ω_j · landmark`.
    fn phases(&self, landmark: &[f64]) -> Result<Vec<f64>> {
        check_dim("landmark", self.rff.dim(), landmark.len())?;
        let mut out = Vec::with_capacity(2 * self.k());
        for a in self.rff.project(landmark) {
            let (s, c) = a.sin_cos();
            out.push(c);
            out.push(s);
        }
        Ok(out)
    }

    /// `f(landmark)` with uniform feature weights.
    pub fn loss(&self, landmark: &[f64]) -> Result<f64> {
        let phase = self.phases(landmark)?;
        let inv_k = 1.0 / self.k() as f64;
        let total: f64 = self
            .proj
            .rows()
            .zip(self.residuals)
            .map(|(row, &r)| {
                // cos(a − p) = cos a cos p + sin a sin p
                let e = r - inv_k * dot(row, &phase);
                e * e
            })
            .sum();
        Ok(total / self.n() as f64)
    }

    /// `f(landmark)` and its gradient with respect to the landmark.
    pub fn loss_and_gradient(&self, landmark: &[f64]) -> Result<(f64, Vec<f64>)> {
        let phase = self.phases(landmark)?;
        let k = self.k();
        let inv_k = 1.0 / k as f64;
        // uw[2j] = Σ_i e_i cos p_ij, uw[2j+1] = Σ_i e_i sin p_ij
        let mut uw = vec![0.0; 2 * k];
        let mut total = 0.0;
        for (row, &r) in self.proj.rows().zip(self.residuals) {
            let e = r - inv_k * dot(row, &phase);
            total += e * e;
            for (a, b) in uw.iter_mut().zip(row) {
                *a += e * b;
            }
        }
        let n = self.n() as f64;
        let d = self.rff.dim();
        let scale = 2.0 / (n * k as f64);
        let mut grad = vec![0.0; d];
        // Σ_i e_i sin(a_j − p_ij) = sin a_j u_j − cos a_j w_j
        for ((omega, ph), u) in self
            .rff
            .omega_slice()
            .chunks_exact(d)
            .zip(phase.chunks_exact(2))
            .zip(uw.chunks_exact(2))
        {
            let s = scale * (ph[1] * u[0] - ph[0] * u[1]);
            for (g, o) in grad.iter_mut().zip(omega) {
                *g += s * o;
            }
        }
        Ok((total / n, grad))
    }

    /// Per-feature losses `f_j(landmark) = 1/n Σ_i (ỹ_i − cos(ω_j·(landmark − x_i)))²`.
    pub fn feature_losses(&self, landmark: &[f64]) -> Result<Vec<f64>> {
        let phase = self.phases(landmark)?;
        let mut acc = vec![0.0; self.k()];
        for (row, &r) in self.proj.rows().zip(self.residuals) {
            for (a, (p, ph)) in acc.iter_mut().zip(row.chunks_exact(2).zip(phase.chunks_exact(2))) {
                let e = r - (ph[0] * p[0] + ph[1] * p[1]);
                *a += e * e;
            }
        }
        let n = self.n() as f64;
        acc.iter_mut().for_each(|v| *v /= n);
        Ok(acc)
    }

    /// Pseudo-posterior `Q_j ∝ exp(−c f_j(landmark))`.
    pub fn posterior(&self, landmark: &[f64], c: f64) -> Result<SimplexWeights> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid(format!("c must be finite and non-negative, got {c}")));
        }
        if c == 0.0 {
            check_dim("landmark", self.rff.dim(), landmark.len())?;
            return Ok(SimplexWeights::uniform(self.k()));
        }
        let logits: Vec<f64> = self
            .feature_losses(landmark)?
            .into_iter()
            .map(|f| -c * f)
            .collect();
        Ok(SimplexWeights::softmax(&logits))
    }

    /// `h(x_i)` for every training point.
    pub fn base_outputs(&self, landmark: &[f64], q: &SimplexWeights) -> Result<Vec<f64>> {
        check_dim("simplex weights", self.k(), q.len())?;
        let mut phase = self.phases(landmark)?;
        for (ph, qj) in phase.chunks_exact_mut(2).zip(q.as_slice()) {
            ph[0] *= qj;
            ph[1] *= qj;
        }
        Ok(self.proj.rows().map(|row| dot(row, &phase)).collect())
    }

    /// Fixed-step gradient descent from `init`. A step that would increase
    /// the loss is halved, up to [`MAX_STEP_HALVINGS`] times, and the reduced
    /// step is kept for later iterations. The returned loss never exceeds the
    /// initial one.
    pub fn descend(&self, init: &[f64], cfg: &LandmarkDescentConfig) -> Result<LandmarkDescent> {
        cfg.validate()?;
        let mut x = init.to_vec();
        let (mut loss, mut grad) = self.loss_and_gradient(&x)?;
        let initial_loss = loss;
        let mut step = cfg.step_size;
        let mut iterations = 0;
        let mut candidate = vec![0.0; x.len()];
        while iterations < cfg.max_iterations {
            let grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if grad_inf <= cfg.grad_tolerance {
                break;
            }
            let mut accepted = None;
            for _ in 0..=MAX_STEP_HALVINGS {
                for ((c, xi), g) in candidate.iter_mut().zip(&x).zip(&grad) {
                    *c = xi - step * g;
                }
                let (cand_loss, cand_grad) = self.loss_and_gradient(&candidate)?;
                if cand_loss <= loss {
                    accepted = Some((cand_loss, cand_grad));
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                Some((l, g)) => {
                    std::mem::swap(&mut x, &mut candidate);
                    loss = l;
                    grad = g;
                    iterations += 1;
                }
                None => break,
            }
        }
        Ok(LandmarkDescent {
            landmark: x,
            initial_loss,
            loss,
            iterations,
            step_size: step,
        })
    }
}

pub fn landmark_loss(
    rff: &RffSet,
    residuals: &[f64],
    points: ArrayView2<'_, f64>,
    landmark: &[f64],
) -> Result<f64> {
    LandmarkObjective::new(rff, residuals, points)?.loss(landmark)
}

pub fn landmark_gradient(
    rff: &RffSet,
    residuals: &[f64],
    points: ArrayView2<'_, f64>,
    landmark: &[f64],
) -> Result<Vec<f64>> {
    Ok(LandmarkObjective::new(rff, residuals, points)?
        .loss_and_gradient(landmark)?
        .1)
}

pub fn optimize_landmark(
    rff: &RffSet,
    residuals: &[f64],
    points: ArrayView2<'_, f64>,
    init: &[f64],
    cfg: &LandmarkDescentConfig,
) -> Result<Vec<f64>> {
    Ok(LandmarkObjective::new(rff, residuals, points)?
        .descend(init, cfg)?
        .landmark)
}

/// Feature pseudo-posterior for a fitted landmark.
pub fn compute_q(
    rff: &RffSet,
    residuals: &[f64],
    points: ArrayView2<'_, f64>,
    landmark: &[f64],
    c: f64,
) -> Result<SimplexWeights> {
    LandmarkObjective::new(rff, residuals, points)?.posterior(landmark, c)
}

/// Index of the largest absolute residual, lowest index on ties.
pub fn worst_fit_index(residuals: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in residuals.iter().enumerate() {
        let a = r.abs();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    best.map(|(i, _)| i)
}
