//! Random Fourier features for the Gaussian kernel.
//!
//! The Gaussian kernel `k(δ) = exp(-‖δ‖²/2)` is the expectation of
//! `cos(ω·δ)` under `ω ~ N(0, I)`. An [`RffSet`] holds `K` such draws and a
//! [`SimplexWeights`] vector reweights them into a learned kernel.

use ndarray::{Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::seed;

/// Tolerance on `Σ q_j = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// `K` frequency vectors stored as the rows of a `K × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RffSet {
    omegas: Array2<f64>,
    seed: u64,
}

impl RffSet {
    /// Draws `k` standard-normal frequency vectors of dimension `dim`.
    pub fn sample(k: usize, dim: usize, seed: u64) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(invalid(format!(
                "feature count and dimension must be positive (got K={k}, d={dim})"
            )));
        }
        let mut rng = seed::rng(seed);
        let omegas = Array2::from_shape_simple_fn((k, dim), || StandardNormal.sample(&mut rng));
        Ok(Self { omegas, seed })
    }

    pub fn from_omegas(omegas: Array2<f64>, seed: u64) -> Result<Self> {
        let (k, d) = omegas.dim();
        if k == 0 || d == 0 {
            return Err(invalid(format!("empty frequency matrix ({k}×{d})")));
        }
        if omegas.iter().any(|w| !w.is_finite()) {
            return Err(invalid("frequency matrix has non-finite entries"));
        }
        Ok(Self {
            omegas: omegas.as_standard_layout().into_owned(),
            seed,
        })
    }

    /// Rescales the frequencies to the Gaussian kernel of width `bandwidth`,
    /// `exp(-‖δ‖² / (2 σ²))`. A bandwidth of 1 leaves the set unchanged.
    pub fn with_bandwidth(mut self, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if bandwidth != 1.0 {
            self.omegas.mapv_inplace(|w| w / bandwidth);
        }
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.omegas.nrows()
    }

    pub fn dim(&self) -> usize {
        self.omegas.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn omegas(&self) -> &Array2<f64> {
        &self.omegas
    }

    /// Row-major `K × d` view of the frequencies.
    pub fn omega_slice(&self) -> &[f64] {
        self.omegas
            .as_slice()
            .expect("frequency matrix is kept in standard layout")
    }

    pub fn omega(&self, j: usize) -> ArrayView1<'_, f64> {
        self.omegas.row(j)
    }

    /// `ω_j · v` for every feature `j`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.omega_slice()
            .chunks_exact(self.dim())
            .map(|w| dot(w, v))
            .collect()
    }
}

/// Width `σ` of the Gaussian kernel `exp(-‖δ‖² / (2σ²))`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// `σ = √(d/2)`, i.e. `exp(-‖δ‖²/d)`: the kernel sees the mean squared
    /// per-feature difference, so its scale does not shrink as `d` grows.
    #[default]
    Dimension,
}

impl Bandwidth {
    pub fn resolve(self, dim: usize) -> f64 {
        match self {
            Bandwidth::Fixed(s) => s,
            Bandwidth::Dimension => (dim as f64 / 2.0).sqrt(),
        }
    }
}

/// Same as [`RffSet::sample`].
pub fn sample_rff(k_count: usize, dim: usize, seed: u64) -> Result<RffSet> {
    RffSet::sample(k_count, dim, seed)
}

/// A probability vector over the `K` features of an [`RffSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(invalid("simplex weights must be non-empty"));
        }
        if let Some(bad) = q.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(format!("simplex weight {bad} is negative or non-finite")));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(invalid(format!("simplex weights sum to {total}, not 1")));
        }
        Ok(Self(q))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform weights need at least one feature");
        Self(vec![1.0 / k as f64; k])
    }

    /// Normalized exponential of `logits`, shifted by the maximum before
    /// exponentiation. Falls back to uniform when the logits carry no usable
    /// mass (non-finite maximum).
    pub fn softmax(logits: &[f64]) -> Self {
        assert!(!logits.is_empty(), "softmax of an empty vector");
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Self::uniform(logits.len());
        }
        let mut q: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = q.iter().sum();
        if !(z.is_finite() && z > 0.0) {
            return Self::uniform(logits.len());
        }
        q.iter_mut().for_each(|v| *v /= z);
        Self(q)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `KL(q ‖ uniform) = Σ q_j ln(K q_j)`, with `0 ln 0 = 0`.
    pub fn kl_to_uniform(&self) -> f64 {
        let k = self.0.len() as f64;
        let kl: f64 = self
            .0
            .iter()
            .filter(|&&q| q > 0.0)
            .map(|&q| q * (k * q).ln())
            .sum();
        kl.max(0.0)
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = crate::Error;

    fn try_from(q: Vec<f64>) -> Result<Self> {
        Self::new(q)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

/// `Σ_j q_j cos(ω_j · (landmark − x))`.
pub fn kernel_value(
    rff: &RffSet,
    weights: &SimplexWeights,
    landmark: &[f64],
    x: &[f64],
) -> Result<f64> {
    check_dim("simplex weights", rff.k(), weights.len())?;
    check_dim("landmark", rff.dim(), landmark.len())?;
    check_dim("input point", rff.dim(), x.len())?;
    Ok(weighted_cos(rff, weights.as_slice(), landmark, x))
}

/// Unchecked body of [`kernel_value`].
pub(crate) fn weighted_cos(rff: &RffSet, q: &[f64], landmark: &[f64], x: &[f64]) -> f64 {
    let delta: Vec<f64> = landmark.iter().zip(x).map(|(l, v)| l - v).collect();
    let value: f64 = rff
        .omega_slice()
        .chunks_exact(rff.dim())
        .zip(q)
        .map(|(w, &qj)| qj * dot(w, &delta).cos())
        .sum();
    value.clamp(-1.0, 1.0)
}

/// `exp(-‖δ‖²/2)`, the kernel whose Fourier transform is `N(0, I)`.
pub fn gaussian_kernel_exact(delta: &[f64]) -> f64 {
    (-0.5 * dot(delta, delta)).exp()
}

/// Dot product with eight independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dimension_bandwidth_examples() {
        assert_eq!(Bandwidth::Dimension.resolve(2), 1.0);
        assert_eq!(Bandwidth::Dimension.resolve(8), 2.0);
        assert_eq!(Bandwidth::Fixed(0.5).resolve(8), 0.5);
        // exp(-‖δ‖²/d) at δ = (1, 1): e^{-1}
        let rff = RffSet::sample(20_000, 2, 3).unwrap().with_bandwidth(Bandwidth::Dimension.resolve(2)).unwrap();
        let k = kernel_value(&rff, &SimplexWeights::uniform(20_000), &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((k - (-1f64).exp()).abs() < 0.03);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_rff(2, 3, 7).unwrap();
        let b = sample_rff(2, 3, 7).unwrap();
        assert_eq!(a.omegas(), b.omegas());
        assert_ne!(a.omegas(), sample_rff(2, 3, 8).unwrap().omegas());
    }

    #[test]
    fn zero_sizes_are_rejected() {
        assert!(sample_rff(0, 3, 0).is_err());
        assert!(sample_rff(3, 0, 0).is_err());
    }

    #[test]
    fn standard_normal_moments() {
        let rff = sample_rff(10_000, 1, 0).unwrap();
        let col = rff.omegas().column(0);
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let var = col.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn kernel_is_one_at_landmark() {
        let rff = sample_rff(16, 4, 1).unwrap();
        let q = SimplexWeights::softmax(&(0..16).map(|j| j as f64 * 0.3).collect::<Vec<_>>());
        let x = [0.3, -1.0, 2.0, 0.5];
        assert_abs_diff_eq!(kernel_value(&rff, &q, &x, &x).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn one_hot_weights_select_a_single_cosine() {
        let rff = sample_rff(5, 2, 3).unwrap();
        let mut q = vec![0.0; 5];
        q[2] = 1.0;
        let q = SimplexWeights::new(q).unwrap();
        let (l, x) = ([0.4, 1.1], [-0.2, 0.7]);
        let w = rff.omega(2);
        let expected = (w[0] * (l[0] - x[0]) + w[1] * (l[1] - x[1])).cos();
        assert_abs_diff_eq!(kernel_value(&rff, &q, &l, &x).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn monte_carlo_matches_gaussian_at_unit_shift() {
        let rff = sample_rff(10_000, 1, 11).unwrap();
        let q = SimplexWeights::uniform(10_000);
        let v = kernel_value(&rff, &q, &[1.0], &[0.0]).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 0.05, "{v}");
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let rff = sample_rff(3, 2, 0).unwrap();
        let q = SimplexWeights::uniform(3);
        assert!(kernel_value(&rff, &q, &[0.0, 0.0], &[0.0]).is_err());
        assert!(kernel_value(&rff, &SimplexWeights::uniform(4), &[0.0; 2], &[0.0; 2]).is_err());
    }

    #[test]
    fn exact_kernel_values() {
        assert_eq!(gaussian_kernel_exact(&[0.0, 0.0]), 1.0);
        assert_abs_diff_eq!(gaussian_kernel_exact(&[1.0, 1.0]), (-1.0f64).exp(), epsilon = 1e-15);
        let mut last = 1.0;
        for r in 1..20 {
            let v = gaussian_kernel_exact(&[r as f64 * 0.5]);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn bandwidth_scales_frequencies() {
        let base = sample_rff(4, 2, 5).unwrap();
        let wide = base.clone().with_bandwidth(2.0).unwrap();
        assert_abs_diff_eq!(wide.omegas()[[1, 1]] * 2.0, base.omegas()[[1, 1]], epsilon = 1e-15);
        assert!(base.with_bandwidth(0.0).is_err());
    }

    #[test]
    fn simplex_validation() {
        assert!(SimplexWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexWeights::new(vec![0.6, 0.5]).is_err());
        assert!(SimplexWeights::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexWeights::new(vec![]).is_err());
        assert_eq!(SimplexWeights::softmax(&[f64::NEG_INFINITY; 3]), SimplexWeights::uniform(3));
    }

    #[test]
    fn kl_of_one_hot_is_log_k() {
        let q = SimplexWeights::new(vec![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(q.kl_to_uniform(), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(SimplexWeights::uniform(7).kl_to_uniform(), 0.0);
    }

    proptest! {
        #[test]
        fn kernel_is_bounded_and_shift_invariant(
            seed in any::<u64>(),
            logits in proptest::collection::vec(-5.0f64..5.0, 6),
            l in proptest::collection::vec(-3.0f64..3.0, 3),
            x in proptest::collection::vec(-3.0f64..3.0, 3),
            shift in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let rff = sample_rff(6, 3, seed).unwrap();
            let q = SimplexWeights::softmax(&logits);
            let v = kernel_value(&rff, &q, &l, &x).unwrap();
            prop_assert!((-1.0..=1.0).contains(&v));
            let ls: Vec<f64> = l.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let xs: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let vs = kernel_value(&rff, &q, &ls, &xs).unwrap();
            prop_assert!((v - vs).abs() < 1e-12);
        }

        #[test]
        fn softmax_is_a_simplex(logits in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
            let q = SimplexWeights::softmax(&logits);
            prop_assert!(SimplexWeights::new(q.as_slice().to_vec()).is_ok());
        }
    }
}
