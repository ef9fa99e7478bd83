//! Numerical self-checks run by the `check` subcommand.
//!
//! Each check draws random instances from a fixed seed and compares a library
//! routine against an independent oracle: central finite differences for the
//! landmark gradient, bisection on the derivative for the step size, the
//! closed-form Gaussian kernel for the feature approximation, and ordering
//! and simplex properties for the posteriors.

use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::base_learner::{compute_q, landmark_gradient, landmark_loss, LandmarkObjective};
use crate::boosting::{self, GbrffConfig};
use crate::data::Dataset;
use crate::error::Result;
use crate::pbrff::compute_q_pbrff;
use crate::rff::{gaussian_kernel_exact, kernel_value, RffSet, SimplexWeights, SIMPLEX_TOLERANCE};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {} ({}; {:.2}s)", self.name, self.detail, self.seconds)
    }
}

fn timed(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn normal_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Analytic landmark gradient against central differences with step `h`.
/// Passes when every coordinate agrees to relative error `tol`.
pub fn gradient_check(instances: usize, h: f64, tol: f64, seed: u64) -> CheckOutcome {
    timed("landmark gradient vs finite differences", || {
        let mut rng = seed::rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            let n = rng.random_range(1..=50);
            let d = rng.random_range(1..=10);
            let k = rng.random_range(1..=20);
            let points = normal_matrix(&mut rng, n, d);
            let residuals = normal_vec(&mut rng, n);
            let rff = RffSet::from_omegas(normal_matrix(&mut rng, k, d), 0)?;
            let landmark = normal_vec(&mut rng, d);
            let grad = landmark_gradient(&rff, &residuals, points.view(), &landmark)?;
            for (i, &g) in grad.iter().enumerate() {
                let mut plus = landmark.clone();
                let mut minus = landmark.clone();
                plus[i] += h;
                minus[i] -= h;
                let fd = (landmark_loss(&rff, &residuals, points.view(), &plus)?
                    - landmark_loss(&rff, &residuals, points.view(), &minus)?)
                    / (2.0 * h);
                worst = worst.max(relative_error(g, fd));
            }
        }
        Ok((worst < tol, format!("max relative error {worst:.3e}")))
    })
}

/// `|a − b| / max(|a|, |b|)`, with 0 when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn sse(r: &[f64], h: &[f64], alpha: f64) -> f64 {
    r.iter().zip(h).map(|(r, h)| (r - alpha * h).powi(2)).sum()
}

/// Minimizer of `Σ (r − α h)²` by bisection on the sign of its derivative.
pub fn bisect_step(r: &[f64], h: &[f64]) -> f64 {
    let slope = |a: f64| -> f64 { r.iter().zip(h).map(|(r, h)| h * (a * h - r)).sum() };
    let hh: f64 = h.iter().map(|v| v * v).sum();
    let bound = r.iter().zip(h).map(|(r, h)| (r * h).abs()).sum::<f64>() / hh + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form step size against bisection, plus a ±`delta` perturbation test.
pub fn line_search_check(instances: usize, tol: f64, delta: f64, seed: u64) -> CheckOutcome {
    timed("step size vs bisection", || {
        let mut rng = seed::rng(seed);
        let mut worst: f64 = 0.0;
        let mut perturbation_ok = true;
        for _ in 0..instances {
            let n = rng.random_range(1..=100);
            let r = normal_vec(&mut rng, n);
            let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let alpha = boosting::optimal_step(&r, &h)?;
            worst = worst.max((alpha - bisect_step(&r, &h)).abs());
            let best = sse(&r, &h, alpha);
            perturbation_ok &= sse(&r, &h, alpha + delta) >= best && sse(&r, &h, alpha - delta) >= best;
        }
        Ok((
            worst <= tol && perturbation_ok,
            format!("max |α − α_bisect| {worst:.3e}, perturbations {}", if perturbation_ok { "ok" } else { "decreased loss" }),
        ))
    })
}

/// Training MSE never increases over `t_rounds` rounds.
pub fn monotone_loss_check(seeds: &[u64], shrinkages: &[f64], t_rounds: usize) -> CheckOutcome {
    timed("training loss is non-increasing", || {
        let mut worst_rise: f64 = 0.0;
        for &s in seeds {
            let ds = synthetic(100, 2, s)?;
            for &v in shrinkages {
                let cfg = GbrffConfig {
                    t_rounds,
                    v,
                    c: 1.0,
                    seed: s,
                    ..Default::default()
                };
                let report = boosting::fit_with_report(&ds, &cfg)?;
                for w in report.train_mse.windows(2) {
                    worst_rise = worst_rise.max(w[1] - w[0]);
                }
            }
        }
        Ok((worst_rise <= 0.0, format!("largest increase {worst_rise:.3e}")))
    })
}

/// Two overlapping Gaussian blobs with ±1 labels.
pub fn synthetic(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let mut x = normal_matrix(&mut rng, n, d);
    let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    for (mut row, label) in x.rows_mut().into_iter().zip(&y) {
        row += *label;
    }
    Dataset::new("synthetic", x, y)
}

/// Uniform-weight RFF kernel against the exact Gaussian kernel.
pub fn kernel_convergence_check(k: usize, shifts: usize, max_norm: f64, tol: f64, seed: u64) -> CheckOutcome {
    timed("RFF kernel vs exact Gaussian kernel", || {
        let mut rng = seed::rng(seed);
        let mut worst: f64 = 0.0;
        for s in 0..shifts {
            let d = rng.random_range(1..=5);
            let rff = RffSet::sample(k, d, seed::derive_seed(seed, s as u64))?;
            let direction = normal_vec(&mut rng, d);
            let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            let radius = rng.random_range(0.0..=max_norm);
            let delta: Vec<f64> = direction.iter().map(|v| v / norm * radius).collect();
            let approx = kernel_value(&rff, &SimplexWeights::uniform(k), &delta, &vec![0.0; d])?;
            worst = worst.max((approx - gaussian_kernel_exact(&delta)).abs());
        }
        Ok((worst <= tol, format!("max deviation {worst:.4}")))
    })
}

fn is_simplex(q: &[f64]) -> bool {
    q.iter().all(|&v| v >= 0.0) && (q.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE
}

/// Strictly smaller loss gets strictly larger weight, equal loss equal weight,
/// unless both weights have underflowed to zero.
fn reverse_ordered(losses: &[f64], q: &[f64]) -> bool {
    (0..losses.len()).all(|i| {
        (0..losses.len()).all(|j| {
            if losses[i] < losses[j] {
                q[i] > q[j] || (q[i] == 0.0 && q[j] == 0.0)
            } else if losses[i] == losses[j] {
                q[i] == q[j]
            } else {
                true
            }
        })
    })
}

/// Posterior contracts for both methods: zero temperature gives exactly
/// uniform weights, outputs are simplices, and weights reverse loss order.
pub fn posterior_check(instances: usize, seed: u64) -> CheckOutcome {
    timed("posterior contracts", || {
        let mut rng = seed::rng(seed);
        let mut failures = 0;
        for _ in 0..instances {
            let k = rng.random_range(1..=30);
            let n = rng.random_range(2..=60);

            let losses: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=1.0)).collect();
            let beta = 10f64.powf(rng.random_range(-3.0..=3.0));
            let q = compute_q_pbrff(&losses, beta, n)?;
            let uniform = compute_q_pbrff(&losses, 0.0, n)?;
            if !is_simplex(q.as_slice())
                || !reverse_ordered(&losses, q.as_slice())
                || uniform.as_slice().iter().any(|&v| v != 1.0 / k as f64)
            {
                failures += 1;
            }

            let d = rng.random_range(1..=6);
            let points = normal_matrix(&mut rng, n, d);
            let residuals = normal_vec(&mut rng, n);
            let rff = RffSet::from_omegas(normal_matrix(&mut rng, k, d), 0)?;
            let landmark = normal_vec(&mut rng, d);
            let c = 2f64.powi(rng.random_range(0..=10));
            let f = LandmarkObjective::new(&rff, &residuals, points.view())?.feature_losses(&landmark)?;
            let q = compute_q(&rff, &residuals, points.view(), &landmark, c)?;
            let uniform = compute_q(&rff, &residuals, points.view(), &landmark, 0.0)?;
            if !is_simplex(q.as_slice())
                || !reverse_ordered(&f, q.as_slice())
                || uniform.as_slice().iter().any(|&v| v != 1.0 / k as f64)
            {
                failures += 1;
            }
        }
        Ok((failures == 0, format!("{failures} of {} instances violated a contract", 2 * instances)))
    })
}

/// The checks behind the `check` subcommand, at their default sizes.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        gradient_check(50, 1e-5, 1e-5, seed),
        line_search_check(100, 1e-8, 1e-3, seed),
        monotone_loss_check(&[seed, seed + 1, seed + 2, seed + 3, seed + 4], &[1.0, 0.5, 0.1], 50),
        kernel_convergence_check(10_000, 20, 3.0, 0.05, seed),
        posterior_check(100, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_known_minimizer() {
        // Σ (r − α h)² with r = 2h has its minimum at α = 2
        let h = [0.5, -1.0, 0.25];
        let r: Vec<f64> = h.iter().map(|v| 2.0 * v).collect();
        assert!((bisect_step(&r, &h) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn relative_error_examples() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 0.5), 0.5);
        assert_eq!(relative_error(-2.0, 2.0), 2.0);
    }

    #[test]
    fn reverse_order_detects_violations() {
        assert!(reverse_ordered(&[0.1, 0.5, 0.1], &[0.4, 0.2, 0.4]));
        assert!(!reverse_ordered(&[0.1, 0.5], &[0.4, 0.6]));
        assert!(!reverse_ordered(&[0.1, 0.1], &[0.4, 0.6]));
    }

    #[test]
    fn small_checks_pass() {
        assert!(gradient_check(5, 1e-5, 1e-5, 1).passed);
        assert!(line_search_check(10, 1e-8, 1e-3, 1).passed);
        assert!(kernel_convergence_check(10_000, 3, 3.0, 0.05, 1).passed);
        assert!(posterior_check(10, 1).passed);
        assert!(monotone_loss_check(&[1], &[0.5], 5).passed);
    }

    #[test]
    fn broken_oracle_input_fails() {
        let out = kernel_convergence_check(1, 20, 3.0, 1e-9, 0);
        assert!(!out.passed);
        assert!(out.to_string().starts_with("FAIL"));
    }
}
