//! Approximating the Gaussian kernel with random Fourier features.

use gbrff::rff::{gaussian_kernel_exact, kernel_value, sample_rff, SimplexWeights};

fn main() -> gbrff::Result<()> {
    let landmark = [0.5, -1.0];
    let x = [1.5, -0.25];
    let delta: Vec<f64> = landmark.iter().zip(&x).map(|(a, b)| a - b).collect();
    println!("exact kernel: {:.4}", gaussian_kernel_exact(&delta));
    for k in [10, 100, 1_000, 10_000] {
        let rff = sample_rff(k, 2, 42)?;
        let approx = kernel_value(&rff, &SimplexWeights::uniform(k), &landmark, &x)?;
        println!("K = {k:>6}: {approx:.4}");
    }
    Ok(())
}
