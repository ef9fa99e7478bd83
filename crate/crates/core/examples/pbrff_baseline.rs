//! The two-step baseline: landmark kernels with aligned feature weights,
//! followed by a linear SVM on the kernel features.

use gbrff::check::synthetic;
use gbrff::pbrff::{fit_pbrff, pac_bayes_bound, LandmarkBank, PbrffConfig};

fn main() -> gbrff::Result<()> {
    let train = synthetic(120, 3, 5)?;
    let test = synthetic(200, 3, 6)?;
    for beta in [0.0, 0.1, 10.0] {
        let cfg = PbrffConfig { n_landmarks: 20, beta, seed: 2, ..Default::default() };
        let model = fit_pbrff(&train, &cfg)?;
        println!("beta = {beta:>4}: test accuracy {:.3}", model.accuracy(&test)?);
    }

    let bank = LandmarkBank::sample(&train, 1, 100, 2, 1.0)?;
    let q = &bank.posteriors(1.0)?[0];
    let bound = pac_bayes_bound(&bank.losses[0], q, (train.n() as f64).sqrt(), 0.05, train.n())?;
    println!("alignment bound for the first landmark: {bound:.4}");
    Ok(())
}
