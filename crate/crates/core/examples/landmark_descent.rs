//! One boosting round by hand: pick the worst-fit point, move it downhill,
//! weight the features and compute the step size.

use gbrff::base_learner::{worst_fit_index, LandmarkDescentConfig, LandmarkObjective};
use gbrff::boosting::{init_h0, optimal_step, residuals};
use gbrff::rff::sample_rff;
use ndarray::array;

fn main() -> gbrff::Result<()> {
    let x = array![[-1.0, 0.2], [-0.4, -0.6], [0.3, 0.9], [1.1, 0.1], [0.8, -0.7]];
    let y = [-1.0, -1.0, 1.0, 1.0, 1.0];
    let h0 = init_h0(&y)?;
    let r = residuals(&y, &[h0; 5])?;

    let rff = sample_rff(20, 2, 7)?;
    let objective = LandmarkObjective::new(&rff, &r, x.view())?;
    let start = worst_fit_index(&r).expect("non-empty");
    let init = x.row(start).to_vec();
    let descent = objective.descend(&init, &LandmarkDescentConfig::default())?;
    println!(
        "landmark {:?} -> {:.3?}: loss {:.4} -> {:.4} in {} steps",
        init, descent.landmark, descent.initial_loss, descent.loss, descent.iterations
    );

    let q = objective.posterior(&descent.landmark, 8.0)?;
    let h = objective.base_outputs(&descent.landmark, &q)?;
    let alpha = optimal_step(&r, &h)?;
    println!("posterior KL to uniform {:.4}, step size {alpha:.4}", q.kl_to_uniform());
    Ok(())
}
