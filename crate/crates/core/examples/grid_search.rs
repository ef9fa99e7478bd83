//! Choosing hyperparameters by 5-fold cross-validation.

use gbrff::bench::{grid_search_cv, Grids, Method, ModelSettings};
use gbrff::check::synthetic;

fn main() -> gbrff::Result<()> {
    let train = synthetic(90, 2, 4)?;
    let settings = ModelSettings { k_features: 20, ..Default::default() };
    for method in [Method::Gbrff, Method::Pbrff] {
        let (chosen, cv) = grid_search_cv(&train, method, &Grids::fast(), 10, &settings, 5, 0)?;
        let best = cv.scores[0].iter().cloned().fold(f64::MIN, f64::max);
        println!("{method}: {chosen} (validation accuracy {best:.3} over {} points)", cv.points.len());
    }
    Ok(())
}
