//! Training a boosted kernel classifier and watching the training loss.

use gbrff::boosting::{fit_with_report, GbrffConfig};
use gbrff::check::synthetic;
use gbrff::data::{make_splits, SplitPlan};

fn main() -> gbrff::Result<()> {
    let ds = synthetic(300, 4, 1)?;
    let split = &make_splits(ds.n(), &SplitPlan { n_repeats: 1, ..Default::default() })?[0];
    let (train, test) = (ds.subset(&split.train)?, ds.subset(&split.test)?);

    let cfg = GbrffConfig { t_rounds: 50, c: 4.0, v: 0.5, seed: 3, ..Default::default() };
    let report = fit_with_report(&train, &cfg)?;
    for (t, mse) in report.train_mse.iter().enumerate().step_by(10) {
        println!("round {t:>3}: train MSE {mse:.4}");
    }
    println!("test accuracy {:.3}", report.ensemble.accuracy(&test)?);
    Ok(())
}
