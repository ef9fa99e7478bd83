//! Loading a dataset from its spec, splitting and standardizing.

use std::path::Path;

use gbrff::data::{load_and_binarize, make_folds, make_splits, standardize, SplitPlan};
use gbrff::DatasetSpec;

fn main() -> gbrff::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/specs");
    for spec in DatasetSpec::load_dir(&dir)? {
        let ds = load_and_binarize(&spec)?;
        println!("{:<12} n = {:>5}  d = {:>3}  positives = {}", ds.name, ds.n(), ds.dim(), ds.positives());
    }

    let ds = load_and_binarize(&DatasetSpec::from_file(dir.join("wine.toml"))?)?;
    let plan = SplitPlan { seed: 1, ..Default::default() };
    let split = &make_splits(ds.n(), &plan)?[0];
    let (train, test) = standardize(&ds.subset(&split.train)?, &[ds.subset(&split.test)?])?;
    let folds = make_folds(&split.train, plan.fold_count, 9)?;
    println!(
        "wine: {} train / {} test rows, fold sizes {:?}",
        train.n(),
        test[0].n(),
        folds.iter().map(|f| f.val.len()).collect::<Vec<_>>()
    );
    Ok(())
}
