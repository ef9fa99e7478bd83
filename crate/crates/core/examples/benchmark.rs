//! A small benchmark over two datasets with result files.

use std::path::Path;

use gbrff::bench::{emit_results, run_benchmark, summarize, ExperimentConfig, Grids, Method};
use gbrff::DatasetSpec;

fn main() -> gbrff::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/specs");
    let specs = ["wine.toml", "heart.toml"]
        .iter()
        .map(|f| DatasetSpec::from_file(dir.join(f)))
        .collect::<gbrff::Result<Vec<_>>>()?;

    let mut cfg = ExperimentConfig::sweep(specs, vec![5, 10]);
    cfg.methods = Method::ALL.to_vec();
    cfg.grids = Grids { c: vec![0.0, 32.0], v: vec![1.0], beta: vec![1.0], c_svm: vec![1.0, 100.0] };
    cfg.settings.k_features = 20;
    cfg.plan.n_repeats = 2;

    let out = run_benchmark(&cfg)?;
    for row in summarize(&out.records) {
        println!(
            "{:<6} {:<13} b = {:>2}: {:.3} ± {:.3}",
            row.dataset, row.method.name(), row.landmark_budget, row.mean_accuracy, row.std_accuracy
        );
    }
    let out_dir = std::env::temp_dir().join("gbrff-example-results");
    emit_results(&out, &out_dir)?;
    println!("result files in {}", out_dir.display());
    Ok(())
}
