//! Saving a trained model and loading it back.

use gbrff::boosting::{fit, GbrffConfig};
use gbrff::check::synthetic;
use gbrff::data::Standardizer;
use gbrff::model_io::{Model, ModelFile};

fn main() -> gbrff::Result<()> {
    let raw = synthetic(80, 3, 2)?;
    let standardizer = Standardizer::fit(&raw);
    let train = standardizer.apply(&raw)?;
    let ensemble = fit(&train, &GbrffConfig { t_rounds: 10, k_features: 16, ..Default::default() })?;

    let file = ModelFile { model: Model::Gbrff(ensemble), dim: raw.dim(), standardizer: Some(standardizer) };
    let path = std::env::temp_dir().join("gbrff-example-model.json");
    file.save(&path)?;
    let loaded = ModelFile::load(&path)?;
    assert_eq!(loaded, file);
    println!("{} written and reloaded; score of first row {:.6}", path.display(), loaded.predict_raw(raw.row(0))?);
    Ok(())
}
