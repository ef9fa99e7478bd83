//! JSON model files.
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits, so a save/load round trip is exact. Frequency matrices are
//! stored row-major as `{k, d, seed, omegas}`. A file may carry the
//! [`Standardizer`] fitted on the training data; prediction then applies it
//! to raw inputs.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::base_learner::BaseLearner;
use crate::boosting::{Ensemble, Round};
use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::pbrff::{LandmarkKernel, LinearModel, PbrffModel};
use crate::rff::{RffSet, SimplexWeights};

pub const GBRFF_FORMAT: &str = "gbrff-model-v1";
pub const PBRFF_FORMAT: &str = "pbrff-model-v1";

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gbrff(Ensemble),
    Pbrff(PbrffModel),
}

impl Model {
    pub fn format(&self) -> &'static str {
        match self {
            Model::Gbrff(_) => GBRFF_FORMAT,
            Model::Pbrff(_) => PBRFF_FORMAT,
        }
    }

    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Gbrff(e) => e.predict_raw(x),
            Model::Pbrff(m) => m.predict_raw(x),
        }
    }
}

/// A model plus the preprocessing it was trained behind.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    /// Input dimension; needed for constant ensembles.
    pub dim: usize,
    pub standardizer: Option<Standardizer>,
}

impl ModelFile {
    /// Raw score of an unstandardized input.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        crate::error::check_dim("input point", self.dim, x.len())?;
        match &self.standardizer {
            Some(s) => self.model.predict_raw(&s.transform_row(ndarray::ArrayView1::from(x))),
            None => self.model.predict_raw(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = match &self.model {
            Model::Gbrff(e) => Repr::Gbrff {
                dim: self.dim,
                standardizer: self.standardizer.clone(),
                h0: e.h0,
                v: e.v,
                rounds: e
                    .rounds
                    .iter()
                    .map(|r| RoundRepr {
                        alpha: r.alpha,
                        landmark: r.learner.landmark().to_vec(),
                        rff: RffRepr::from(r.learner.rff()),
                        q: r.learner.q().as_slice().to_vec(),
                    })
                    .collect(),
            },
            Model::Pbrff(m) => Repr::Pbrff {
                dim: self.dim,
                standardizer: self.standardizer.clone(),
                landmarks: m
                    .landmarks
                    .iter()
                    .map(|l| LandmarkRepr {
                        point: l.point.clone(),
                        label: l.label,
                        rff: RffRepr::from(&l.rff),
                        q: l.q.as_slice().to_vec(),
                    })
                    .collect(),
                linear: m.linear.clone(),
            },
        };
        serde_json::to_string_pretty(&repr).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: Repr = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        let file = match repr {
            Repr::Gbrff {
                dim,
                standardizer,
                h0,
                v,
                rounds,
            } => {
                let rounds = rounds
                    .into_iter()
                    .map(|r| {
                        let learner = BaseLearner::new(r.landmark, r.rff.build()?, SimplexWeights::new(r.q)?)?;
                        Ok(Round { alpha: r.alpha, learner })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ModelFile {
                    model: Model::Gbrff(Ensemble { h0, v, rounds }),
                    dim,
                    standardizer,
                }
            }
            Repr::Pbrff {
                dim,
                standardizer,
                landmarks,
                linear,
            } => {
                let landmarks = landmarks
                    .into_iter()
                    .map(|l| {
                        let rff = l.rff.build()?;
                        crate::error::check_dim("landmark", rff.dim(), l.point.len())?;
                        Ok(LandmarkKernel {
                            point: l.point,
                            label: l.label,
                            q: SimplexWeights::new(l.q)?,
                            rff,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if landmarks.is_empty() {
                    return Err(Error::Model("PBRFF model without landmarks".into()));
                }
                crate::error::check_dim("linear weights", landmarks.len(), linear.weights.len())?;
                ModelFile {
                    model: Model::Pbrff(PbrffModel { landmarks, linear }),
                    dim,
                    standardizer,
                }
            }
        };
        file.check_dims()?;
        Ok(file)
    }

    fn check_dims(&self) -> Result<()> {
        let inner = match &self.model {
            Model::Gbrff(e) => e.dim(),
            Model::Pbrff(m) => Some(m.dim()),
        };
        if let Some(d) = inner {
            crate::error::check_dim("model dimension", self.dim, d)?;
        }
        if let Some(s) = &self.standardizer {
            crate::error::check_dim("standardizer", self.dim, s.mean.len())?;
            crate::error::check_dim("standardizer", self.dim, s.std.len())?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "format")]
enum Repr {
    #[serde(rename = "gbrff-model-v1")]
    Gbrff {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        standardizer: Option<Standardizer>,
        h0: f64,
        v: f64,
        rounds: Vec<RoundRepr>,
    },
    #[serde(rename = "pbrff-model-v1")]
    Pbrff {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        standardizer: Option<Standardizer>,
        landmarks: Vec<LandmarkRepr>,
        linear: LinearModel,
    },
}

#[derive(Serialize, Deserialize)]
struct RoundRepr {
    alpha: f64,
    landmark: Vec<f64>,
    rff: RffRepr,
    q: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LandmarkRepr {
    point: Vec<f64>,
    label: f64,
    rff: RffRepr,
    q: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RffRepr {
    k: usize,
    d: usize,
    seed: u64,
    /// Row-major `k × d`.
    omegas: Vec<f64>,
}

impl From<&RffSet> for RffRepr {
    fn from(rff: &RffSet) -> Self {
        Self {
            k: rff.k(),
            d: rff.dim(),
            seed: rff.seed(),
            omegas: rff.omega_slice().to_vec(),
        }
    }
}

impl RffRepr {
    fn build(self) -> Result<RffSet> {
        let m = Array2::from_shape_vec((self.k, self.d), self.omegas)
            .map_err(|e| Error::Model(format!("frequency matrix: {e}")))?;
        RffSet::from_omegas(m, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::{fit, GbrffConfig};
    use crate::data::Dataset;
    use crate::pbrff::{fit_pbrff, PbrffConfig};
    use proptest::prelude::*;

    fn toy(seed: u64) -> Dataset {
        let mut rng = crate::seed::rng(seed);
        let x = Array2::from_shape_simple_fn((24, 3), || rand::Rng::random_range(&mut rng, -2.0..2.0));
        let y = x.rows().into_iter().map(|r| if r[0] * r[1] > 0.0 { 1.0 } else { -1.0 }).collect();
        Dataset::new("toy", x, y).unwrap()
    }

    fn gbrff_file(seed: u64) -> ModelFile {
        let ds = toy(seed);
        let cfg = GbrffConfig { t_rounds: 4, k_features: 7, c: 2.0, v: 0.5, seed, ..Default::default() };
        ModelFile {
            model: Model::Gbrff(fit(&ds, &cfg).unwrap()),
            dim: 3,
            standardizer: Some(Standardizer::fit(&ds)),
        }
    }

    #[test]
    fn gbrff_round_trip_is_exact() {
        let file = gbrff_file(3);
        let text = file.to_json().unwrap();
        assert!(text.contains("\"format\": \"gbrff-model-v1\""));
        let back = ModelFile::from_json(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn pbrff_round_trip_is_exact() {
        let ds = toy(4);
        let cfg = PbrffConfig { n_landmarks: 5, k_features: 6, epochs: 20, seed: 4, ..Default::default() };
        let file = ModelFile { model: Model::Pbrff(fit_pbrff(&ds, &cfg).unwrap()), dim: 3, standardizer: None };
        let text = file.to_json().unwrap();
        assert!(text.contains("pbrff-model-v1"));
        assert_eq!(ModelFile::from_json(&text).unwrap(), file);
    }

    #[test]
    fn constant_ensemble_keeps_its_dimension() {
        let file = ModelFile {
            model: Model::Gbrff(Ensemble { h0: -0.25, v: 1.0, rounds: vec![] }),
            dim: 5,
            standardizer: None,
        };
        let back = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(back.dim, 5);
        assert_eq!(back.predict_raw(&[0.0; 5]).unwrap(), -0.25);
        assert!(back.predict_raw(&[0.0; 4]).is_err());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let text = gbrff_file(1).to_json().unwrap();
        assert!(ModelFile::from_json(&text.replace("gbrff-model-v1", "gbrff-model-v9")).is_err());
        assert!(ModelFile::from_json("{}").is_err());
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["rounds"][0]["q"][0] = serde_json::json!(5.0);
        assert!(ModelFile::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["dim"] = serde_json::json!(2);
        assert!(ModelFile::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let file = gbrff_file(2);
        file.save(&path).unwrap();
        assert_eq!(ModelFile::load(&path).unwrap(), file);
        assert!(matches!(ModelFile::load(&dir.path().join("missing.json")), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn arbitrary_floats_survive(h0 in any::<f64>().prop_filter("finite", |v| v.is_finite()),
                                    alpha in -1e300f64..1e300,
                                    w in prop::collection::vec(-1e6f64..1e6, 6),
                                    seed in any::<u64>()) {
            let rff = RffSet::from_omegas(Array2::from_shape_vec((3, 2), w).unwrap(), seed).unwrap();
            let learner = BaseLearner::new(vec![alpha.sin(), h0.cos()], rff, SimplexWeights::softmax(&[0.1, -3.0, 7.5])).unwrap();
            let file = ModelFile {
                model: Model::Gbrff(Ensemble { h0, v: 0.1, rounds: vec![Round { alpha, learner }] }),
                dim: 2,
                standardizer: None,
            };
            prop_assert_eq!(ModelFile::from_json(&file.to_json().unwrap()).unwrap(), file);
        }
    }
}
