//! Gradient boosting with learned random-Fourier-feature kernels.
//!
//! Each boosting round samples `K` Gaussian random Fourier features, learns a
//! landmark by gradient descent on the residuals, weights the features with a
//! closed-form pseudo-posterior and adds the resulting kernel predictor to the
//! ensemble with an exact line-search step. A two-step landmark baseline
//! ([`pbrff`]) and the benchmark harness ([`bench`]) live alongside.
//!
//! ```
//! use gbrff::{boosting::{fit, GbrffConfig}, data::Dataset};
//! use ndarray::array;
//!
//! let x = array![[-2.0, 0.0], [-1.5, 0.3], [1.5, -0.2], [2.0, 0.1]];
//! let train = Dataset::new("toy", x, vec![-1.0, -1.0, 1.0, 1.0]).unwrap();
//! let cfg = GbrffConfig { t_rounds: 5, k_features: 10, ..Default::default() };
//! let model = fit(&train, &cfg).unwrap();
//! assert_eq!(model.predict(&[1.8, 0.0]).unwrap(), 1.0);
//! ```

pub mod base_learner;
pub mod bench;
pub mod boosting;
pub mod check;
pub mod data;
pub mod error;
pub mod model_io;
pub mod pbrff;
pub mod rff;
pub mod seed;

pub use base_learner::{BaseLearner, LandmarkDescentConfig};
pub use boosting::{Ensemble, GbrffConfig, LandmarkMode};
pub use data::{Dataset, DatasetSpec, SplitPlan};
pub use error::{Error, Result};
pub use pbrff::{PbrffConfig, PbrffModel};
pub use rff::{RffSet, SimplexWeights};
