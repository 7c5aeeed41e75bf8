//! Downstream evaluation: spectral features, the RBF SVM classifier, the
//! denoising autoencoder baseline and reporting metrics.

pub mod ablation;
pub mod dae;
pub mod features;
pub mod metrics;
pub mod svm;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ablation::{run_ablation, ClassSet, ExperimentConfig, ExperimentOutcome, SvmSettings};
pub use dae::{dae_train, Dae, DaeConfig};
pub use features::{featurize, featurize_with, FeatureMode};
pub use metrics::{dataset_normalized_mse, normalized_mse, ClassMetrics, ConfusionMatrix, EvalReport};
pub use svm::{median_heuristic_gamma, svm_train, SvmConfig, SvmModel, DEFAULT_C};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("training data contains fewer than two classes")]
    SingleClass,
    #[error("feature vector {0} contains a non-finite value")]
    NonFiniteFeature(usize),
    #[error("all training features coincide; kernel width is undefined")]
    DegenerateFeatures,
    #[error("class index {0} is outside the label set")]
    UnknownClass(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io { path: path.to_path_buf(), source }
    }
}
