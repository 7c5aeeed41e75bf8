use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::csi::AmplitudeMatrix;

/// How an amplitude matrix becomes an SVM input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// Per-subcarrier mean followed by per-subcarrier standard deviation.
    #[default]
    MeanStd,
    /// Every element, row-major.
    Flatten,
}

/// Column means then column population standard deviations.
pub fn featurize(amp: &AmplitudeMatrix) -> Result<Vec<f64>, EvalError> {
    featurize_with(amp, FeatureMode::MeanStd)
}

pub fn featurize_with(amp: &AmplitudeMatrix, mode: FeatureMode) -> Result<Vec<f64>, EvalError> {
    let v = amp.values();
    if v.is_empty() {
        return Err(EvalError::Empty("featurize"));
    }
    let out: Vec<f64> = match mode {
        FeatureMode::MeanStd => {
            let mean = v.mean_axis(Axis(0)).expect("nonempty");
            let std = v.std_axis(Axis(0), 0.0);
            mean.iter().chain(std.iter()).copied().collect()
        }
        FeatureMode::Flatten => v.iter().copied().collect(),
    };
    if let Some(i) = out.iter().position(|x| !x.is_finite()) {
        return Err(EvalError::NonFiniteFeature(i));
    }
    Ok(out)
}
