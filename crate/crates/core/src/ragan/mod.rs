//! Bi-LSTM relativistic-average GAN for spectrum restoration.

pub mod checkpoint;
pub mod grid;
pub mod loss;
pub mod model;
pub mod train;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{content_loss, loss_d_relativistic, loss_g_adversarial, loss_generator_total};
pub use model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, OutputHead};
pub use train::{history_csv, split_validation, train, EpochRecord, TrainConfig, TrainOutcome, Trainer};

use crate::csi::{normalize_minmax_lenient, AmplitudeMatrix, CsiError, ScaleRecord};
use crate::ingest::Acquisition;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum RaganError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Csi(#[from] CsiError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss { epoch: usize, step: usize, detail: String },
    #[error("checkpoint version {found} is not readable by version {expected}")]
    VersionMismatch { found: String, expected: String },
    #[error("corrupt checkpoint: {0}")]
    CorruptPayload(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("grid search: {0}")]
    Grid(String),
}

/// Restore one amplitude matrix already scaled to [0, 1].
pub fn denoise_amplitudes(gen: &Generator, amp: &AmplitudeMatrix) -> Result<AmplitudeMatrix, RaganError> {
    let (t, f) = amp.values().dim();
    let x = amp.values().as_standard_layout().into_owned().into_shape_with_order((1, t, f)).expect("standard layout");
    let y = gen.predict(&x)?;
    Ok(AmplitudeMatrix::new(y.into_shape_with_order((t, f)).expect("same size")))
}

/// Subcarrier selection, amplitude, min-max scaling, generator in eval
/// mode. The scale record allows mapping the output back to raw units.
pub fn denoise(gen: &Generator, acq: &Acquisition) -> Result<(AmplitudeMatrix, ScaleRecord), RaganError> {
    let (amp, scale) = normalize_minmax_lenient(&acq.data_amplitudes()?)?;
    Ok((denoise_amplitudes(gen, &amp)?, scale))
}
