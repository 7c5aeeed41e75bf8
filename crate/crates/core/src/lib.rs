//! Restoration of Wi-Fi CSI amplitude spectra captured in cluttered
//! environments to their shielded-equivalent form.
//!
//! The crate is organised bottom-up:
//!
//! * [`csi`]: CFR estimation, amplitudes, subcarrier selection, scaling.
//! * [`ingest`]: capture parsing, dataset manifests, shielded/unshielded pairing.
//! * [`sim`]: seeded synthetic dataset generator.
//! * [`nn`]: layers with hand-written backward passes and AdamW.
//! * [`ragan`]: the Bi-LSTM generator/discriminator, losses, training,
//!   grid search and checkpoints.
//! * [`eval`]: features, RBF SVM, denoising autoencoder baseline, metrics.

pub mod csi;
pub mod eval;
pub mod ingest;
pub mod nn;
pub mod ragan;
pub mod sim;

use thiserror::Error;

/// Any error produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Csi(#[from] csi::CsiError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Nn(#[from] nn::NnError),
    #[error(transparent)]
    Ragan(#[from] ragan::RaganError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
}
