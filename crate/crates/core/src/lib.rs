//! Cross-modal representation alignment at desk scale.
//!
//! A pair of modality autoencoders (a convolutional one for feature
//! matrices, a recurrent one for token sequences) is coordinated by a
//! latent mapping autoencoder, a group topology-preservation loss that
//! matches softmax-normalized similarity profiles across modalities, and
//! a sentiment alignment head. Everything runs on an f64 tape with
//! checkable gradients, and the experiment harness is deterministic end
//! to end.

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod model;
pub mod numcore;
pub(crate) mod par;
pub mod simkernel;
pub mod textmetric;

pub use error::{Error, Result};
