//! Encoders, decoders, the latent mapping autoencoder, the sentiment
//! head, and the momentum reference queue.

mod bundle;
mod queue;
mod serialize;

pub use bundle::ModelBundle;
pub use queue::{MomentumQueue, QueueEntry};
pub use serialize::{load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use crate::numcore::Matrix;

/// Shapes of the desk-scale architecture. All knobs are runtime values so
/// sweeps and mini gradcheck instances can shrink the network.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    /// Feature matrix rows (frequency-like axis).
    pub feature_bins: usize,
    /// Channels of the two hidden convolution layers.
    pub conv_hidden: usize,
    /// Convolution kernel width (odd; stride 1, zero "same" padding).
    pub kernel: usize,
    /// Latent width d.
    pub latent_dim: usize,
    /// Latent segments S; the pooled representation is S×d.
    pub segments: usize,
    /// Token embedding width.
    pub embed_dim: usize,
    /// Recurrent decoder state width.
    pub dec_hidden: usize,
    /// Latent-context width concatenated to each decoder input.
    pub ctx_dim: usize,
    /// Hidden width of the sentiment head.
    pub sent_hidden: usize,
    /// Vocabulary size including the 4 reserved ids.
    pub vocab_size: usize,
    /// Positional-table rows for the text encoder.
    pub max_positions: usize,
    /// Number of sentiment classes.
    pub classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_bins: 32,
            conv_hidden: 16,
            kernel: 3,
            latent_dim: 64,
            segments: 4,
            embed_dim: 32,
            dec_hidden: 48,
            ctx_dim: 16,
            sent_hidden: 24,
            vocab_size: 4,
            max_positions: 64,
            classes: 7,
        }
    }
}

impl ModelConfig {
    /// Flattened latent length S·d.
    pub fn latent_flat(&self) -> usize {
        self.segments * self.latent_dim
    }

    /// Tiny shapes for gradient-check instances.
    pub fn mini(vocab_size: usize) -> Self {
        ModelConfig {
            feature_bins: 6,
            conv_hidden: 4,
            kernel: 3,
            latent_dim: 5,
            segments: 2,
            embed_dim: 4,
            dec_hidden: 5,
            ctx_dim: 3,
            sent_hidden: 4,
            vocab_size,
            max_positions: 16,
            classes: 7,
        }
    }
}

/// Fixed-size pooled representation: S segments of d dims, row-major.
/// `flatten()` is the canonical vector form used for similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentRep {
    pub segments: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl LatentRep {
    pub fn from_matrix(m: &Matrix) -> Self {
        LatentRep { segments: m.rows, dim: m.cols, values: m.data.clone() }
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.segments, self.dim, self.values.clone())
    }

    pub fn flatten(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The direction of the latent mapping autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    /// Text latent → source latent (the alignment-loss direction).
    TextToSource,
    /// Source latent → text latent (the generation direction).
    SourceToText,
}
