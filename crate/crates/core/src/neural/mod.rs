//! From-scratch fully connected protocol classifier with batch
//! normalization, dropout, softmax cross-entropy and Adam.

mod adam;
mod container;
mod gradcheck;
mod matrix;
mod model;
mod network;
mod train;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use container::{load_model, model_digest, save_model, FORMAT_VERSION, MAGIC};
pub use gradcheck::{
    gradient_check, gradient_check_with, relative_error, GradCheckReport, TensorCheck,
    RELATIVE_ERROR_FLOOR,
};
pub use matrix::{Matrix, Scalar};
pub use model::MlpModel;
pub use network::{
    softmax, softmax_cross_entropy, BatchNorm, Dense, DropoutMasks, ForwardCache, Grads, Layer,
    Network,
};
pub use train::{train, train_network, TrainHistory};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("train-mode batch needs at least 2 examples, got {0}")]
    BatchTooSmall(usize),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("model file version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { expected: u32, found: u32 },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("model file truncated")]
    TruncatedFile,
    #[error("not a model container: {0}")]
    BadFormat(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Network and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub n_classes: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Weight on the previous running statistic.
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl ModelConfig {
    pub const DEFAULT_DROPOUT: f64 = 0.5;
    pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;
    pub const DEFAULT_EPOCHS: usize = 200;
    pub const DEFAULT_BATCH_SIZE: usize = 24;

    /// Config with the default training regimen: dropout 0.5, learning rate
    /// 1e-4, 200 epochs, batch size 24.
    pub fn new(input_dim: usize, n_classes: usize) -> Self {
        Self {
            input_dim,
            n_classes,
            dropout_rate: Self::DEFAULT_DROPOUT,
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            epochs: Self::DEFAULT_EPOCHS,
            batch_size: Self::DEFAULT_BATCH_SIZE,
            seed: 0,
            bn_momentum: 0.9,
            bn_epsilon: 1e-5,
        }
    }

    pub fn hidden_widths(&self) -> [usize; 2] {
        [4 * self.n_classes, 2 * self.n_classes]
    }

    /// `[input_dim, 4n, 2n, n]`.
    pub fn layer_widths(&self) -> [usize; 4] {
        let [h1, h2] = self.hidden_widths();
        [self.input_dim, h1, h2, self.n_classes]
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |msg: &str| Err(NeuralError::InvalidConfig(msg.to_string()));
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if self.n_classes == 0 {
            return bad("n_classes must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) {
            return bad("bn_momentum must lie in (0, 1)");
        }
        if !(self.bn_epsilon > 0.0 && self.bn_epsilon.is_finite()) {
            return bad("bn_epsilon must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ModelConfig::new(10, 3);
        assert_eq!(c.hidden_widths(), [12, 6]);
        assert_eq!(c.layer_widths(), [10, 12, 6, 3]);
        assert_eq!(
            (c.dropout_rate, c.learning_rate, c.epochs, c.batch_size),
            (0.5, 1e-4, 200, 24)
        );
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        for c in [
            ModelConfig {
                batch_size: 0,
                ..ModelConfig::new(10, 3)
            },
            ModelConfig::new(0, 3),
            ModelConfig::new(10, 0),
            ModelConfig {
                dropout_rate: 1.0,
                ..ModelConfig::new(10, 3)
            },
            ModelConfig {
                learning_rate: 0.0,
                ..ModelConfig::new(10, 3)
            },
        ] {
            assert!(
                matches!(c.validate(), Err(NeuralError::InvalidConfig(_))),
                "{c:?}"
            );
        }
    }
}
