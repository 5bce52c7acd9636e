use rayon::prelude::*;

use super::matrix::Matrix;
use super::network::Network;
use super::{ModelConfig, NeuralError};
use crate::corpus::{EncodeReport, FeatureVector, Normalizer, Vocabulary};
use crate::protocols::Level;

/// A trained classifier together with everything needed to run it on raw
/// order text: vocabulary, stopwords, and the ordered label list (output `i`
/// scores `labels[i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: ModelConfig,
    pub network: Network<f32>,
    pub vocabulary: Vocabulary,
    pub labels: Vec<String>,
    pub level: Level,
    /// `None` means the embedded English list.
    pub custom_stopwords: Option<Vec<String>>,
}

const INFER_CHUNK: usize = 256;

impl MlpModel {
    pub fn new(
        config: ModelConfig,
        network: Network<f32>,
        vocabulary: Vocabulary,
        labels: Vec<String>,
        level: Level,
    ) -> Result<Self, NeuralError> {
        let model = Self {
            config,
            network,
            vocabulary,
            labels,
            level,
            custom_stopwords: None,
        };
        model.check_shapes()?;
        Ok(model)
    }

    /// Assert the shape chain `input → 4n → 2n → n` and that the vocabulary
    /// and label list agree with it.
    pub fn check_shapes(&self) -> Result<(), NeuralError> {
        self.config.validate()?;
        let widths = self.config.layer_widths();
        if self.network.layers.len() != 3 {
            return Err(NeuralError::ShapeMismatch {
                what: "layer count",
                expected: 3,
                found: self.network.layers.len(),
            });
        }
        for (i, layer) in self.network.layers.iter().enumerate() {
            let d = &layer.dense;
            if d.in_dim != widths[i] || d.out_dim != widths[i + 1] {
                return Err(NeuralError::ShapeMismatch {
                    what: "layer width",
                    expected: widths[i + 1],
                    found: d.out_dim,
                });
            }
            if d.weights.len() != d.in_dim * d.out_dim || d.bias.len() != d.out_dim {
                return Err(NeuralError::ShapeMismatch {
                    what: "dense tensor",
                    expected: d.in_dim * d.out_dim,
                    found: d.weights.len(),
                });
            }
            if (i < 2) != layer.norm.is_some() {
                return Err(NeuralError::BadFormat(
                    "batch-norm must follow exactly the hidden layers".into(),
                ));
            }
            if let Some(bn) = &layer.norm {
                if bn.running_var.iter().any(|&v| v < 0.0) {
                    return Err(NeuralError::BadFormat("negative running variance".into()));
                }
            }
        }
        if self.vocabulary.dim() != self.config.input_dim {
            return Err(NeuralError::ShapeMismatch {
                what: "vocabulary size",
                expected: self.config.input_dim,
                found: self.vocabulary.dim(),
            });
        }
        if self.labels.len() != self.config.n_classes {
            return Err(NeuralError::ShapeMismatch {
                what: "label count",
                expected: self.config.n_classes,
                found: self.labels.len(),
            });
        }
        Ok(())
    }

    pub fn normalizer(&self) -> Normalizer {
        match &self.custom_stopwords {
            Some(words) => Normalizer::with_stopwords(words.iter().cloned()),
            None => Normalizer::default(),
        }
    }

    pub fn encode(&self, indication: &str, diagnosis: &str) -> (FeatureVector, EncodeReport) {
        self.vocabulary
            .encode_texts(indication, diagnosis, &self.normalizer())
    }

    /// Inference-mode logits, one row per input. Rows are computed in
    /// parallel chunks; each row depends only on its own input.
    pub fn infer(&self, features: &[FeatureVector]) -> Result<Matrix<f32>, NeuralError> {
        if let Some(fv) = features.iter().find(|f| f.len() != self.config.input_dim) {
            return Err(NeuralError::ShapeMismatch {
                what: "feature length",
                expected: self.config.input_dim,
                found: fv.len(),
            });
        }
        let chunks: Vec<Matrix<f32>> = features
            .par_chunks(INFER_CHUNK)
            .map(|chunk| self.network.infer(&Matrix::from_features(chunk)))
            .collect::<Result<_, _>>()?;
        let n = self.config.n_classes;
        let data: Vec<f32> = chunks
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect();
        Ok(Matrix::from_vec(features.len(), n, data))
    }

    pub fn infer_one(&self, features: &FeatureVector) -> Result<Vec<f32>, NeuralError> {
        Ok(self.infer(std::slice::from_ref(features))?.row(0).to_vec())
    }
}
