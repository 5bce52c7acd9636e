//! Glue between raw orders and a trained model at a chosen hierarchy level.

use crate::corpus::{CorpusError, FeatureVector, Normalizer, Order, Vocabulary};
use crate::neural::{train, MlpModel, ModelConfig, NeuralError, TrainHistory};
use crate::protocols::{relabel_dataset, HierarchyError, Level, ProtocolHierarchy};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Training knobs that do not depend on the data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: ModelConfig::DEFAULT_EPOCHS,
            batch_size: ModelConfig::DEFAULT_BATCH_SIZE,
            learning_rate: ModelConfig::DEFAULT_LEARNING_RATE,
            dropout_rate: ModelConfig::DEFAULT_DROPOUT,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn config(&self, input_dim: usize, n_classes: usize) -> ModelConfig {
        ModelConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            dropout_rate: self.dropout_rate,
            seed: self.seed,
            ..ModelConfig::new(input_dim, n_classes)
        }
    }
}

/// Encoded training set at one level.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub vocabulary: Vocabulary,
    pub labels: Vec<String>,
    pub features: Vec<FeatureVector>,
    pub targets: Vec<usize>,
}

/// Relabel Local-level orders to `level`, build the vocabulary and encode.
pub fn prepare(
    train_orders: &[Order],
    hierarchy: &ProtocolHierarchy,
    level: Level,
    normalizer: &Normalizer,
) -> Result<Prepared, PipelineError> {
    let relabeled = relabel_dataset(train_orders, hierarchy, level)?;
    let vocabulary = Vocabulary::build_with(&relabeled, normalizer)?;
    let features = relabeled
        .iter()
        .map(|o| vocabulary.encode_with(o, normalizer).0)
        .collect();
    let targets = relabeled
        .iter()
        .map(|o| {
            hierarchy
                .index_of(level, &o.protocol)
                .expect("relabeled to this level")
        })
        .collect();
    Ok(Prepared {
        vocabulary,
        labels: hierarchy.labels(level).to_vec(),
        features,
        targets,
    })
}

/// Train a model for `level` from Local-level training orders.
pub fn train_level(
    train_orders: &[Order],
    hierarchy: &ProtocolHierarchy,
    level: Level,
    normalizer: &Normalizer,
    options: &TrainOptions,
) -> Result<(MlpModel, TrainHistory), PipelineError> {
    let p = prepare(train_orders, hierarchy, level, normalizer)?;
    let config = options.config(p.vocabulary.dim(), p.labels.len());
    let (mut model, history) = train(
        p.vocabulary,
        p.labels,
        level,
        &p.features,
        &p.targets,
        &config,
    )?;
    model.custom_stopwords = normalizer.custom_stopwords();
    Ok((model, history))
}
