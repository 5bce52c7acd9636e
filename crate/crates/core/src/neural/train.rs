use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::matrix::Matrix;
use super::model::MlpModel;
use super::network::Network;
use super::{ModelConfig, NeuralError};
use crate::corpus::{FeatureVector, Vocabulary};
use crate::protocols::Level;

/// Per-epoch training record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean per-example training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub epochs_run: usize,
}

/// Mini-batch training with shuffling, dropout and Adam.
///
/// The shuffle order and the dropout masks come from one generator seeded by
/// `config.seed` (on a separate stream from initialization), so identical
/// configs give identical parameters. A trailing batch with fewer than two
/// examples is skipped.
pub fn train_network(
    features: &[FeatureVector],
    labels: &[usize],
    config: &ModelConfig,
) -> Result<(Network<f32>, TrainHistory), NeuralError> {
    config.validate()?;
    if features.len() < 2 {
        return Err(NeuralError::EmptyDataset);
    }
    if features.len() != labels.len() {
        return Err(NeuralError::ShapeMismatch {
            what: "label count",
            expected: features.len(),
            found: labels.len(),
        });
    }
    if let Some(fv) = features.iter().find(|f| f.len() != config.input_dim) {
        return Err(NeuralError::ShapeMismatch {
            what: "feature length",
            expected: config.input_dim,
            found: fv.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= config.n_classes) {
        return Err(NeuralError::LabelOutOfRange {
            label: bad,
            n_classes: config.n_classes,
        });
    }

    let mut network: Network<f32> = Network::init(config)?;
    let mut opt = AdamState::new(&network, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut step = 0u64;
    let mut batch_features = Vec::with_capacity(config.batch_size);
    let mut batch_labels = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            batch_features.clear();
            batch_labels.clear();
            for &i in chunk {
                batch_features.push(features[i].clone());
                batch_labels.push(labels[i]);
            }
            let x: Matrix<f32> = Matrix::from_features(&batch_features);
            let masks = network.sample_masks(chunk.len(), &mut rng);
            let (loss, grads, cache) = network.loss_and_grad(&x, &batch_labels, Some(&masks))?;
            step += 1;
            opt.step(&mut network, &grads, step)?;
            network.update_running_stats(&cache);
            loss_sum += f64::from(loss) * chunk.len() as f64;
            seen += chunk.len();
        }
        history.epoch_losses.push(if seen > 0 {
            loss_sum / seen as f64
        } else {
            0.0
        });
        history.epoch_seconds.push(started.elapsed().as_secs_f64());
        history.epochs_run += 1;
    }
    Ok((network, history))
}

/// Train a complete model over encoded orders. `label_names[i]` names class `i`.
pub fn train(
    vocabulary: Vocabulary,
    label_names: Vec<String>,
    level: Level,
    features: &[FeatureVector],
    labels: &[usize],
    config: &ModelConfig,
) -> Result<(MlpModel, TrainHistory), NeuralError> {
    let (network, history) = train_network(features, labels, config)?;
    let model = MlpModel::new(config.clone(), network, vocabulary, label_names, level)?;
    Ok((model, history))
}
