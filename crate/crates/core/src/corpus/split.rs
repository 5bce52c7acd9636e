use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Order};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// Result of a per-class train/test partition. Both halves keep the input
/// order of the source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<Order>,
    pub test: Vec<Order>,
    pub split_seed: u64,
    pub train_fraction: f64,
}

/// Partition every protocol class independently at `train_fraction`.
///
/// A class with `n` members contributes `round(train_fraction * n)` orders to
/// train, clamped to `[1, n - 1]` so both halves see the class. Singleton
/// classes go to train.
pub fn stratified_split(
    orders: &[Order],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitDataset, CorpusError> {
    if orders.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }

    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, order) in orders.iter().enumerate() {
        by_class.entry(order.protocol.as_str()).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; orders.len()];
    for members in by_class.values_mut() {
        let n = members.len();
        let take = if n == 1 {
            1
        } else {
            ((train_fraction * n as f64).round() as usize).clamp(1, n - 1)
        };
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            in_train[i] = true;
        }
    }

    let (train, test): (Vec<_>, Vec<_>) = orders.iter().zip(&in_train).partition(|(_, &keep)| keep);
    Ok(SplitDataset {
        train: train.into_iter().map(|(o, _)| o.clone()).collect(),
        test: test.into_iter().map(|(o, _)| o.clone()).collect(),
        split_seed: seed,
        train_fraction,
    })
}
