use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::text::Normalizer;
use super::{CorpusError, Order};

/// Which free-text channel a token came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Indication,
    Diagnosis,
}

/// Per-field token dictionaries built from the training split.
///
/// Each list is sorted and duplicate-free. The indication channel occupies
/// feature indices `[0, indication_tokens.len())`, diagnosis follows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub indication_tokens: Vec<String>,
    pub diagnosis_tokens: Vec<String>,
}

impl Vocabulary {
    pub fn build_with(orders: &[Order], normalizer: &Normalizer) -> Result<Self, CorpusError> {
        if orders.is_empty() {
            return Err(CorpusError::EmptyTrainingSet);
        }
        let mut indication = BTreeSet::new();
        let mut diagnosis = BTreeSet::new();
        for order in orders {
            indication.extend(normalizer.normalize(&order.indication));
            diagnosis.extend(normalizer.normalize(&order.diagnosis));
        }
        Ok(Self {
            indication_tokens: indication.into_iter().collect(),
            diagnosis_tokens: diagnosis.into_iter().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.indication_tokens.len() + self.diagnosis_tokens.len()
    }

    /// Feature index of `token` in `field`, if in vocabulary.
    pub fn index_of(&self, field: Field, token: &str) -> Option<usize> {
        match field {
            Field::Indication => self
                .indication_tokens
                .binary_search_by(|t| t.as_str().cmp(token))
                .ok(),
            Field::Diagnosis => self
                .diagnosis_tokens
                .binary_search_by(|t| t.as_str().cmp(token))
                .ok()
                .map(|i| i + self.indication_tokens.len()),
        }
    }

    /// Hex SHA-256 over the newline-joined token list of one field.
    pub fn digest(&self, field: Field) -> String {
        let tokens = match field {
            Field::Indication => &self.indication_tokens,
            Field::Diagnosis => &self.diagnosis_tokens,
        };
        let mut hasher = Sha256::new();
        for tok in tokens {
            hasher.update(tok.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    /// Encode an order, also reporting which normalized tokens were kept or
    /// dropped as out-of-vocabulary.
    pub fn encode_with(
        &self,
        order: &Order,
        normalizer: &Normalizer,
    ) -> (FeatureVector, EncodeReport) {
        self.encode_texts(&order.indication, &order.diagnosis, normalizer)
    }

    pub fn encode_texts(
        &self,
        indication: &str,
        diagnosis: &str,
        normalizer: &Normalizer,
    ) -> (FeatureVector, EncodeReport) {
        let mut active = BTreeSet::new();
        let mut report = EncodeReport::default();
        for (field, text) in [
            (Field::Indication, indication),
            (Field::Diagnosis, diagnosis),
        ] {
            for tok in normalizer.normalize(text) {
                let (kept, dropped) = match field {
                    Field::Indication => {
                        (&mut report.kept_indication, &mut report.dropped_indication)
                    }
                    Field::Diagnosis => (&mut report.kept_diagnosis, &mut report.dropped_diagnosis),
                };
                match self.index_of(field, &tok) {
                    Some(idx) => {
                        active.insert(idx as u32);
                        kept.push(tok);
                    }
                    None => dropped.push(tok),
                }
            }
        }
        let features = FeatureVector {
            dim: self.dim(),
            active: active.into_iter().collect(),
        };
        (features, report)
    }
}

/// Tokens kept and dropped while encoding one order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EncodeReport {
    pub kept_indication: Vec<String>,
    pub kept_diagnosis: Vec<String>,
    pub dropped_indication: Vec<String>,
    pub dropped_diagnosis: Vec<String>,
}

/// Binary presence vector, stored as the sorted set of indices equal to 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    dim: usize,
    active: Vec<u32>,
}

impl FeatureVector {
    /// Build from explicit active indices. Indices are sorted and deduplicated.
    ///
    /// # Panics
    /// If any index is `>= dim`.
    pub fn from_active(dim: usize, mut active: Vec<u32>) -> Self {
        active.sort_unstable();
        active.dedup();
        assert!(
            active.last().is_none_or(|&i| (i as usize) < dim),
            "feature index out of range"
        );
        Self { dim, active }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            active: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn get(&self, idx: usize) -> u8 {
        u8::from(self.active.binary_search(&(idx as u32)).is_ok())
    }

    pub fn to_dense(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.dim];
        for &i in &self.active {
            out[i as usize] = 1;
        }
        out
    }
}

pub fn build_vocabulary(train_orders: &[Order]) -> Result<Vocabulary, CorpusError> {
    Vocabulary::build_with(train_orders, &Normalizer::default())
}

pub fn encode_order(order: &Order, vocab: &Vocabulary) -> FeatureVector {
    vocab.encode_with(order, &Normalizer::default()).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize_text;
    use proptest::prelude::*;

    fn knee_vocab() -> Vocabulary {
        build_vocabulary(&[Order::new("1", "knee pain", "tear", "knee")]).unwrap()
    }

    #[test]
    fn single_order_vocabulary() {
        let v = knee_vocab();
        assert_eq!(v.indication_tokens, vec!["knee", "pain"]);
        assert_eq!(v.diagnosis_tokens, vec!["tear"]);
        assert_eq!(v.dim(), 3);
    }

    #[test]
    fn duplicates_do_not_change_vocabulary() {
        let o = Order::new("1", "knee pain", "tear", "knee");
        let twice = build_vocabulary(&[o.clone(), o.clone()]).unwrap();
        assert_eq!(twice, knee_vocab());
    }

    #[test]
    fn empty_diagnosis_field() {
        let v = build_vocabulary(&[Order::new("1", "headache", "", "brain")]).unwrap();
        assert!(v.diagnosis_tokens.is_empty());
    }

    #[test]
    fn empty_training_set_rejected() {
        assert!(matches!(
            build_vocabulary(&[]),
            Err(CorpusError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn oov_only_input_is_all_zero() {
        let fv = encode_order(&Order::new("2", "shoulder", "fracture", "x"), &knee_vocab());
        assert_eq!(fv.to_dense(), vec![0, 0, 0]);
    }

    #[test]
    fn presence_ignores_repetition() {
        let fv = encode_order(&Order::new("2", "knee knee pain", "", "x"), &knee_vocab());
        assert_eq!(fv.to_dense(), vec![1, 1, 0]);
    }

    #[test]
    fn fields_are_independent_channels() {
        // "knee" is an indication token; seen in the diagnosis field it must not set a bit.
        let fv = encode_order(&Order::new("2", "", "knee", "x"), &knee_vocab());
        assert_eq!(fv.to_dense(), vec![0, 0, 0]);
        let fv = encode_order(&Order::new("3", "", "tear", "x"), &knee_vocab());
        assert_eq!(fv.to_dense(), vec![0, 0, 1]);
    }

    #[test]
    fn encode_report_lists_dropped_tokens() {
        let (_, report) = knee_vocab().encode_texts("knee zzqx", "tear", &Normalizer::default());
        assert_eq!(report.kept_indication, vec!["knee"]);
        assert_eq!(report.dropped_indication, vec!["zzqx"]);
        assert_eq!(report.kept_diagnosis, vec!["tear"]);
        assert!(report.dropped_diagnosis.is_empty());
    }

    #[test]
    fn digest_is_stable_and_field_specific() {
        let v = knee_vocab();
        assert_eq!(v.digest(Field::Indication), v.digest(Field::Indication));
        assert_ne!(v.digest(Field::Indication), v.digest(Field::Diagnosis));
    }

    fn arb_orders() -> impl Strategy<Value = Vec<Order>> {
        let words = prop::sample::select(vec![
            "knee",
            "pain",
            "Left",
            "tear",
            "MS",
            "the",
            "follow-up",
            "l4",
            "headache",
            "of",
        ]);
        let text = prop::collection::vec(words, 0..6).prop_map(|w| w.join(" "));
        prop::collection::vec((text.clone(), text), 1..12).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (a, b))| Order::new(i.to_string(), a, b, "p"))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn training_set_has_no_oov(orders in arb_orders()) {
            let vocab = build_vocabulary(&orders).unwrap();
            for o in &orders {
                let (fv, report) = vocab.encode_with(o, &Normalizer::default());
                prop_assert_eq!(fv.len(), vocab.dim());
                prop_assert!(report.dropped_indication.is_empty());
                prop_assert!(report.dropped_diagnosis.is_empty());
                let ind: BTreeSet<String> = normalize_text(&o.indication).into_iter().collect();
                let diag: BTreeSet<String> = normalize_text(&o.diagnosis).into_iter().collect();
                prop_assert_eq!(fv.active().len(), ind.len() + diag.len());
            }
        }

        #[test]
        fn vocabulary_is_sorted_unique(orders in arb_orders()) {
            let vocab = build_vocabulary(&orders).unwrap();
            for list in [&vocab.indication_tokens, &vocab.diagnosis_tokens] {
                prop_assert!(list.windows(2).all(|w| w[0] < w[1]));
            }
            let mut reversed = orders.clone();
            reversed.reverse();
            prop_assert_eq!(build_vocabulary(&reversed).unwrap(), vocab);
        }
    }
}
