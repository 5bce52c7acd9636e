//! Seeded synthetic order corpora.
//!
//! Each Local protocol owns a set of signature tokens. An order's indication
//! and diagnosis are filled slot by slot: with probability
//! `signature_emission_prob` a slot takes one of the protocol's signature
//! tokens, otherwise a token from a shared noise pool. Members of a lateral
//! pair share every signature token except one side marker.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Order, ENGLISH_STOPWORDS};
use crate::protocols::{HierarchyRow, Level, ProtocolHierarchy};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("spec file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub hierarchy: Vec<HierarchyRow>,
    /// Relative weight per Local label.
    pub prevalence: BTreeMap<String, f64>,
    pub signature_tokens_per_protocol: usize,
    pub shared_noise_vocab_size: usize,
    /// Inclusive `[min, max]` token count per field.
    pub tokens_per_field: [usize; 2],
    pub signature_emission_prob: f64,
    pub lateral_pairs: Vec<[String; 2]>,
    pub order_count: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn validate(&self) -> Result<ProtocolHierarchy, SynthError> {
        let hierarchy =
            ProtocolHierarchy::from_rows(&self.hierarchy).map_err(|e| invalid(e.to_string()))?;
        let locals = hierarchy.labels(Level::Local);
        for label in locals {
            match self.prevalence.get(label) {
                Some(w) if *w > 0.0 && w.is_finite() => {}
                Some(w) => {
                    return Err(invalid(format!(
                        "prevalence of `{label}` must be positive, got {w}"
                    )))
                }
                None => return Err(invalid(format!("no prevalence for `{label}`"))),
            }
        }
        if let Some(extra) = self
            .prevalence
            .keys()
            .find(|k| hierarchy.index_of(Level::Local, k).is_none())
        {
            return Err(invalid(format!(
                "prevalence for unknown protocol `{extra}`"
            )));
        }
        if self.signature_tokens_per_protocol == 0 {
            return Err(invalid("signature_tokens_per_protocol must be at least 1"));
        }
        let [lo, hi] = self.tokens_per_field;
        if lo == 0 || lo > hi {
            return Err(invalid(format!(
                "tokens_per_field [{lo}, {hi}] must satisfy 1 <= min <= max"
            )));
        }
        if !(0.0..=1.0).contains(&self.signature_emission_prob) {
            return Err(invalid("signature_emission_prob must lie in [0, 1]"));
        }
        if self.signature_emission_prob < 1.0 && self.shared_noise_vocab_size == 0 {
            return Err(invalid("noise slots need a non-empty noise vocabulary"));
        }
        if self.order_count == 0 {
            return Err(invalid("order_count must be positive"));
        }
        let mut seen = BTreeSet::new();
        for [a, b] in &self.lateral_pairs {
            if a == b {
                return Err(invalid(format!(
                    "lateral pair `{a}` pairs a protocol with itself"
                )));
            }
            for p in [a, b] {
                if hierarchy.index_of(Level::Local, p).is_none() {
                    return Err(invalid(format!(
                        "lateral pair names unknown protocol `{p}`"
                    )));
                }
                if !seen.insert(p.clone()) {
                    return Err(invalid(format!(
                        "`{p}` appears in more than one lateral pair"
                    )));
                }
            }
        }
        if !self.lateral_pairs.is_empty() && self.signature_tokens_per_protocol < 2 {
            return Err(invalid(
                "lateral pairs need at least 2 signature tokens per protocol",
            ));
        }
        Ok(hierarchy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub orders: Vec<Order>,
    pub hierarchy: ProtocolHierarchy,
    /// Signature tokens per Local label.
    pub signatures: BTreeMap<String, Vec<String>>,
}

const ONSETS: [&str; 14] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// `count` distinct three-syllable pseudo-words that are not stopwords.
fn pseudo_words(rng: &mut ChaCha8Rng, count: usize) -> Vec<String> {
    let mut out = BTreeSet::new();
    let mut words = Vec::with_capacity(count);
    while words.len() < count {
        let w: String = (0..3)
            .map(|_| {
                format!(
                    "{}{}",
                    ONSETS[rng.random_range(0..ONSETS.len())],
                    VOWELS[rng.random_range(0..VOWELS.len())]
                )
            })
            .collect();
        if !ENGLISH_STOPWORDS.contains(&w.as_str()) && out.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// Generate the corpus; the same spec always yields the same orders.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    let hierarchy = spec.validate()?;
    let locals = hierarchy.labels(Level::Local).to_vec();
    let s = spec.signature_tokens_per_protocol;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // one pool so signature and noise tokens never collide
    let singles: Vec<&String> = locals
        .iter()
        .filter(|l| !spec.lateral_pairs.iter().any(|p| p.contains(l)))
        .collect();
    let needed =
        singles.len() * s + spec.lateral_pairs.len() * (s + 1) + spec.shared_noise_vocab_size;
    let mut pool = pseudo_words(&mut rng, needed).into_iter();
    let mut signatures: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for label in &singles {
        signatures.insert((*label).clone(), pool.by_ref().take(s).collect());
    }
    for [a, b] in &spec.lateral_pairs {
        let shared: Vec<String> = pool.by_ref().take(s - 1).collect();
        let (side_a, side_b) = (
            pool.next().expect("pool sized"),
            pool.next().expect("pool sized"),
        );
        signatures.insert(a.clone(), shared.iter().cloned().chain([side_a]).collect());
        signatures.insert(b.clone(), shared.into_iter().chain([side_b]).collect());
    }
    let noise: Vec<String> = pool.collect();

    let weights: Vec<f64> = locals.iter().map(|l| spec.prevalence[l]).collect();
    let picker = WeightedIndex::new(&weights).map_err(|e| invalid(e.to_string()))?;
    let width = spec.order_count.to_string().len().max(6);
    let [lo, hi] = spec.tokens_per_field;

    let field = |rng: &mut ChaCha8Rng, sig: &[String]| -> String {
        let n = rng.random_range(lo..=hi);
        (0..n)
            .map(|_| {
                if rng.random_bool(spec.signature_emission_prob) {
                    sig[rng.random_range(0..sig.len())].as_str()
                } else {
                    noise[rng.random_range(0..noise.len())].as_str()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let orders = (0..spec.order_count)
        .map(|i| {
            let label = &locals[picker.sample(&mut rng)];
            let sig = &signatures[label];
            let indication = field(&mut rng, sig);
            let diagnosis = field(&mut rng, sig);
            Order::new(
                format!("ord-{:0width$}", i + 1),
                indication,
                diagnosis,
                label.clone(),
            )
        })
        .collect();
    Ok(SynthCorpus {
        orders,
        hierarchy,
        signatures,
    })
}

/// 12 Local protocols over 6 ACR and 3 General classes, two lateral pairs
/// (knees, wrists), top class at 14% prevalence, 5,000 orders.
pub fn default_demo_spec() -> SynthSpec {
    let rows = [
        (
            "mr lumbar spine without contrast",
            "lumbar spine",
            "spine",
            14.0,
        ),
        (
            "mr lumbar spine with and without contrast",
            "lumbar spine",
            "spine",
            7.0,
        ),
        (
            "mr cervical spine without contrast",
            "cervical and thoracic spine",
            "spine",
            9.0,
        ),
        (
            "mr thoracic spine without contrast",
            "cervical and thoracic spine",
            "spine",
            7.0,
        ),
        (
            "mr brain with and without contrast",
            "head with contrast",
            "head",
            12.0,
        ),
        (
            "mr pituitary with and without contrast",
            "head with contrast",
            "head",
            6.0,
        ),
        (
            "mr brain without contrast",
            "head without contrast",
            "head",
            8.0,
        ),
        (
            "mr brain multiple sclerosis protocol",
            "head without contrast",
            "head",
            7.0,
        ),
        ("mr right knee without contrast", "knee", "extremity", 8.0),
        ("mr left knee without contrast", "knee", "extremity", 8.0),
        ("mr right wrist without contrast", "wrist", "extremity", 7.0),
        ("mr left wrist without contrast", "wrist", "extremity", 7.0),
    ];
    SynthSpec {
        hierarchy: rows
            .iter()
            .map(|(l, a, g, _)| HierarchyRow::new(*l, *a, *g))
            .collect(),
        prevalence: rows
            .iter()
            .map(|(l, _, _, w)| (l.to_string(), *w))
            .collect(),
        signature_tokens_per_protocol: 4,
        shared_noise_vocab_size: 200,
        tokens_per_field: [3, 8],
        signature_emission_prob: 0.5,
        lateral_pairs: vec![
            [
                "mr right knee without contrast".into(),
                "mr left knee without contrast".into(),
            ],
            [
                "mr right wrist without contrast".into(),
                "mr left wrist without contrast".into(),
            ],
        ],
        order_count: 5000,
        seed: 20_190_318,
    }
}
