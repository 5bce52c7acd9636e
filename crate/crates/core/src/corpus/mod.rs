//! Order records, text preprocessing, bag-of-words encoding and the
//! stratified train/test split.

mod io;
mod split;
mod text;
mod vocab;

pub use io::{load_orders, read_orders, write_orders, ORDER_CSV_HEADER};
pub use split::{stratified_split, SplitDataset, DEFAULT_TRAIN_FRACTION};
pub use text::{normalize_text, Normalizer, ENGLISH_STOPWORDS};
pub use vocab::{build_vocabulary, encode_order, EncodeReport, FeatureVector, Field, Vocabulary};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One imaging order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub id: String,
    pub indication: String,
    pub diagnosis: String,
    /// Protocol label at whatever level the dataset currently carries
    /// (Local for raw corpora).
    pub protocol: String,
}

impl Order {
    pub fn new(
        id: impl Into<String>,
        indication: impl Into<String>,
        diagnosis: impl Into<String>,
        protocol: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            indication: indication.into(),
            diagnosis: diagnosis.into(),
            protocol: protocol.into(),
        }
    }
}
