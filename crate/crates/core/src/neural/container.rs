//! `PRTM` model container.
//!
//! ```text
//! magic      4 bytes   "PRTM"
//! version    u32 LE
//! meta_len   u32 LE
//! metadata   meta_len bytes of UTF-8 JSON
//! payload    f32 LE arrays, in the tensor order declared in the metadata
//! crc32      u32 LE over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::MlpModel;
use super::network::Network;
use super::{ModelConfig, NeuralError};
use crate::corpus::{Field, Vocabulary};
use crate::protocols::Level;

pub const MAGIC: &[u8; 4] = b"PRTM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorSpec {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VocabularyDigests {
    indication: String,
    diagnosis: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    config: ModelConfig,
    level: Level,
    labels: Vec<String>,
    vocabulary: Vocabulary,
    vocabulary_digests: VocabularyDigests,
    custom_stopwords: Option<Vec<String>>,
    tensors: Vec<TensorSpec>,
    creator: String,
}

impl MlpModel {
    /// Serialize to container bytes. Output depends only on the model, so equal
    /// models give byte-identical files.
    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.network.all_tensors();
        let meta = Metadata {
            config: self.config.clone(),
            level: self.level,
            labels: self.labels.clone(),
            vocabulary: self.vocabulary.clone(),
            vocabulary_digests: VocabularyDigests {
                indication: self.vocabulary.digest(Field::Indication),
                diagnosis: self.vocabulary.digest(Field::Diagnosis),
            },
            custom_stopwords: self.custom_stopwords.clone(),
            tensors: tensors
                .iter()
                .map(|(name, shape, _)| TensorSpec {
                    name: name.clone(),
                    shape: shape.clone(),
                })
                .collect(),
            creator: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
        };
        let meta_json = serde_json::to_vec(&meta).expect("metadata serializes");
        let payload_len: usize = tensors.iter().map(|(_, _, t)| t.len() * 4).sum();
        let mut out = Vec::with_capacity(16 + meta_json.len() + payload_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta_json);
        for (_, _, data) in &tensors {
            for v in data.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NeuralError> {
        if bytes.len() < 12 {
            return Err(NeuralError::TruncatedFile);
        }
        if &bytes[..4] != MAGIC {
            return Err(NeuralError::BadFormat("bad magic bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(NeuralError::FormatVersionMismatch {
                expected: FORMAT_VERSION,
                found: version,
            });
        }
        let meta_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let meta_end = 12usize
            .checked_add(meta_len)
            .ok_or(NeuralError::TruncatedFile)?;
        if bytes.len() < meta_end + 4 {
            return Err(NeuralError::TruncatedFile);
        }
        let body_end = bytes.len() - 4;
        let stored = u32::from_le_bytes(bytes[body_end..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&bytes[..body_end]);
        let meta: Metadata = match serde_json::from_slice(&bytes[12..meta_end]) {
            Ok(m) => m,
            // a short file cuts into the metadata before the checksum is reached
            Err(_) if stored != computed => {
                return Err(NeuralError::ChecksumMismatch { stored, computed })
            }
            Err(e) => return Err(NeuralError::BadFormat(format!("metadata: {e}"))),
        };
        let expected_payload: usize = meta
            .tensors
            .iter()
            .map(|t| t.shape.iter().product::<usize>() * 4)
            .sum();
        let payload = &bytes[meta_end..body_end];
        if payload.len() < expected_payload {
            return Err(NeuralError::TruncatedFile);
        }
        if stored != computed {
            return Err(NeuralError::ChecksumMismatch { stored, computed });
        }
        if payload.len() != expected_payload {
            return Err(NeuralError::BadFormat(
                "trailing bytes after payload".into(),
            ));
        }

        if meta.vocabulary.digest(Field::Indication) != meta.vocabulary_digests.indication
            || meta.vocabulary.digest(Field::Diagnosis) != meta.vocabulary_digests.diagnosis
        {
            return Err(NeuralError::BadFormat("vocabulary digest mismatch".into()));
        }

        let mut network: Network<f32> = Network::init(&ModelConfig {
            seed: 0,
            ..meta.config.clone()
        })?;
        let declared = network.all_tensors();
        if declared.len() != meta.tensors.len() {
            return Err(NeuralError::BadFormat(
                "tensor list does not match architecture".into(),
            ));
        }
        for ((name, shape, _), spec) in declared.iter().zip(&meta.tensors) {
            if *name != spec.name || *shape != spec.shape {
                return Err(NeuralError::BadFormat(format!(
                    "tensor `{}` has unexpected name or shape",
                    spec.name
                )));
            }
        }
        let mut cursor = 0usize;
        for tensor in network.all_tensors_mut() {
            for v in tensor.iter_mut() {
                *v = f32::from_le_bytes(payload[cursor..cursor + 4].try_into().expect("4 bytes"));
                cursor += 4;
            }
        }
        let model = MlpModel {
            config: meta.config,
            network,
            vocabulary: meta.vocabulary,
            labels: meta.labels,
            level: meta.level,
            custom_stopwords: meta.custom_stopwords,
        };
        model.check_shapes()?;
        Ok(model)
    }
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel, NeuralError> {
    MlpModel::from_bytes(&fs::read(path)?)
}

/// Hex SHA-256 of container bytes; used as the model identifier.
pub fn model_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
