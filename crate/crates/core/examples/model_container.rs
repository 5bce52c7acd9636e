//! Save a trained model, reload it, and watch the checksum catch corruption.
//!
//! ```bash
//! cargo run --release --example model_container
//! ```

use protocoling::corpus::{stratified_split, Normalizer};
use protocoling::neural::{load_model, model_digest, save_model, MlpModel};
use protocoling::pipeline::{train_level, TrainOptions};
use protocoling::protocols::Level;
use protocoling::synthgen::{default_demo_spec, generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec { order_count: 600, ..default_demo_spec() };
    let corpus = generate(&spec)?;
    let split = stratified_split(&corpus.orders, 0.7, 1)?;
    let options = TrainOptions { epochs: 5, seed: 1, ..TrainOptions::default() };
    let (model, _) = train_level(&split.train, &corpus.hierarchy, Level::Acr, &Normalizer::default(), &options)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("acr.prtm");
    save_model(&model, &path)?;
    let bytes = std::fs::read(&path)?;
    println!("{} bytes, sha256 {}", bytes.len(), model_digest(&bytes));

    let back = load_model(&path)?;
    let (x, _) = back.encode(&split.test[0].indication, &split.test[0].diagnosis);
    let a = model.infer_one(&x)?;
    let b = back.infer_one(&x)?;
    assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    println!("reloaded {} model over {} labels gives identical logits", back.level, back.labels.len());

    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x40;
    println!("one flipped bit: {}", MlpModel::from_bytes(&flipped).unwrap_err());
    println!("truncated: {}", MlpModel::from_bytes(&bytes[..100]).unwrap_err());
    Ok(())
}
