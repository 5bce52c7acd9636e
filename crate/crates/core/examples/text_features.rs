//! Normalize free text and encode orders into binary presence vectors.
//!
//! ```bash
//! cargo run --example text_features
//! ```

use protocoling::corpus::{normalize_text, Field, Normalizer, Order, Vocabulary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = "Chronic LOW-back pain, r/o disc herniation (L4/L5)!";
    println!("{raw:?}\n  -> {:?}", normalize_text(raw));

    let train = vec![
        Order::new("1", "low back pain radiating to leg", "lumbar radiculopathy", "mr lumbar spine"),
        Order::new("2", "knee pain after twisting injury", "meniscal tear", "mr knee"),
        Order::new("3", "worst headache of life", "subarachnoid hemorrhage", "mr brain"),
    ];
    let normalizer = Normalizer::default();
    let vocab = Vocabulary::build_with(&train, &normalizer)?;
    println!("vocabulary dim {}", vocab.dim());
    println!("  `pain` indication slot {:?}", vocab.index_of(Field::Indication, "pain"));
    println!("  `pain` diagnosis slot  {:?}", vocab.index_of(Field::Diagnosis, "pain"));

    // unseen tokens are dropped and reported, never an error
    let (features, report) = vocab.encode_texts("acute knee pain with swelling", "", &normalizer);
    println!("active indices {:?}", features.active());
    println!("kept {:?}, dropped {:?}", report.kept_indication, report.dropped_indication);

    // a site-specific stopword list replaces the built-in one
    let site = Normalizer::with_stopwords(["pain", "rule", "out"]);
    println!("site list: {:?}", site.normalize("rule out knee pain"));
    Ok(())
}
