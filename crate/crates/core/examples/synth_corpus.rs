//! Generate a labeled synthetic order corpus and write it as CSV.
//!
//! ```bash
//! cargo run --example synth_corpus -- /tmp/orders.csv
//! ```

use std::collections::BTreeMap;
use std::fs::File;

use protocoling::corpus::write_orders;
use protocoling::synthgen::{default_demo_spec, generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec { order_count: 1000, ..default_demo_spec() };
    let corpus = generate(&spec)?;

    let mut per_class: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &corpus.orders {
        *per_class.entry(&o.protocol).or_default() += 1;
    }
    for (label, n) in &per_class {
        println!("{n:>4}  {label:<45} {:?}", corpus.signatures[*label]);
    }
    let o = &corpus.orders[0];
    println!("\n{}: {:?} / {:?} -> {}", o.id, o.indication, o.diagnosis, o.protocol);

    if let Some(path) = std::env::args().nth(1) {
        write_orders(File::create(&path)?, &corpus.orders)?;
        println!("wrote {path}");
    }
    Ok(())
}
