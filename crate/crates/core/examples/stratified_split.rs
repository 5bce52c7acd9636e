//! Per-class stratified train/test split.
//!
//! ```bash
//! cargo run --example stratified_split
//! ```

use std::collections::BTreeMap;

use protocoling::corpus::{stratified_split, Order};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut orders = Vec::new();
    for (label, n) in [("mr brain", 40), ("mr knee", 13), ("mr orbit", 2), ("mr fetal", 1)] {
        for i in 0..n {
            orders.push(Order::new(format!("{label}-{i}"), "indication", "diagnosis", label));
        }
    }

    let split = stratified_split(&orders, 0.7, 42)?;
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for o in &split.train {
        counts.entry(&o.protocol).or_default().0 += 1;
    }
    for o in &split.test {
        counts.entry(&o.protocol).or_default().1 += 1;
    }
    println!("{:<10} {:>5} {:>5}", "protocol", "train", "test");
    for (label, (tr, te)) in counts {
        println!("{label:<10} {tr:>5} {te:>5}");
    }

    // same seed, same split
    let again = stratified_split(&orders, 0.7, 42)?;
    assert_eq!(split.train, again.train);
    Ok(())
}
