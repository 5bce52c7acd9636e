//! Turn raw logits into an auto-protocol decision or a ranked shortlist.
//!
//! ```bash
//! cargo run --example route_recommendation
//! ```

use protocoling::router::{route, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let labels: Vec<String> = ["mr brain", "mr knee", "mr lumbar spine", "mr shoulder"].map(String::from).to_vec();
    let confident = [4.1, -0.3, 0.2, -1.0];
    let torn = [1.2, 1.1, 0.9, -0.5];

    for (name, logits) in [("confident", confident), ("torn", torn)] {
        let r = route(&logits, &labels, 0.1, 3)?;
        println!("{name}: delta {:.3} -> {}", r.delta, r.mode.as_str());
        match r.mode {
            Mode::AutoProtocol => println!("  assign {}", r.ranked[0].label),
            Mode::DecisionSupport => {
                for p in &r.ranked {
                    println!("  {:<16} {:.3}", p.label, p.normalized_score);
                }
            }
        }
    }
    Ok(())
}
