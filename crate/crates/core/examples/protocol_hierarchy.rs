//! Coarsen labels through the Local -> ACR -> General hierarchy.
//!
//! ```bash
//! cargo run --example protocol_hierarchy
//! ```

use protocoling::corpus::Order;
use protocoling::protocols::{read_hierarchy, relabel_dataset, Level};

const HIERARCHY: &str = "\
local,acr,general
mr knee right without contrast,mr knee,mr extremity
mr knee left without contrast,mr knee,mr extremity
mr wrist right without contrast,mr wrist,mr extremity
mr brain without contrast,mr brain,mr head
mr brain with and without contrast,mr brain,mr head
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = read_hierarchy(HIERARCHY.as_bytes())?;
    for level in Level::ALL {
        println!("{level:<8} {} labels", h.labels(level).len());
    }

    let local = "mr knee left without contrast";
    println!("{local} -> {} -> {}", h.coarsen(local, Level::Local, Level::Acr)?, h.coarsen(local, Level::Local, Level::General)?);

    // going finer is refused
    println!("{}", h.coarsen("mr knee", Level::Acr, Level::Local).unwrap_err());

    let orders = vec![Order::new("7", "seizure", "epilepsy", "mr brain with and without contrast")];
    let general = relabel_dataset(&orders, &h, Level::General)?;
    println!("relabeled to general: {}", general[0].protocol);
    Ok(())
}
