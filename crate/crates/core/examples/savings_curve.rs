//! Annual savings and FTE equivalents for a range of auto-protocol shares.
//!
//! ```bash
//! cargo run --example savings_curve
//! ```

use protocoling::economics::{annual_savings, fte_saved, Cents, EconomicParams, Role};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for role in [Role::Technologist, Role::Radiologist] {
        let p = EconomicParams::preset(role);
        println!("{role:?}: ${}/h, {} min per exam, {} exams/year", p.hourly_rate, p.minutes_per_exam, p.annual_volume);
        for ap in [0.25, 0.5, 0.75, 1.0] {
            println!("  AP {ap:>4}: ${:>10}  {:.3} FTE", annual_savings(ap, &p)?.to_string(), fte_saved(ap, &p)?);
        }
    }

    // a smaller site with a different pay scale
    let site = EconomicParams {
        hourly_rate: Cents::from_dollars(45.50),
        annual_volume: 12_000,
        ..EconomicParams::preset(Role::Technologist)
    };
    println!("small site at AP 0.6: ${}", annual_savings(0.6, &site)?);
    Ok(())
}
