//! Compare backprop gradients with central differences in f64.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use protocoling::neural::{gradient_check, Matrix, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (rows, dim, classes) = (4, 50, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = (0..rows * dim).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect();
    let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..classes)).collect();

    let config = ModelConfig { seed: 5, ..ModelConfig::new(dim, classes) };
    let report = gradient_check(&config, &Matrix::from_vec(rows, dim, x), &labels, 1e-5)?;
    for t in &report.tensors {
        println!("{:<14} {:>6} params  max rel err {:.2e}", t.name, t.len, t.max_relative_error);
    }
    println!("{}", if report.passed { "passed" } else { "FAILED" });
    Ok(())
}
