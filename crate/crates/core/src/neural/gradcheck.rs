//! Central finite-difference verification of the analytic gradients, run
//! entirely in double precision with dropout disabled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::matrix::Matrix;
use super::network::{Grads, Network};
use super::{ModelConfig, NeuralError};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Magnitude below which gradient components are compared on an absolute
/// scale. Pre-batch-norm dense biases have an analytic gradient of exactly
/// zero, where a purely relative measure would compare rounding noise with
/// rounding noise.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub len: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub tensors: Vec<TensorCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_relative_error)
            .fold(0.0, f64::max)
    }
}

/// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Check a freshly initialized network built from `config`. Biases and
/// batch-norm parameters are jittered away from their initial constants so
/// every tensor carries a non-degenerate gradient.
pub fn gradient_check(
    config: &ModelConfig,
    batch: &Matrix<f64>,
    labels: &[usize],
    tolerance: f64,
) -> Result<GradCheckReport, NeuralError> {
    let config = ModelConfig {
        dropout_rate: 0.0,
        ..config.clone()
    };
    let mut network: Network<f64> = Network::init(&config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    for layer in &mut network.layers {
        layer
            .dense
            .bias
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-0.1..0.1));
        if let Some(bn) = &mut layer.norm {
            bn.gamma
                .iter_mut()
                .for_each(|g| *g = rng.random_range(0.5..1.5));
            bn.beta
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
    }
    gradient_check_with(&network, batch, labels, tolerance, |net, x, y| {
        net.loss_and_grad(x, y, None).map(|(_, g, _)| g)
    })
}

/// Compare `analytic` against central differences of the train-mode loss
/// (dropout off) for every trainable tensor of `network`.
pub fn gradient_check_with<F>(
    network: &Network<f64>,
    batch: &Matrix<f64>,
    labels: &[usize],
    tolerance: f64,
    analytic: F,
) -> Result<GradCheckReport, NeuralError>
where
    F: Fn(&Network<f64>, &Matrix<f64>, &[usize]) -> Result<Grads<f64>, NeuralError>,
{
    let grads = analytic(network, batch, labels)?;
    let names = network.trainable_names();
    let mut probe = network.clone();
    let mut tensors = Vec::with_capacity(names.len());
    for (t, name) in names.into_iter().enumerate() {
        let len = grads.tensors[t].len();
        let mut worst = 0.0f64;
        for i in 0..len {
            let original = probe.trainable_mut()[t][i];
            probe.trainable_mut()[t][i] = original + FD_STEP;
            let plus = probe.loss(batch, labels, None)?;
            probe.trainable_mut()[t][i] = original - FD_STEP;
            let minus = probe.loss(batch, labels, None)?;
            probe.trainable_mut()[t][i] = original;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grads.tensors[t][i], numeric));
        }
        tensors.push(TensorCheck {
            name,
            len,
            max_relative_error: worst,
            passed: worst < tolerance,
        });
    }
    let passed = tensors.iter().all(|t| t.passed);
    Ok(GradCheckReport {
        tolerance,
        tensors,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: usize, cols: usize, seed: u64) -> (Matrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..rows * cols)
            .map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 })
            .collect();
        let y = (0..rows).map(|r| r % 3).collect();
        (Matrix::from_vec(rows, cols, x), y)
    }

    #[test]
    fn fresh_model_passes() {
        let cfg = ModelConfig {
            seed: 1,
            ..ModelConfig::new(12, 3)
        };
        let (x, y) = batch(5, 12, 1);
        let report = gradient_check(&cfg, &x, &y, 1e-5).unwrap();
        assert!(report.passed, "{report:#?}");
    }

    #[test]
    fn minimum_batch_passes() {
        let cfg = ModelConfig {
            seed: 2,
            ..ModelConfig::new(10, 3)
        };
        let (x, y) = batch(2, 10, 2);
        let report = gradient_check(&cfg, &x, &y, 1e-5).unwrap();
        assert!(report.passed, "{report:#?}");
    }

    #[test]
    fn corrupted_backprop_is_flagged() {
        let cfg = ModelConfig {
            seed: 3,
            dropout_rate: 0.0,
            ..ModelConfig::new(8, 3)
        };
        let net: Network<f64> = Network::init(&cfg).unwrap();
        let (x, y) = batch(4, 8, 3);
        let report = gradient_check_with(&net, &x, &y, 1e-5, |n, x, y| {
            let (_, mut g, _) = n.loss_and_grad(x, y, None)?;
            // drop the batch-norm scale gradient of the second hidden layer
            let idx = n
                .trainable_names()
                .iter()
                .position(|s| s == "layer1.bn.gamma")
                .unwrap();
            g.tensors[idx].iter_mut().for_each(|v| *v *= 1.01);
            Ok(g)
        })
        .unwrap();
        assert!(!report.passed);
        let failed: Vec<&str> = report
            .tensors
            .iter()
            .filter(|t| !t.passed)
            .map(|t| t.name.as_str())
            .collect();
        assert_eq!(failed, vec!["layer1.bn.gamma"]);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.0 + 1e-6) - 1e-6 / (1.0 + 1e-6)).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-10) - 1e-7).abs() < 1e-18);
    }
}
