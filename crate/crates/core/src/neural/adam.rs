use super::matrix::Scalar;
use super::network::{Grads, Network};
use super::NeuralError;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates, one pair per trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub learning_rate: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(network: &Network<T>, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<T>> = network
            .trainable()
            .iter()
            .map(|t| vec![T::zero(); t.len()])
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            learning_rate,
        }
    }

    /// Bias-corrected Adam update. `step` counts from 1.
    pub fn step(
        &mut self,
        network: &mut Network<T>,
        grads: &Grads<T>,
        step: u64,
    ) -> Result<(), NeuralError> {
        let mut params = network.trainable_mut();
        if params.len() != grads.tensors.len() || params.len() != self.m.len() {
            return Err(NeuralError::ShapeMismatch {
                what: "tensor count",
                expected: params.len(),
                found: grads.tensors.len(),
            });
        }
        for ((p, g), m) in params.iter().zip(&grads.tensors).zip(&self.m) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(NeuralError::ShapeMismatch {
                    what: "tensor length",
                    expected: p.len(),
                    found: g.len(),
                });
            }
        }
        let b1 = T::lit(ADAM_BETA1);
        let b2 = T::lit(ADAM_BETA2);
        let eps = T::lit(ADAM_EPSILON);
        let lr = T::lit(self.learning_rate);
        let bc1 = T::lit(1.0 - ADAM_BETA1.powf(step as f64));
        let bc2 = T::lit(1.0 - ADAM_BETA2.powf(step as f64));
        for (((param, grad), m), v) in params
            .iter_mut()
            .zip(&grads.tensors)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ModelConfig;

    fn net() -> Network<f64> {
        Network::init(&ModelConfig::new(3, 2)).unwrap()
    }

    fn zero_grads(n: &Network<f64>) -> Grads<f64> {
        Grads {
            tensors: n.trainable().iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut n = net();
        let before = n.clone();
        let mut opt = AdamState::new(&n, 1e-4);
        let g = zero_grads(&n);
        opt.step(&mut n, &g, 1).unwrap();
        assert_eq!(n, before);
        assert!(opt.m.iter().chain(&opt.v).flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn first_step_closed_form() {
        let mut n = net();
        let before = n.layers[0].dense.weights[0];
        let mut grads = zero_grads(&n);
        grads.tensors[0][0] = 1.0;
        let mut opt = AdamState::new(&n, 1e-4);
        opt.step(&mut n, &grads, 1).unwrap();
        let delta = n.layers[0].dense.weights[0] - before;
        // m̂ = 1, v̂ = 1 → Δ = −lr / (1 + ε)
        let expected = -1e-4 / (1.0 + 1e-8);
        assert!((delta - expected).abs() < 1e-15, "{delta} vs {expected}");
        assert!((delta + 9.9999999e-5).abs() < 1e-15);
    }

    #[test]
    fn tensors_update_independently() {
        let mut n = net();
        let before = n.clone();
        let mut grads = zero_grads(&n);
        grads.tensors[0].iter_mut().for_each(|g| *g = 0.5);
        let mut opt = AdamState::new(&n, 1e-3);
        opt.step(&mut n, &grads, 1).unwrap();
        assert_ne!(n.layers[0].dense.weights, before.layers[0].dense.weights);
        assert_eq!(n.layers[0].dense.bias, before.layers[0].dense.bias);
        assert_eq!(n.layers[1], before.layers[1]);
        assert_eq!(n.layers[2], before.layers[2]);
    }

    #[test]
    fn shape_mismatch() {
        let mut n = net();
        let mut opt = AdamState::new(&n, 1e-3);
        let mut grads = zero_grads(&n);
        grads.tensors[1].push(0.0);
        assert!(matches!(
            opt.step(&mut n, &grads, 1),
            Err(NeuralError::ShapeMismatch { .. })
        ));
        grads.tensors.pop();
        assert!(matches!(
            opt.step(&mut n, &grads, 1),
            Err(NeuralError::ShapeMismatch { .. })
        ));
    }
}
