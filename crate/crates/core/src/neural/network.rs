//! Fully connected classifier: `input → 4n → 2n → n`.
//!
//! Each hidden layer is dense → batch-norm → ReLU → dropout. The final layer
//! is a plain dense layer producing logits. Dropout is inverted (kept units
//! are scaled by `1 / (1 - p)` at train time), so inference is a pure
//! deterministic path through the running batch-norm statistics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::matrix::{Matrix, Scalar};
use super::{ModelConfig, NeuralError};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `in_dim × out_dim`, row-major by input feature.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub dense: Dense<T>,
    /// Present on hidden layers only.
    pub norm: Option<BatchNorm<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub layers: Vec<Layer<T>>,
    pub dropout_rate: T,
    pub bn_momentum: T,
    pub bn_epsilon: T,
}

/// Gradients for every trainable tensor, in [`Network::trainable`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub tensors: Vec<Vec<T>>,
}

/// Per-layer dropout multipliers (0 or `1/(1-p)`), one matrix per hidden layer.
#[derive(Debug, Clone)]
pub struct DropoutMasks<T> {
    pub masks: Vec<Matrix<T>>,
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    input: Matrix<T>,
    // hidden layers only
    xhat: Option<Matrix<T>>,
    inv_std: Vec<T>,
    // post-BN, pre-ReLU
    pre_act: Option<Matrix<T>>,
    mask: Option<Matrix<T>>,
}

/// Intermediates of a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    layers: Vec<LayerCache<T>>,
    batch_means: Vec<Vec<T>>,
    batch_vars: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Normalized (pre scale/shift) activations of hidden layer `layer`.
    pub fn normalized(&self, layer: usize) -> Option<&Matrix<T>> {
        self.layers.get(layer)?.xhat.as_ref()
    }

    pub fn batch_mean(&self, layer: usize) -> &[T] {
        &self.batch_means[layer]
    }

    pub fn batch_var(&self, layer: usize) -> &[T] {
        &self.batch_vars[layer]
    }
}

impl<T: Scalar> Network<T> {
    /// Fresh network: weights ~ N(0, 2/fan_in), biases 0, batch-norm scale 1,
    /// shift 0, running mean 0, running variance 1.
    pub fn init(config: &ModelConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let widths = config.layer_widths();
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
                let weights = (0..fan_in * fan_out)
                    .map(|_| T::lit(normal.sample(&mut rng)))
                    .collect();
                let norm = (i < last).then(|| BatchNorm {
                    gamma: vec![T::one(); fan_out],
                    beta: vec![T::zero(); fan_out],
                    running_mean: vec![T::zero(); fan_out],
                    running_var: vec![T::one(); fan_out],
                });
                Layer {
                    dense: Dense {
                        in_dim: fan_in,
                        out_dim: fan_out,
                        weights,
                        bias: vec![T::zero(); fan_out],
                    },
                    norm,
                }
            })
            .collect();
        Ok(Self {
            layers,
            dropout_rate: T::lit(config.dropout_rate),
            bn_momentum: T::lit(config.bn_momentum),
            bn_epsilon: T::lit(config.bn_epsilon),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].dense.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").dense.out_dim
    }

    /// Names of trainable tensors, aligned with [`Network::trainable`].
    pub fn trainable_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            names.push(format!("layer{i}.weight"));
            names.push(format!("layer{i}.bias"));
            if layer.norm.is_some() {
                names.push(format!("layer{i}.bn.gamma"));
                names.push(format!("layer{i}.bn.beta"));
            }
        }
        names
    }

    pub fn trainable(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for layer in &self.layers {
            out.push(&layer.dense.weights);
            out.push(&layer.dense.bias);
            if let Some(bn) = &layer.norm {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.dense.weights);
            out.push(&mut layer.dense.bias);
            if let Some(bn) = &mut layer.norm {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    /// Every stored tensor (trainable plus running statistics) with its name
    /// and shape, in serialization order.
    pub fn all_tensors(&self) -> Vec<(String, Vec<usize>, &[T])> {
        let mut out: Vec<(String, Vec<usize>, &[T])> = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let d = &layer.dense;
            out.push((
                format!("layer{i}.weight"),
                vec![d.in_dim, d.out_dim],
                &d.weights,
            ));
            out.push((format!("layer{i}.bias"), vec![d.out_dim], &d.bias));
            if let Some(bn) = &layer.norm {
                out.push((format!("layer{i}.bn.gamma"), vec![d.out_dim], &bn.gamma));
                out.push((format!("layer{i}.bn.beta"), vec![d.out_dim], &bn.beta));
                out.push((
                    format!("layer{i}.bn.running_mean"),
                    vec![d.out_dim],
                    &bn.running_mean,
                ));
                out.push((
                    format!("layer{i}.bn.running_var"),
                    vec![d.out_dim],
                    &bn.running_var,
                ));
            }
        }
        out
    }

    pub fn all_tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.dense.weights);
            out.push(&mut layer.dense.bias);
            if let Some(bn) = &mut layer.norm {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
                out.push(&mut bn.running_mean);
                out.push(&mut bn.running_var);
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let conv = |v: &Vec<T>| {
            v.iter()
                .map(|&x| U::from(x).expect("cast"))
                .collect::<Vec<U>>()
        };
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    dense: Dense {
                        in_dim: l.dense.in_dim,
                        out_dim: l.dense.out_dim,
                        weights: conv(&l.dense.weights),
                        bias: conv(&l.dense.bias),
                    },
                    norm: l.norm.as_ref().map(|bn| BatchNorm {
                        gamma: conv(&bn.gamma),
                        beta: conv(&bn.beta),
                        running_mean: conv(&bn.running_mean),
                        running_var: conv(&bn.running_var),
                    }),
                })
                .collect(),
            dropout_rate: U::from(self.dropout_rate).expect("cast"),
            bn_momentum: U::from(self.bn_momentum).expect("cast"),
            bn_epsilon: U::from(self.bn_epsilon).expect("cast"),
        }
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<(), NeuralError> {
        if x.cols() != self.input_dim() {
            return Err(NeuralError::ShapeMismatch {
                what: "input width",
                expected: self.input_dim(),
                found: x.cols(),
            });
        }
        Ok(())
    }

    /// Inference-mode logits: running statistics, no dropout.
    pub fn infer(&self, x: &Matrix<T>) -> Result<Matrix<T>, NeuralError> {
        self.check_input(x)?;
        let mut act = x.clone();
        for layer in &self.layers {
            let mut z = dense_forward(&layer.dense, &act);
            if let Some(bn) = &layer.norm {
                let scale: Vec<T> = bn
                    .running_var
                    .iter()
                    .zip(&bn.gamma)
                    .map(|(&v, &g)| g / (v + self.bn_epsilon).sqrt())
                    .collect();
                for r in 0..z.rows() {
                    for (j, v) in z.row_mut(r).iter_mut().enumerate() {
                        let y = (*v - bn.running_mean[j]) * scale[j] + bn.beta[j];
                        *v = y.max(T::zero());
                    }
                }
            }
            act = z;
        }
        Ok(act)
    }

    /// Draw inverted-dropout masks for a batch of `rows` examples.
    pub fn sample_masks<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> DropoutMasks<T> {
        let p = self.dropout_rate.to_f64().expect("finite");
        let keep = T::lit(1.0 / (1.0 - p));
        let masks = self
            .layers
            .iter()
            .filter(|l| l.norm.is_some())
            .map(|l| {
                let n = rows * l.dense.out_dim;
                let data = if p == 0.0 {
                    vec![T::one(); n]
                } else {
                    (0..n)
                        .map(|_| {
                            if rng.random::<f64>() < p {
                                T::zero()
                            } else {
                                keep
                            }
                        })
                        .collect()
                };
                Matrix::from_vec(rows, l.dense.out_dim, data)
            })
            .collect();
        DropoutMasks { masks }
    }

    /// Train-mode forward using batch statistics. Does not touch running
    /// statistics; see [`Network::update_running_stats`]. `masks = None`
    /// disables dropout.
    pub fn forward_train(
        &self,
        x: &Matrix<T>,
        masks: Option<&DropoutMasks<T>>,
    ) -> Result<(Matrix<T>, ForwardCache<T>), NeuralError> {
        self.check_input(x)?;
        let batch = x.rows();
        if batch < 2 {
            return Err(NeuralError::BatchTooSmall(batch));
        }
        let bsz = T::lit(batch as f64);
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut means = Vec::new();
        let mut vars = Vec::new();
        let mut act = x.clone();
        let mut hidden = 0;
        for layer in &self.layers {
            let mut z = dense_forward(&layer.dense, &act);
            let Some(bn) = &layer.norm else {
                caches.push(LayerCache {
                    input: act,
                    xhat: None,
                    inv_std: Vec::new(),
                    pre_act: None,
                    mask: None,
                });
                act = z;
                continue;
            };
            let width = z.cols();
            let mut mean = vec![T::zero(); width];
            for row in z.iter_rows() {
                mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v);
            }
            mean.iter_mut().for_each(|m| *m = *m / bsz);
            let mut var = vec![T::zero(); width];
            for row in z.iter_rows() {
                for j in 0..width {
                    let d = row[j] - mean[j];
                    var[j] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v = *v / bsz);
            let inv_std: Vec<T> = var
                .iter()
                .map(|&v| T::one() / (v + self.bn_epsilon).sqrt())
                .collect();

            let mut xhat = Matrix::zeros(batch, width);
            let mut pre = Matrix::zeros(batch, width);
            for r in 0..batch {
                for j in 0..width {
                    let h = (z.row(r)[j] - mean[j]) * inv_std[j];
                    xhat.row_mut(r)[j] = h;
                    pre.row_mut(r)[j] = bn.gamma[j] * h + bn.beta[j];
                }
            }
            let mask = masks.map(|m| m.masks[hidden].clone());
            for r in 0..batch {
                for j in 0..width {
                    let mut v = pre.row(r)[j].max(T::zero());
                    if let Some(m) = &mask {
                        v *= m.row(r)[j];
                    }
                    z.row_mut(r)[j] = v;
                }
            }
            caches.push(LayerCache {
                input: act,
                xhat: Some(xhat),
                inv_std,
                pre_act: Some(pre),
                mask,
            });
            means.push(mean);
            vars.push(var);
            act = z;
            hidden += 1;
        }
        Ok((
            act,
            ForwardCache {
                layers: caches,
                batch_means: means,
                batch_vars: vars,
            },
        ))
    }

    /// Exponential moving average of batch statistics:
    /// `running ← momentum · running + (1 − momentum) · batch`.
    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) {
        let m = self.bn_momentum;
        let one_minus = T::one() - m;
        for (bn, (mean, var)) in self
            .layers
            .iter_mut()
            .filter_map(|l| l.norm.as_mut())
            .zip(cache.batch_means.iter().zip(&cache.batch_vars))
        {
            for j in 0..mean.len() {
                bn.running_mean[j] = m * bn.running_mean[j] + one_minus * mean[j];
                bn.running_var[j] = m * bn.running_var[j] + one_minus * var[j];
            }
        }
    }

    /// Mean softmax cross-entropy and full backpropagated gradients.
    pub fn loss_and_grad(
        &self,
        x: &Matrix<T>,
        labels: &[usize],
        masks: Option<&DropoutMasks<T>>,
    ) -> Result<(T, Grads<T>, ForwardCache<T>), NeuralError> {
        if labels.len() != x.rows() {
            return Err(NeuralError::ShapeMismatch {
                what: "label count",
                expected: x.rows(),
                found: labels.len(),
            });
        }
        let n = self.output_dim();
        if let Some(&bad) = labels.iter().find(|&&l| l >= n) {
            return Err(NeuralError::LabelOutOfRange {
                label: bad,
                n_classes: n,
            });
        }
        let (logits, cache) = self.forward_train(x, masks)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, labels);
        let grads = self.backward(&cache, dlogits);
        Ok((loss, grads, cache))
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(
        &self,
        x: &Matrix<T>,
        labels: &[usize],
        masks: Option<&DropoutMasks<T>>,
    ) -> Result<T, NeuralError> {
        let (logits, _) = self.forward_train(x, masks)?;
        Ok(softmax_cross_entropy(&logits, labels).0)
    }

    fn backward(&self, cache: &ForwardCache<T>, dlogits: Matrix<T>) -> Grads<T> {
        let mut per_layer: Vec<Vec<Vec<T>>> = Vec::with_capacity(self.layers.len());
        let mut grad = dlogits;
        for (li, (layer, lc)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let batch = grad.rows();
            let width = grad.cols();
            let mut tensors = Vec::new();
            let dz = if let Some(bn) = &layer.norm {
                let xhat = lc.xhat.as_ref().expect("hidden cache");
                let pre = lc.pre_act.as_ref().expect("hidden cache");
                // through dropout and ReLU
                for r in 0..batch {
                    for j in 0..width {
                        let mut g = grad.row(r)[j];
                        if let Some(m) = &lc.mask {
                            g *= m.row(r)[j];
                        }
                        if pre.row(r)[j] <= T::zero() {
                            g = T::zero();
                        }
                        grad.row_mut(r)[j] = g;
                    }
                }
                let mut dgamma = vec![T::zero(); width];
                let mut dbeta = vec![T::zero(); width];
                for r in 0..batch {
                    for j in 0..width {
                        dgamma[j] += grad.row(r)[j] * xhat.row(r)[j];
                        dbeta[j] += grad.row(r)[j];
                    }
                }
                // dz = inv_std / B * (B·dxhat − Σdxhat − xhat·Σ(dxhat·xhat)), dxhat = g·gamma
                let bsz = T::lit(batch as f64);
                let mut dz = Matrix::zeros(batch, width);
                for j in 0..width {
                    let sum_dxhat = dbeta[j] * bn.gamma[j];
                    let sum_dxhat_xhat = dgamma[j] * bn.gamma[j];
                    let k = lc.inv_std[j] / bsz;
                    for r in 0..batch {
                        let dxhat = grad.row(r)[j] * bn.gamma[j];
                        dz.row_mut(r)[j] =
                            k * (bsz * dxhat - sum_dxhat - xhat.row(r)[j] * sum_dxhat_xhat);
                    }
                }
                tensors.push(dgamma);
                tensors.push(dbeta);
                dz
            } else {
                grad
            };

            let d = &layer.dense;
            let mut dw = vec![T::zero(); d.in_dim * d.out_dim];
            let mut db = vec![T::zero(); d.out_dim];
            for r in 0..batch {
                let dzr = dz.row(r);
                db.iter_mut().zip(dzr).for_each(|(b, &g)| *b += g);
                for (i, &xi) in lc.input.row(r).iter().enumerate() {
                    if xi == T::zero() {
                        continue;
                    }
                    let row = &mut dw[i * d.out_dim..(i + 1) * d.out_dim];
                    row.iter_mut().zip(dzr).for_each(|(w, &g)| *w += xi * g);
                }
            }
            if li > 0 {
                let mut dx = Matrix::zeros(batch, d.in_dim);
                for r in 0..batch {
                    let dzr = dz.row(r);
                    for (i, out) in dx.row_mut(r).iter_mut().enumerate() {
                        let wrow = &d.weights[i * d.out_dim..(i + 1) * d.out_dim];
                        *out = wrow.iter().zip(dzr).map(|(&w, &g)| w * g).sum();
                    }
                }
                grad = dx;
            } else {
                grad = Matrix::zeros(0, 0);
            }
            // layer order: weight, bias, gamma, beta
            let mut ordered = vec![dw, db];
            ordered.extend(tensors);
            per_layer.push(ordered);
        }
        per_layer.reverse();
        Grads {
            tensors: per_layer.into_iter().flatten().collect(),
        }
    }
}

fn dense_forward<T: Scalar>(d: &Dense<T>, x: &Matrix<T>) -> Matrix<T> {
    let mut z = Matrix::zeros(x.rows(), d.out_dim);
    for r in 0..x.rows() {
        let out = z.row_mut(r);
        out.copy_from_slice(&d.bias);
        for (i, &xi) in x.row(r).iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let wrow = &d.weights[i * d.out_dim..(i + 1) * d.out_dim];
            out.iter_mut().zip(wrow).for_each(|(o, &w)| *o += xi * w);
        }
    }
    z
}

/// Row-wise softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean cross-entropy over rows with log-sum-exp stabilization, and its
/// gradient with respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> (T, Matrix<T>) {
    let batch = logits.rows();
    let bsz = T::lit(batch as f64);
    let mut loss = T::zero();
    let mut grad = Matrix::zeros(batch, logits.cols());
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        loss += lse - row[label];
        let g = grad.row_mut(r);
        for (j, &v) in row.iter().enumerate() {
            g[j] = (v - lse).exp() / bsz;
        }
        g[label] -= T::one() / bsz;
    }
    (loss / bsz, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(input_dim: usize, n: usize) -> ModelConfig {
        ModelConfig {
            seed: 3,
            ..ModelConfig::new(input_dim, n)
        }
    }

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
    }

    #[test]
    fn layer_shapes() {
        let net: Network<f32> = Network::init(&cfg(10, 3)).unwrap();
        let shapes: Vec<(usize, usize)> = net
            .layers
            .iter()
            .map(|l| (l.dense.in_dim, l.dense.out_dim))
            .collect();
        assert_eq!(shapes, vec![(10, 12), (12, 6), (6, 3)]);
        assert!(net.layers[0].norm.is_some() && net.layers[1].norm.is_some());
        assert!(net.layers[2].norm.is_none());
    }

    #[test]
    fn init_is_deterministic() {
        let a: Network<f32> = Network::init(&cfg(20, 4)).unwrap();
        let b: Network<f32> = Network::init(&cfg(20, 4)).unwrap();
        assert_eq!(a, b);
        let c: Network<f32> = Network::init(&ModelConfig {
            seed: 4,
            ..cfg(20, 4)
        })
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_input_inference_is_deterministic() {
        let net: Network<f32> = Network::init(&cfg(8, 3)).unwrap();
        let x = Matrix::zeros(2, 8);
        let a = net.infer(&x).unwrap();
        assert_eq!(a, net.infer(&x).unwrap());
        // zero input: every hidden unit is relu(beta - gamma*mean/sqrt(var+eps)) = 0, logits = final bias
        assert_eq!(a.row(0), &net.layers[2].dense.bias[..]);
    }

    #[test]
    fn batch_norm_moments() {
        let net: Network<f64> = Network::init(&cfg(7, 3)).unwrap();
        let x = random_batch(9, 7, 1);
        let (_, cache) = net.forward_train(&x, None).unwrap();
        for layer in 0..2 {
            let xhat = cache.normalized(layer).unwrap();
            for j in 0..xhat.cols() {
                let col: Vec<f64> = xhat.iter_rows().map(|r| r[j]).collect();
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
                assert!(mean.abs() < 1e-6, "mean {mean}");
                // eps in the denominator shrinks the variance slightly below 1
                let expected = cache.batch_var(layer)[j] / (cache.batch_var(layer)[j] + 1e-5);
                assert!((var - expected).abs() < 1e-6, "var {var} vs {expected}");
                assert!((var - 1.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn no_dropout_train_matches_infer_with_batch_stats() {
        let mut net: Network<f64> = Network::init(&ModelConfig {
            dropout_rate: 0.0,
            ..cfg(6, 3)
        })
        .unwrap();
        let x = random_batch(5, 6, 2);
        let (train_out, cache) = net.forward_train(&x, None).unwrap();
        for (li, bn) in net
            .layers
            .iter_mut()
            .filter_map(|l| l.norm.as_mut())
            .enumerate()
        {
            bn.running_mean = cache.batch_mean(li).to_vec();
            bn.running_var = cache.batch_var(li).to_vec();
        }
        let infer_out = net.infer(&x).unwrap();
        for (a, b) in train_out.as_slice().iter().zip(infer_out.as_slice()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn running_stats_converge() {
        let mut net: Network<f64> = Network::init(&cfg(6, 3)).unwrap();
        let x = random_batch(8, 6, 5);
        let mut last = None;
        for _ in 0..200 {
            let (_, cache) = net.forward_train(&x, None).unwrap();
            net.update_running_stats(&cache);
            last = Some(cache);
        }
        let cache = last.unwrap();
        // first layer's batch moments do not depend on the running stats
        let bn = net.layers[0].norm.as_ref().unwrap();
        for j in 0..bn.running_mean.len() {
            assert!((bn.running_mean[j] - cache.batch_mean(0)[j]).abs() < 1e-3);
            assert!((bn.running_var[j] - cache.batch_var(0)[j]).abs() < 1e-3);
        }
    }

    #[test]
    fn uniform_logits_loss_is_ln_n() {
        let logits = Matrix::from_vec(2, 5, vec![0.3f64; 10]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 4]);
        assert_relative_eq!(loss, 5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn softmax_sums_to_one() {
        let x = random_batch(20, 9, 11);
        for row in x.iter_rows() {
            let scaled: Vec<f64> = row.iter().map(|v| v * 50.0).collect();
            let s: f64 = softmax(&scaled).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn error_paths() {
        let net: Network<f64> = Network::init(&cfg(4, 2)).unwrap();
        assert!(matches!(
            net.forward_train(&random_batch(1, 4, 0), None),
            Err(NeuralError::BatchTooSmall(1))
        ));
        assert!(matches!(
            net.infer(&random_batch(2, 5, 0)),
            Err(NeuralError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            net.loss_and_grad(&random_batch(2, 4, 0), &[0, 2], None),
            Err(NeuralError::LabelOutOfRange { .. })
        ));
        assert!(matches!(
            net.loss_and_grad(&random_batch(1, 4, 0), &[0], None),
            Err(NeuralError::BatchTooSmall(1))
        ));
    }

    #[test]
    fn dropout_masks_use_inverted_scaling() {
        let net: Network<f64> = Network::init(&cfg(4, 5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let masks = net.sample_masks(400, &mut rng);
        assert_eq!(masks.masks.len(), 2);
        let m = &masks.masks[0];
        assert!(m.as_slice().iter().all(|&v| v == 0.0 || v == 2.0));
        let mean = m.as_slice().iter().sum::<f64>() / m.as_slice().len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "mask mean {mean}");
    }
}
