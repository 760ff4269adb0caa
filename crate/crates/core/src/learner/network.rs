//! Actor-critic perceptrons: a tanh actor trunk feeding a softmax policy head
//! and a separate tanh critic trunk of the same widths feeding a scalar value
//! head. Parameters live in one flat vector so the optimizer and gradient
//! checks can treat them uniformly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
}

/// Offsets of one dense layer inside the flat parameter vector. Weights are
/// row-major `out x in`, followed by `out` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpan {
    pub input: usize,
    pub output: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LayerSpan {
    pub fn param_count(&self) -> usize {
        self.input * self.output + self.output
    }
}

impl NetworkShape {
    pub fn new(obs_dim: usize, action_dim: usize, hidden: Vec<usize>) -> Result<Self, LearnerError> {
        if obs_dim == 0 || action_dim == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(LearnerError::Shape(format!(
                "dimensions must be >= 1 (obs {obs_dim}, actions {action_dim}, hidden {hidden:?})"
            )));
        }
        Ok(NetworkShape { obs_dim, action_dim, hidden })
    }

    /// Actor trunk, policy head, critic trunk, value head.
    pub fn layers(&self) -> Vec<LayerSpan> {
        let mut dims = vec![self.obs_dim];
        dims.extend(&self.hidden);
        let last = *dims.last().unwrap();
        let trunk: Vec<(usize, usize)> = dims.windows(2).map(|w| (w[0], w[1])).collect();
        let mut pairs = trunk.clone();
        pairs.push((last, self.action_dim));
        pairs.extend(trunk);
        pairs.push((last, 1));
        let mut offset = 0;
        pairs
            .into_iter()
            .map(|(input, output)| {
                let span = LayerSpan { input, output, weights: offset, biases: offset + input * output };
                offset += span.param_count();
                span
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(LayerSpan::param_count).sum()
    }

    fn max_width(&self) -> usize {
        self.hidden.iter().copied().max().unwrap_or(0).max(self.action_dim)
    }

    fn depth(&self) -> usize {
        self.hidden.len()
    }
}

/// Network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    shape: NetworkShape,
    layers: Vec<LayerSpan>,
    pub params: Vec<f64>,
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    /// Input followed by each actor trunk activation.
    pub activations: Vec<Vec<f64>>,
    /// Input followed by each critic trunk activation.
    pub critic_activations: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub value: f64,
}

impl Network {
    /// Fan-in scaled uniform init. The policy head is shrunk so initial
    /// action probabilities are close to uniform and the value head starts
    /// near zero. Biases start at zero.
    pub fn init(shape: NetworkShape, seed: u64) -> Self {
        let layers = shape.layers();
        let mut params = vec![0.0; shape.num_params()];
        let mut rng = rng_from(seed);
        let depth = shape.depth();
        for (i, l) in layers.iter().enumerate() {
            let gain = if i == depth {
                0.01
            } else if i == 2 * depth + 1 {
                0.1
            } else {
                1.0
            };
            let bound = gain * (3.0 / l.input as f64).sqrt();
            for w in &mut params[l.weights..l.biases] {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Network { shape, layers, params }
    }

    pub fn from_params(shape: NetworkShape, params: Vec<f64>) -> Result<Self, LearnerError> {
        if params.len() != shape.num_params() {
            return Err(LearnerError::Shape(format!(
                "expected {} parameters, got {}",
                shape.num_params(),
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(LearnerError::NonFinite(format!("parameter {i} is {}", params[i])));
        }
        let layers = shape.layers();
        Ok(Network { shape, layers, params })
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn layer_spans(&self) -> &[LayerSpan] {
        &self.layers
    }

    pub fn check_input(&self, obs: &[f64]) -> Result<(), LearnerError> {
        if obs.len() != self.shape.obs_dim {
            return Err(LearnerError::Shape(format!(
                "observation has length {}, network expects {}",
                obs.len(),
                self.shape.obs_dim
            )));
        }
        Ok(())
    }

    /// Action probabilities and value estimate.
    pub fn policy_forward(&self, obs: &[f64]) -> Result<(Vec<f64>, f64), LearnerError> {
        self.check_input(obs)?;
        let mut cache = ForwardCache::default();
        self.forward(obs, &mut cache);
        Ok((cache.probs, cache.value))
    }

    /// Forward pass into `cache`. `obs` must have length `obs_dim`.
    pub fn forward(&self, obs: &[f64], cache: &mut ForwardCache) {
        let depth = self.shape.depth();
        trunk_forward(&self.params, &self.layers[..depth], obs, &mut cache.activations);
        dense(&self.params, self.layers[depth], &cache.activations[depth], &mut cache.logits);
        trunk_forward(&self.params, &self.layers[depth + 1..2 * depth + 1], obs, &mut cache.critic_activations);
        let mut v = Vec::with_capacity(1);
        dense(&self.params, self.layers[2 * depth + 1], &cache.critic_activations[depth], &mut v);
        cache.value = v[0];
        log_softmax(&cache.logits, &mut cache.log_probs);
        cache.probs.clear();
        cache.probs.extend(cache.log_probs.iter().map(|lp| lp.exp()));
    }

    /// Accumulates parameter gradients for one sample given the loss
    /// derivatives w.r.t. the logits and the value output.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &[f64], d_value: f64, grad: &mut [f64], scratch: &mut Scratch) {
        let depth = self.shape.depth();
        let width = self.shape.max_width();
        scratch.delta.clear();
        scratch.delta.resize(width, 0.0);
        scratch.next.clear();
        scratch.next.resize(width, 0.0);
        let actor = &self.layers[..=depth];
        trunk_backward(&self.params, actor, &cache.activations, d_logits, grad, scratch);
        let critic = &self.layers[depth + 1..];
        trunk_backward(&self.params, critic, &cache.critic_activations, &[d_value], grad, scratch);
    }
}

fn trunk_forward(params: &[f64], layers: &[LayerSpan], obs: &[f64], acts: &mut Vec<Vec<f64>>) {
    acts.resize_with(layers.len() + 1, Vec::new);
    acts[0].clear();
    acts[0].extend_from_slice(obs);
    for (li, &l) in layers.iter().enumerate() {
        let (prev, rest) = acts.split_at_mut(li + 1);
        let out = &mut rest[0];
        dense(params, l, &prev[li], out);
        out.iter_mut().for_each(|v| *v = v.tanh());
    }
}

/// Backprop through tanh trunk `layers[..n-1]` and linear head `layers[n-1]`.
fn trunk_backward(
    params: &[f64],
    layers: &[LayerSpan],
    acts: &[Vec<f64>],
    d_out: &[f64],
    grad: &mut [f64],
    scratch: &mut Scratch,
) {
    let depth = layers.len() - 1;
    let h = &acts[depth];
    let dh = &mut scratch.delta[..h.len()];
    dh.fill(0.0);
    accumulate_layer(params, layers[depth], h, d_out, grad, Some(dh));
    for li in (0..depth).rev() {
        let l = layers[li];
        let out = &acts[li + 1];
        let dz = &mut scratch.delta[..l.output];
        for (d, a) in dz.iter_mut().zip(out) {
            *d *= 1.0 - a * a;
        }
        let input = &acts[li];
        if li == 0 {
            accumulate_layer(params, l, input, &scratch.delta[..l.output], grad, None);
        } else {
            let dx = &mut scratch.next[..l.input];
            dx.fill(0.0);
            accumulate_layer(params, l, input, &scratch.delta[..l.output], grad, Some(dx));
            std::mem::swap(&mut scratch.delta, &mut scratch.next);
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Scratch {
    delta: Vec<f64>,
    next: Vec<f64>,
}

/// `out = W x + b`. Zero inputs are skipped, which makes one-hot
/// observations cheap.
fn dense(params: &[f64], l: LayerSpan, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(&params[l.biases..l.biases + l.output]);
    let w = &params[l.weights..l.biases];
    let sparse = x.iter().filter(|v| **v == 0.0).count() * 2 > x.len();
    if sparse {
        let nz: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        for (o, row) in out.iter_mut().zip(w.chunks_exact(l.input)) {
            *o += nz.iter().map(|&(i, v)| row[i] * v).sum::<f64>();
        }
    } else {
        for (o, row) in out.iter_mut().zip(w.chunks_exact(l.input)) {
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Adds `dz ⊗ x` to the weight gradient and `dz` to the bias gradient; if
/// `dx` is given, adds `Wᵀ dz` to it.
fn accumulate_layer(params: &[f64], l: LayerSpan, x: &[f64], dz: &[f64], grad: &mut [f64], dx: Option<&mut [f64]>) {
    let w = &params[l.weights..l.biases];
    let (gw, gb) = grad[l.weights..l.biases + l.output].split_at_mut(l.input * l.output);
    for (g, d) in gb.iter_mut().zip(dz) {
        *g += d;
    }
    for (row, &d) in gw.chunks_exact_mut(l.input).zip(dz) {
        if d == 0.0 {
            continue;
        }
        for (g, xi) in row.iter_mut().zip(x) {
            *g += d * xi;
        }
    }
    if let Some(dx) = dx {
        for (row, &d) in w.chunks_exact(l.input).zip(dz) {
            if d == 0.0 {
                continue;
            }
            for (acc, wi) in dx.iter_mut().zip(row) {
                *acc += d * wi;
            }
        }
    }
}

pub fn log_softmax(logits: &[f64], out: &mut Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    out.clear();
    out.extend(logits.iter().map(|z| z - lse));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> NetworkShape {
        NetworkShape::new(34, 3, vec![64, 64]).unwrap()
    }

    #[test]
    fn layer_order_and_count() {
        let s = shape();
        let l = s.layers();
        assert_eq!(l.len(), 6);
        assert_eq!((l[2].input, l[2].output), (64, 3));
        assert_eq!((l[3].input, l[3].output), (34, 64));
        assert_eq!((l[5].input, l[5].output), (64, 1));
        assert_eq!(s.num_params(), 2 * (34 * 64 + 64 + 64 * 64 + 64) + 64 * 3 + 3 + 64 + 1);
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(Network::init(shape(), 5).params, Network::init(shape(), 5).params);
        assert_ne!(Network::init(shape(), 5).params, Network::init(shape(), 6).params);
    }

    #[test]
    fn zero_input_gives_finite_distribution() {
        let net = Network::init(shape(), 1);
        let (p, v) = net.policy_forward(&[0.0; 34]).unwrap();
        assert_eq!(p.len(), 3);
        assert!(v.is_finite() && v.abs() < 1.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|x| *x > 0.2), "initial policy should be near uniform: {p:?}");
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let net = Network::init(shape(), 1);
        assert!(matches!(net.policy_forward(&[0.0; 33]), Err(LearnerError::Shape(_))));
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let net = Network::init(NetworkShape::new(6, 3, vec![5]).unwrap(), 2);
        let l = net.layer_spans()[0];
        let sparse_x = [0.0, 1.0, 0.0, 0.0, 0.0, 0.5];
        let dense_x = [0.3, 1.0, -0.2, 0.1, 0.7, 0.5];
        for x in [sparse_x, dense_x] {
            let mut out = Vec::new();
            dense(&net.params, l, &x, &mut out);
            for (j, o) in out.iter().enumerate() {
                let expected: f64 = net.params[l.biases + j]
                    + (0..6).map(|i| net.params[l.weights + j * 6 + i] * x[i]).sum::<f64>();
                assert!((o - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn swapping_identical_hidden_units_preserves_output() {
        let s = NetworkShape::new(4, 3, vec![3]).unwrap();
        let mut net = Network::init(s, 9);
        let [a0, lp, c0, lv] = [net.layers[0], net.layers[1], net.layers[2], net.layers[3]];
        // make hidden units 0 and 1 identical in both trunks
        for l in [a0, c0] {
            for i in 0..4 {
                net.params[l.weights + 4 + i] = net.params[l.weights + i];
            }
            net.params[l.biases + 1] = net.params[l.biases];
        }
        let x = [0.2, -1.0, 0.5, 1.0];
        let before = net.policy_forward(&x).unwrap();
        // permute outgoing weights of units 0 and 1 in both heads
        for head in [lp, lv] {
            for o in 0..head.output {
                net.params.swap(head.weights + o * 3, head.weights + o * 3 + 1);
            }
        }
        let after = net.policy_forward(&x).unwrap();
        for (a, b) in before.0.iter().zip(&after.0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((before.1 - after.1).abs() < 1e-12);
    }
}
