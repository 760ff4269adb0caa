//! Clipped-surrogate PPO with GAE advantages and an Adam optimizer.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{ForwardCache, Network, Scratch};
use super::LearnerError;
use crate::exec::{map_indexed, Workers};
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs_per_update: usize,
    pub episodes_per_update: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Entropy coefficient at epoch 0, annealed linearly to `entropy_coef`
    /// over `entropy_anneal_epochs` epochs.
    pub entropy_coef_initial: f64,
    pub entropy_anneal_epochs: usize,
    pub max_grad_norm: Option<f64>,
    pub normalize_advantages: bool,
    pub hidden: Vec<usize>,
    pub total_epochs: usize,
    pub episodes_per_epoch: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub advantage: AdvantageEstimator,
}

/// How advantages and value targets are formed from a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageEstimator {
    /// GAE(gamma, lambda) against the rollout-time critic.
    Gae,
    /// Discounted returns standardized over the buffer; the advantage is the
    /// standardized return minus the rollout-time value.
    #[default]
    NormalizedReturn,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs_per_update: 4,
            episodes_per_update: 10,
            minibatch_size: 1000,
            value_coef: 0.5,
            entropy_coef: 0.01,
            entropy_coef_initial: 0.2,
            entropy_anneal_epochs: 120,
            max_grad_norm: None,
            normalize_advantages: false,
            hidden: vec![64, 64],
            total_epochs: 200,
            episodes_per_epoch: 100,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            advantage: AdvantageEstimator::NormalizedReturn,
        }
    }
}

impl TrainConfig {
    pub fn entropy_coef_at(&self, epoch: usize) -> f64 {
        if epoch >= self.entropy_anneal_epochs {
            return self.entropy_coef;
        }
        let f = epoch as f64 / self.entropy_anneal_epochs as f64;
        self.entropy_coef_initial + f * (self.entropy_coef - self.entropy_coef_initial)
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda must be in (0, 1]");
        }
        if !(self.clip_epsilon > 0.0) {
            return bad("clip_epsilon must be > 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and > 0");
        }
        if self.epochs_per_update == 0
            || self.episodes_per_update == 0
            || self.minibatch_size == 0
            || self.total_epochs == 0
            || self.episodes_per_epoch == 0
        {
            return bad("all counts must be >= 1");
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef_initial >= 0.0 && self.value_coef >= 0.0) {
            return bad("loss coefficients must be >= 0");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be >= 1");
        }
        Ok(())
    }
}

/// Transitions from whole episodes, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub obs_dim: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// True on the last transition of each episode.
    pub episode_end: Vec<bool>,
}

impl RolloutBuffer {
    pub fn new(obs_dim: usize) -> Self {
        RolloutBuffer { obs_dim, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, obs: &[f64], action: usize, log_prob: f64, reward: f64, value: f64, end: bool) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        self.observations.extend_from_slice(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.episode_end.push(end);
    }

    pub fn extend(&mut self, other: &RolloutBuffer) {
        self.observations.extend_from_slice(&other.observations);
        self.actions.extend_from_slice(&other.actions);
        self.log_probs.extend_from_slice(&other.log_probs);
        self.rewards.extend_from_slice(&other.rewards);
        self.values.extend_from_slice(&other.values);
        self.episode_end.extend_from_slice(&other.episode_end);
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    /// Closes the last episode if the caller forgot to.
    pub fn is_whole(&self) -> bool {
        self.episode_end.last().copied().unwrap_or(false)
    }
}

/// Generalized advantage estimates and returns (`advantages + values`).
/// Nothing is bootstrapped across an episode end.
pub fn compute_advantages(buf: &RolloutBuffer, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>), LearnerError> {
    if buf.is_empty() {
        return Err(LearnerError::EmptyBuffer);
    }
    if !buf.is_whole() {
        return Err(LearnerError::Config("buffer must end on an episode boundary".into()));
    }
    let n = buf.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    let mut next_value = 0.0;
    for t in (0..n).rev() {
        if buf.episode_end[t] {
            running = 0.0;
            next_value = 0.0;
        }
        let delta = buf.rewards[t] + gamma * next_value - buf.values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
        next_value = buf.values[t];
    }
    let returns = adv.iter().zip(&buf.values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Standardized discounted returns and their excess over the stored values.
pub fn normalized_returns(buf: &RolloutBuffer, gamma: f64) -> Result<(Vec<f64>, Vec<f64>), LearnerError> {
    if buf.is_empty() {
        return Err(LearnerError::EmptyBuffer);
    }
    if !buf.is_whole() {
        return Err(LearnerError::Config("buffer must end on an episode boundary".into()));
    }
    let n = buf.len();
    let mut ret = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        if buf.episode_end[t] {
            running = 0.0;
        }
        running = buf.rewards[t] + gamma * running;
        ret[t] = running;
    }
    let mean = ret.iter().sum::<f64>() / n as f64;
    let sd = (ret.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    ret.iter_mut().for_each(|r| *r = (*r - mean) / (sd + 1e-7));
    let adv = ret.iter().zip(&buf.values).map(|(r, v)| r - v).collect();
    Ok((adv, ret))
}

/// Per-sample training targets for the loss.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl From<&TrainConfig> for LossWeights {
    fn from(c: &TrainConfig) -> Self {
        LossWeights { clip_epsilon: c.clip_epsilon, value_coef: c.value_coef, entropy_coef: c.entropy_coef }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

impl std::ops::AddAssign for LossStats {
    fn add_assign(&mut self, o: Self) {
        self.total += o.total;
        self.policy += o.policy;
        self.value += o.value;
        self.entropy += o.entropy;
        self.clip_fraction += o.clip_fraction;
        self.approx_kl += o.approx_kl;
    }
}

impl LossStats {
    pub fn scaled(mut self, s: f64) -> Self {
        self.total *= s;
        self.policy *= s;
        self.value *= s;
        self.entropy *= s;
        self.clip_fraction *= s;
        self.approx_kl *= s;
        self
    }
}

/// Minibatch view into a buffer with precomputed advantages and returns.
pub struct Batch<'a> {
    pub buffer: &'a RolloutBuffer,
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
    pub indices: &'a [usize],
}

const GRAD_CHUNK: usize = 64;

/// Mean PPO loss over the batch and its gradient w.r.t. every parameter:
/// `-min(r A, clip(r) A) + c_v (V - R)^2 - c_e H`.
///
/// The batch is split into fixed chunks whose gradients are summed in order,
/// so the result does not depend on the worker count.
pub fn loss_and_gradient(net: &Network, batch: &Batch<'_>, w: LossWeights, workers: Workers) -> (LossStats, Vec<f64>) {
    let n = batch.indices.len();
    let chunks = n.div_ceil(GRAD_CHUNK);
    let parts = map_indexed(workers, chunks, |c| {
        let idx = &batch.indices[c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(n)];
        chunk_gradient(net, batch, idx, w)
    });
    let mut grad = vec![0.0; net.params.len()];
    let mut stats = LossStats::default();
    for (s, g) in parts {
        stats += s;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    (stats.scaled(inv), grad)
}

fn chunk_gradient(net: &Network, batch: &Batch<'_>, idx: &[usize], w: LossWeights) -> (LossStats, Vec<f64>) {
    let mut grad = vec![0.0; net.params.len()];
    let mut cache = ForwardCache::default();
    let mut scratch = Scratch::default();
    let mut d_logits = Vec::new();
    let mut stats = LossStats::default();
    for &i in idx {
        net.forward(batch.buffer.observation(i), &mut cache);
        let a = batch.buffer.actions[i];
        let adv = batch.advantages[i];
        let log_ratio = cache.log_probs[a] - batch.buffer.log_probs[i];
        let ratio = log_ratio.exp();
        let lo = 1.0 - w.clip_epsilon;
        let hi = 1.0 + w.clip_epsilon;
        let clipped = ratio.clamp(lo, hi);
        let unclipped_obj = ratio * adv;
        let clipped_obj = clipped * adv;
        // d(-min)/d logp_a: the unclipped branch carries gradient unless the
        // clipped one is strictly smaller and the ratio is outside the band
        let d_logp = if unclipped_obj <= clipped_obj || (lo..=hi).contains(&ratio) {
            -adv * ratio
        } else {
            0.0
        };
        let entropy: f64 = -cache.probs.iter().zip(&cache.log_probs).map(|(p, lp)| p * lp).sum::<f64>();
        d_logits.clear();
        d_logits.extend(cache.probs.iter().zip(&cache.log_probs).enumerate().map(|(k, (p, lp))| {
            let onehot = if k == a { 1.0 } else { 0.0 };
            // policy term through log p_a, entropy term through H
            d_logp * (onehot - p) + w.entropy_coef * p * (lp + entropy)
        }));
        let v_err = cache.value - batch.returns[i];
        let d_value = 2.0 * w.value_coef * v_err;
        net.backward(&cache, &d_logits, d_value, &mut grad, &mut scratch);

        let policy = -unclipped_obj.min(clipped_obj);
        stats.policy += policy;
        stats.value += v_err * v_err;
        stats.entropy += entropy;
        stats.total += policy + w.value_coef * v_err * v_err - w.entropy_coef * entropy;
        stats.clip_fraction += f64::from(u8::from((ratio - 1.0).abs() > w.clip_epsilon));
        stats.approx_kl += (ratio - 1.0) - log_ratio;
    }
    (stats, grad)
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam { beta1: cfg.adam_beta1, beta2: cfg.adam_beta2, eps: cfg.adam_eps, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let b1t = 1.0 - self.beta1.powf(self.step as f64);
        let b2t = 1.0 - self.beta2.powf(self.step as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / b1t) / ((*v / b2t).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub grad_norm: f64,
    pub steps: usize,
}

/// One PPO update: `epochs_per_update` shuffled passes over the buffer in
/// minibatches. Aborts without touching `net` if any loss or gradient is
/// non-finite.
pub fn ppo_update(
    net: &mut Network,
    adam: &mut Adam,
    buf: &RolloutBuffer,
    cfg: &TrainConfig,
    shuffle_seed: u64,
    workers: Workers,
) -> Result<UpdateStats, LearnerError> {
    let (mut adv, returns) = match cfg.advantage {
        AdvantageEstimator::Gae => compute_advantages(buf, cfg.gamma, cfg.gae_lambda)?,
        AdvantageEstimator::NormalizedReturn => normalized_returns(buf, cfg.gamma)?,
    };
    if cfg.normalize_advantages && adv.len() > 1 {
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        adv.iter_mut().for_each(|a| *a = (*a - mean) / (sd + 1e-8));
    }
    let weights = LossWeights::from(cfg);
    let mut params = net.params.clone();
    let mut opt = adam.clone();
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut rng = rng_from(shuffle_seed);
    let mut stats = UpdateStats::default();
    let mut work = net.clone();
    for _ in 0..cfg.epochs_per_update {
        order.shuffle(&mut rng);
        for mb in order.chunks(cfg.minibatch_size) {
            work.params.copy_from_slice(&params);
            let batch = Batch { buffer: buf, advantages: &adv, returns: &returns, indices: mb };
            let (loss, mut grad) = loss_and_gradient(&work, &batch, weights, workers);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !loss.total.is_finite() || !norm.is_finite() {
                return Err(LearnerError::NonFinite(format!(
                    "loss {:?}, gradient norm {norm} at optimizer step {}",
                    loss, opt.step
                )));
            }
            if let Some(max) = cfg.max_grad_norm {
                if norm > max {
                    let s = max / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            opt.apply(&mut params, &grad, cfg.learning_rate);
            stats.loss += loss;
            stats.grad_norm += norm;
            stats.steps += 1;
        }
    }
    if let Some(i) = params.iter().position(|p| !p.is_finite()) {
        return Err(LearnerError::NonFinite(format!("parameter {i} diverged")));
    }
    net.params = params;
    *adam = opt;
    let s = 1.0 / stats.steps.max(1) as f64;
    stats.loss = stats.loss.scaled(s);
    stats.grad_norm *= s;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::network::NetworkShape;
    use rand::Rng;

    fn buffer_from(rewards: &[f64], values: &[f64], ends: &[bool]) -> RolloutBuffer {
        let mut b = RolloutBuffer::new(1);
        for i in 0..rewards.len() {
            b.push(&[0.0], 0, 0.0, rewards[i], values[i], ends[i]);
        }
        b
    }

    #[test]
    fn single_step_episode() {
        let b = buffer_from(&[1.0], &[0.0], &[true]);
        let (a, r) = compute_advantages(&b, 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.0]);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn lambda_zero_gives_td_residuals() {
        let rewards = [1.0, -0.5, 2.0, 0.25];
        let values = [0.3, 0.1, -0.7, 0.9];
        let b = buffer_from(&rewards, &values, &[false, false, false, true]);
        let (a, _) = compute_advantages(&b, 0.9, 1e-300).unwrap();
        for t in 0..4 {
            let next = if t == 3 { 0.0 } else { values[t + 1] };
            let td = rewards[t] + 0.9 * next - values[t];
            assert!((a[t] - td).abs() < 1e-12);
        }
    }

    #[test]
    fn three_step_recursion_matches_brute_force() {
        let (g, l) = (0.99, 0.95);
        let r = [1.0, 0.0, 2.0];
        let v = [0.5, -0.25, 1.0];
        let b = buffer_from(&r, &v, &[false, false, true]);
        let (a, ret) = compute_advantages(&b, g, l).unwrap();
        // A_t = sum_k (g l)^k delta_{t+k}
        let delta = |t: usize| r[t] + g * if t + 1 < 3 { v[t + 1] } else { 0.0 } - v[t];
        for t in 0..3 {
            let brute: f64 = (t..3).map(|k| (g * l).powi((k - t) as i32) * delta(k)).sum();
            assert!((a[t] - brute).abs() < 1e-12);
            assert!((ret[t] - (brute + v[t])).abs() < 1e-12);
        }
        assert!((a[2] - 1.0).abs() < 1e-12);
        assert!((a[1] - (1.24 + 0.9405 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn episodes_do_not_leak_into_each_other() {
        let base = buffer_from(&[1.0, 2.0, 3.0], &[0.1, 0.2, 0.3], &[false, false, true]);
        let (a0, _) = compute_advantages(&base, 0.99, 0.95).unwrap();
        let mut extended = base.clone();
        extended.extend(&buffer_from(&[5.0, 5.0], &[0.0, 0.0], &[false, true]));
        let (a1, _) = compute_advantages(&extended, 0.99, 0.95).unwrap();
        assert_eq!(&a1[..3], &a0[..]);
    }

    #[test]
    fn empty_or_partial_buffers_are_rejected() {
        assert!(matches!(compute_advantages(&RolloutBuffer::new(1), 0.99, 0.95), Err(LearnerError::EmptyBuffer)));
        let b = buffer_from(&[1.0], &[0.0], &[false]);
        assert!(compute_advantages(&b, 0.99, 0.95).is_err());
    }

    #[test]
    fn update_is_deterministic() {
        let shape = NetworkShape::new(4, 3, vec![8]).unwrap();
        let mut rng = rng_from(3);
        let mut buf = RolloutBuffer::new(4);
        for i in 0..40 {
            let obs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            buf.push(&obs, i % 3, -1.1, rng.gen_range(-1.0..1.0), 0.0, i % 10 == 9);
        }
        let cfg = TrainConfig { minibatch_size: 16, ..Default::default() };
        let run = || {
            let mut net = Network::init(shape.clone(), 1);
            let mut adam = Adam::new(net.params.len(), &cfg);
            ppo_update(&mut net, &mut adam, &buf, &cfg, 7, Workers::sequential()).unwrap();
            net.params
        };
        let a = run();
        assert_eq!(a, run());
        let mut net = Network::init(shape.clone(), 1);
        let mut adam = Adam::new(net.params.len(), &cfg);
        ppo_update(&mut net, &mut adam, &buf, &cfg, 7, Workers::new(3)).unwrap();
        assert_eq!(a, net.params);
    }

    fn random_batch(net: &Network, n: usize, seed: u64) -> (RolloutBuffer, Vec<f64>, Vec<f64>) {
        let mut rng = rng_from(seed);
        let d = net.shape().obs_dim;
        let a = net.shape().action_dim;
        let mut buf = RolloutBuffer::new(d);
        let mut cache = ForwardCache::default();
        let mut adv = Vec::new();
        let mut ret = Vec::new();
        for i in 0..n {
            let obs: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            net.forward(&obs, &mut cache);
            let act = rng.gen_range(0..a);
            // stale behaviour log-probs put some ratios outside the clip band
            let old = cache.log_probs[act] + rng.gen_range(-0.5..0.5);
            buf.push(&obs, act, old, 0.0, 0.0, i + 1 == n);
            adv.push(rng.gen_range(-2.0..2.0));
            ret.push(rng.gen_range(-3.0..3.0));
        }
        (buf, adv, ret)
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let shape = NetworkShape::new(5, 3, vec![8, 8]).unwrap();
        let mut net = Network::init(shape, 21);
        // larger weights than init so every term has curvature
        for p in net.params.iter_mut() {
            *p *= 3.0;
        }
        let (buf, adv, ret) = random_batch(&net, 24, 2);
        let idx: Vec<usize> = (0..buf.len()).collect();
        let batch = Batch { buffer: &buf, advantages: &adv, returns: &ret, indices: &idx };
        let w = LossWeights { clip_epsilon: 0.2, value_coef: 0.5, entropy_coef: 0.01 };
        let (_, grad) = loss_and_gradient(&net, &batch, w, Workers::sequential());
        assert!(grad.len() >= 100);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (i, &g) in grad.iter().enumerate() {
            let mut plus = net.clone();
            plus.params[i] += h;
            let mut minus = net.clone();
            minus.params[i] -= h;
            let fp = loss_and_gradient(&plus, &batch, w, Workers::sequential()).0.total;
            let fm = loss_and_gradient(&minus, &batch, w, Workers::sequential()).0.total;
            let numeric = (fp - fm) / (2.0 * h);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn zero_advantage_leaves_only_the_entropy_gradient() {
        let net = Network::init(NetworkShape::new(4, 3, vec![6]).unwrap(), 3);
        let (buf, _, ret) = random_batch(&net, 10, 4);
        let adv = vec![0.0; buf.len()];
        let idx: Vec<usize> = (0..buf.len()).collect();
        let batch = Batch { buffer: &buf, advantages: &adv, returns: &ret, indices: &idx };
        let no_entropy = LossWeights { clip_epsilon: 0.2, value_coef: 0.0, entropy_coef: 0.0 };
        let (stats, g) = loss_and_gradient(&net, &batch, no_entropy, Workers::sequential());
        assert!(g.iter().all(|x| x.abs() < 1e-15));
        assert!(stats.policy.abs() < 1e-15);
        let entropy_only = LossWeights { entropy_coef: 0.01, ..no_entropy };
        let (_, g) = loss_and_gradient(&net, &batch, entropy_only, Workers::sequential());
        assert!(g.iter().any(|x| x.abs() > 1e-8));
    }

    #[test]
    fn clipped_branch_carries_no_policy_gradient() {
        let net = Network::init(NetworkShape::new(2, 3, vec![4]).unwrap(), 5);
        let obs = [0.5, -0.3];
        let (p, _) = net.policy_forward(&obs).unwrap();
        let act = 1;
        // behaviour probability half the current one: ratio 2, far above 1.2
        let old = (p[act] / 2.0).ln();
        let mut buf = RolloutBuffer::new(2);
        buf.push(&obs, act, old, 0.0, 0.0, true);
        let w = LossWeights { clip_epsilon: 0.2, value_coef: 0.0, entropy_coef: 0.0 };
        let bias = net.layer_spans()[1].biases;
        let grad_for = |a: f64| {
            let adv = [a];
            let batch = Batch { buffer: &buf, advantages: &adv, returns: &[0.0], indices: &[0] };
            loss_and_gradient(&net, &batch, w, Workers::sequential())
        };
        // positive advantage: min picks the clipped constant 1.2 A
        let (stats, g) = grad_for(1.5);
        assert!(g.iter().all(|x| *x == 0.0));
        assert!((stats.policy + 1.2 * 1.5).abs() < 1e-12);
        assert_eq!(stats.clip_fraction, 1.0);
        // negative advantage: min picks the unclipped 2 A, whose logit
        // gradient is -A r (onehot - p)
        let (_, g) = grad_for(-1.0);
        for k in 0..3 {
            let onehot = if k == act { 1.0 } else { 0.0 };
            let expected = 1.0 * 2.0 * (onehot - p[k]);
            assert!((g[bias + k] - expected).abs() < 1e-9, "logit {k}: {} vs {expected}", g[bias + k]);
        }
    }

    #[test]
    fn bandit_converges_to_the_rewarded_action() {
        let shape = NetworkShape::new(1, 3, vec![16]).unwrap();
        let mut net = Network::init(shape, 0);
        let cfg = TrainConfig { minibatch_size: 64, ..Default::default() };
        let mut adam = Adam::new(net.params.len(), &cfg);
        let mut rng = rng_from(17);
        let mut p0 = 0.0;
        for update in 0..200 {
            let (p, _) = net.policy_forward(&[1.0]).unwrap();
            p0 = p[0];
            if p0 > 0.95 {
                break;
            }
            let mut buf = RolloutBuffer::new(1);
            for _ in 0..64 {
                let u: f64 = rng.gen();
                let a = if u < p[0] { 0 } else if u < p[0] + p[1] { 1 } else { 2 };
                buf.push(&[1.0], a, p[a].ln(), f64::from(u8::from(a == 0)), 0.0, true);
            }
            ppo_update(&mut net, &mut adam, &buf, &cfg, update, Workers::sequential()).unwrap();
        }
        assert!(p0 > 0.95, "p(best) = {p0}");
    }

    #[test]
    fn normalized_returns_are_standardized_per_buffer() {
        // two episodes: rewards [1, 1] and [2]
        let b = buffer_from(&[1.0, 1.0, 2.0], &[0.5, 0.0, 0.0], &[false, true, true]);
        let (adv, ret) = normalized_returns(&b, 0.5).unwrap();
        // raw returns 1.5, 1, 2
        let raw = [1.5, 1.0, 2.0];
        let mean = 1.5;
        let sd = ((0.0 + 0.25 + 0.25) / 3.0f64).sqrt();
        for i in 0..3 {
            assert!((ret[i] - (raw[i] - mean) / (sd + 1e-7)).abs() < 1e-12);
            assert!((adv[i] - (ret[i] - b.values[i])).abs() < 1e-12);
        }
        assert!(normalized_returns(&buffer_from(&[1.0], &[0.0], &[false]), 0.9).is_err());
    }

    #[test]
    fn entropy_schedule_anneals_linearly_then_holds() {
        let c = TrainConfig { entropy_coef: 0.01, entropy_coef_initial: 0.21, entropy_anneal_epochs: 10, ..Default::default() };
        assert_eq!(c.entropy_coef_at(0), 0.21);
        assert!((c.entropy_coef_at(5) - 0.11).abs() < 1e-12);
        assert_eq!(c.entropy_coef_at(10), 0.01);
        assert_eq!(c.entropy_coef_at(500), 0.01);
        let flat = TrainConfig { entropy_anneal_epochs: 0, ..c };
        assert_eq!(flat.entropy_coef_at(0), 0.01);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { gamma: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { clip_epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { episodes_per_update: 0, ..Default::default() }.validate().is_err());
    }
}
