//! Neural policies as game agents, and opponent mixtures for training.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::PolicyCheckpoint;
use super::network::{ForwardCache, Network};
use super::ppo::RolloutBuffer;
use super::LearnerError;
use crate::engine::{Action, Agent, AgentView};
use crate::heuristics::{HeuristicAgent, HeuristicSpec};
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Sample from the policy distribution.
    #[default]
    Stochastic,
    /// Most probable action, lowest index on ties.
    Greedy,
}

/// Plays a network. When recording, every decision is appended to an
/// internal buffer with zero reward; the trainer fills rewards in afterwards.
pub struct NeuralAgent {
    net: Arc<Network>,
    memory_limit: usize,
    mode: SamplingMode,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    cache: ForwardCache,
    recording: Option<RolloutBuffer>,
}

impl NeuralAgent {
    pub fn new(net: Arc<Network>, memory_limit: usize, mode: SamplingMode) -> Self {
        let obs_dim = net.shape().obs_dim;
        NeuralAgent {
            net,
            memory_limit,
            mode,
            rng: rng_from(0),
            obs: vec![0.0; obs_dim],
            cache: ForwardCache::default(),
            recording: None,
        }
    }

    pub fn from_checkpoint(ckpt: &PolicyCheckpoint, mode: SamplingMode) -> Self {
        NeuralAgent::new(ckpt.network.clone(), ckpt.memory_limit, mode)
    }

    pub fn start_recording(&mut self) {
        self.recording = Some(RolloutBuffer::new(self.obs.len()));
    }

    pub fn take_recording(&mut self) -> Option<RolloutBuffer> {
        self.recording.take()
    }
}

impl fmt::Debug for NeuralAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NeuralAgent").field("shape", self.net.shape()).field("mode", &self.mode).finish()
    }
}

impl Agent for NeuralAgent {
    fn reset(&mut self, seed: u64) {
        self.rng = rng_from(seed);
        if let Some(r) = self.recording.as_mut() {
            *r = RolloutBuffer::new(self.obs.len());
        }
    }

    fn act(&mut self, view: &AgentView) -> Action {
        view.knowledge.write_observation(self.memory_limit, &mut self.obs);
        self.net.forward(&self.obs, &mut self.cache);
        let probs = &self.cache.probs;
        let index = match self.mode {
            SamplingMode::Greedy => {
                let mut best = 0;
                for (i, p) in probs.iter().enumerate() {
                    if *p > probs[best] {
                        best = i;
                    }
                }
                best
            }
            SamplingMode::Stochastic => {
                let u: f64 = self.rng.gen();
                let mut acc = 0.0;
                let mut pick = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                pick
            }
        };
        if let Some(r) = self.recording.as_mut() {
            r.push(&self.obs, index, self.cache.log_probs[index], 0.0, self.cache.value, false);
        }
        Action::decode(index, view.config.num_resources).expect("policy head width equals the action space")
    }
}

/// Anything that can be instantiated as a fresh agent for one episode.
pub trait PolicySource: Send + Sync + fmt::Debug {
    /// Stable identifier used in tables and seed derivation.
    fn id(&self) -> String;
    fn build(&self, seed: u64) -> Result<Box<dyn Agent>, LearnerError>;
}

impl PolicySource for HeuristicSpec {
    fn id(&self) -> String {
        self.to_string()
    }

    fn build(&self, seed: u64) -> Result<Box<dyn Agent>, LearnerError> {
        HeuristicAgent::new(*self, seed)
            .map(|a| Box::new(a) as Box<dyn Agent>)
            .map_err(|e| LearnerError::Config(e.to_string()))
    }
}

impl PolicySource for PolicyCheckpoint {
    fn id(&self) -> String {
        self.provenance.name.clone()
    }

    fn build(&self, seed: u64) -> Result<Box<dyn Agent>, LearnerError> {
        let mut a = NeuralAgent::from_checkpoint(self, SamplingMode::Stochastic);
        a.reset(seed);
        Ok(Box::new(a))
    }
}

/// A distribution over opponent policies.
#[derive(Debug, Clone)]
pub struct OpponentMix {
    pub members: Vec<Arc<dyn PolicySource>>,
    pub weights: Vec<f64>,
}

impl OpponentMix {
    pub fn new(members: Vec<Arc<dyn PolicySource>>, weights: Vec<f64>) -> Result<Self, LearnerError> {
        if members.is_empty() || members.len() != weights.len() {
            return Err(LearnerError::Config(format!(
                "{} opponents with {} weights",
                members.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(LearnerError::Config(format!("invalid opponent weights {weights:?}")));
        }
        Ok(OpponentMix { members, weights })
    }

    pub fn single(member: Arc<dyn PolicySource>) -> Self {
        OpponentMix { members: vec![member], weights: vec![1.0] }
    }

    pub fn uniform(members: Vec<Arc<dyn PolicySource>>) -> Result<Self, LearnerError> {
        let n = members.len();
        OpponentMix::new(members, vec![1.0; n])
    }

    /// Index chosen by the uniform draw `u` in [0, 1).
    pub fn pick(&self, u: f64) -> usize {
        let total: f64 = self.weights.iter().sum();
        let mut acc = 0.0;
        let target = u * total;
        let mut last = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            acc += w;
            last = i;
            if target < acc {
                return i;
            }
        }
        last
    }
}
