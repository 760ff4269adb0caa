//! PPO best-response learner over the engine's observation encoding.

mod agent;
mod checkpoint;
mod network;
mod ppo;
mod trainer;

pub use agent::{NeuralAgent, OpponentMix, PolicySource, SamplingMode};
pub use checkpoint::{CheckpointMeta, PolicyCheckpoint, Provenance, CHECKPOINT_MAGIC, FORMAT_VERSION};
pub use network::{log_softmax, ForwardCache, LayerSpan, Network, NetworkShape, Scratch};
pub use ppo::{
    compute_advantages, loss_and_gradient, normalized_returns, AdvantageEstimator, ppo_update, Adam, Batch, LossStats, LossWeights, RolloutBuffer,
    TrainConfig, UpdateStats,
};
pub use trainer::{collect_episode, train_against, EpochStats, OpponentReward, TrainOutcome, Trainer, TrainerState};

use crate::engine::EngineError;

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values: {0}")]
    NonFinite(String),
    #[error("rollout buffer is empty")]
    EmptyBuffer,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("checkpoint is for obs_dim {found_obs} / action_dim {found_act}, game needs {want_obs} / {want_act}")]
    Incompatible { found_obs: usize, found_act: usize, want_obs: usize, want_act: usize },
    #[error("episode {episode}: {source}")]
    Episode {
        episode: u64,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
