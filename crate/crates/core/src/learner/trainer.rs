//! Episode collection and the epoch loop.
//!
//! Episode `e` of a run always uses the same derived seeds and the same
//! opponent draw, whichever worker plays it, so a run is a pure function of
//! its seed, its opponent mixtures and its config.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::agent::{NeuralAgent, OpponentMix, PolicySource, SamplingMode};
use super::checkpoint::{PolicyCheckpoint, Provenance};
use super::network::{Network, NetworkShape};
use super::ppo::{ppo_update, Adam, RolloutBuffer, TrainConfig, UpdateStats};
use super::LearnerError;
use crate::engine::{run_episode_with_seeds, EpisodeResult, EpisodeSeeds, GameConfig, Player};
use crate::exec::{try_map_indexed, Workers};
use crate::seed::{derive_seed, rng_from, role};

const EPISODE_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;

/// Plays one recorded episode of the network (as `role`) against `opponent`.
pub fn collect_episode(
    net: &Arc<Network>,
    game: &GameConfig,
    role: Player,
    opponent: &dyn PolicySource,
    seed: u64,
) -> Result<(RolloutBuffer, EpisodeResult), LearnerError> {
    let seeds = EpisodeSeeds::derive(seed);
    let mut learner = NeuralAgent::new(net.clone(), game.memory_limit, SamplingMode::Stochastic);
    learner.start_recording();
    let mut opp = opponent.build(seed)?;
    let result = match role {
        Player::Defender => run_episode_with_seeds(game, &mut learner, opp.as_mut(), seeds, true)?,
        Player::Attacker => run_episode_with_seeds(game, opp.as_mut(), &mut learner, seeds, true)?,
    };
    let mut buf = learner.take_recording().expect("recording was started");
    let trace = result.trace.as_ref().expect("trace was requested");
    for (r, step) in buf.rewards.iter_mut().zip(trace) {
        *r = step.rewards[role.index()];
    }
    if let Some(end) = buf.episode_end.last_mut() {
        *end = true;
    }
    Ok((buf, result))
}

/// Learner reward per opponent within one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpponentReward {
    pub id: String,
    pub episodes: usize,
    /// `None` when the opponent was never drawn.
    pub mean_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub episodes: usize,
    pub mean_reward: f64,
    pub mean_ownership: f64,
    pub per_opponent: Vec<OpponentReward>,
    pub update: UpdateStats,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub config: TrainConfig,
    pub game: GameConfig,
    pub role: Player,
    pub seed: u64,
    pub shape: NetworkShape,
    pub params: Vec<f64>,
    pub adam: Adam,
    pub epoch: usize,
    pub episodes_done: u64,
    pub updates_done: u64,
    pub curve: Vec<EpochStats>,
    /// Opponent index drawn for every episode so far.
    pub opponent_log: Vec<u32>,
}

pub struct Trainer {
    state: TrainerState,
    network: Arc<Network>,
    workers: Workers,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PolicyCheckpoint,
    pub curve: Vec<EpochStats>,
    pub opponent_log: Vec<u32>,
}

impl Trainer {
    pub fn new(
        config: TrainConfig,
        game: GameConfig,
        role: Player,
        seed: u64,
        workers: Workers,
    ) -> Result<Self, LearnerError> {
        config.validate()?;
        game.validate()?;
        let shape = NetworkShape::new(game.obs_dim(), game.action_dim(), config.hidden.clone())?;
        let network = Network::init(shape.clone(), derive_seed(seed, &[role::INIT]));
        let adam = Adam::new(network.params.len(), &config);
        let state = TrainerState {
            config,
            game,
            role,
            seed,
            shape,
            params: network.params.clone(),
            adam,
            epoch: 0,
            episodes_done: 0,
            updates_done: 0,
            curve: Vec::new(),
            opponent_log: Vec::new(),
        };
        Ok(Trainer { state, network: Arc::new(network), workers })
    }

    pub fn from_state(state: TrainerState, workers: Workers) -> Result<Self, LearnerError> {
        state.config.validate()?;
        state.game.validate()?;
        let network = Network::from_params(state.shape.clone(), state.params.clone())?;
        if state.adam.m.len() != state.params.len() || state.adam.v.len() != state.params.len() {
            return Err(LearnerError::Shape("optimizer state does not match parameters".into()));
        }
        Ok(Trainer { state, network: Arc::new(network), workers })
    }

    pub fn state(&self) -> &TrainerState {
        &self.state
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.network
    }

    pub fn epoch(&self) -> usize {
        self.state.epoch
    }

    pub fn curve(&self) -> &[EpochStats] {
        &self.state.curve
    }

    pub fn opponent_log(&self) -> &[u32] {
        &self.state.opponent_log
    }

    /// Opponent index for global episode `e` under `mix`.
    pub fn draw_opponent(&self, mix: &OpponentMix, e: u64) -> usize {
        let mut rng = rng_from(derive_seed(self.state.seed, &[role::OPPONENT_STREAM, e]));
        mix.pick(rng.gen::<f64>())
    }

    /// One epoch: `episodes_per_epoch` episodes with an update after every
    /// `episodes_per_update` of them (and after a final partial group).
    pub fn run_epoch(&mut self, mix: &OpponentMix) -> Result<&EpochStats, LearnerError> {
        let mut cfg = self.state.config.clone();
        cfg.entropy_coef = cfg.entropy_coef_at(self.state.epoch);
        let mut per_opp: Vec<(f64, usize)> = vec![(0.0, 0); mix.members.len()];
        let (mut reward_sum, mut own_sum) = (0.0, 0.0);
        let mut update_acc = UpdateStats::default();
        let mut updates = 0;
        let mut remaining = cfg.episodes_per_epoch;
        while remaining > 0 {
            let n = remaining.min(cfg.episodes_per_update);
            remaining -= n;
            let first = self.state.episodes_done;
            let picks: Vec<usize> = (0..n as u64).map(|k| self.draw_opponent(mix, first + k)).collect();
            let net = self.network.clone();
            let (game, learner_role, seed) = (&self.state.game, self.state.role, self.state.seed);
            let episodes = try_map_indexed(self.workers, n, |k| {
                let e = first + k as u64;
                let s = derive_seed(seed, &[role::TRAIN, EPISODE_STREAM, e]);
                collect_episode(&net, game, learner_role, mix.members[picks[k]].as_ref(), s).map_err(|err| match err {
                    LearnerError::Engine(source) => LearnerError::Episode { episode: e, source },
                    other => other,
                })
            })?;
            let mut buf = RolloutBuffer::new(self.state.shape.obs_dim);
            for ((b, res), &p) in episodes.iter().zip(&picks) {
                buf.extend(b);
                let r = res.reward(learner_role);
                reward_sum += r;
                own_sum += res.mean_ownership(learner_role);
                per_opp[p].0 += r;
                per_opp[p].1 += 1;
                self.state.opponent_log.push(p as u32);
            }
            self.state.episodes_done += n as u64;
            let shuffle = derive_seed(seed, &[role::TRAIN, SHUFFLE_STREAM, self.state.updates_done]);
            let mut net = (*self.network).clone();
            let stats = ppo_update(&mut net, &mut self.state.adam, &buf, &cfg, shuffle, self.workers)?;
            self.state.updates_done += 1;
            self.state.params.clone_from(&net.params);
            self.network = Arc::new(net);
            update_acc.loss += stats.loss;
            update_acc.grad_norm += stats.grad_norm;
            update_acc.steps += stats.steps;
            updates += 1;
        }
        let scale = 1.0 / f64::from(updates.max(1));
        update_acc.grad_norm *= scale;
        update_acc.loss = update_acc.loss.scaled(scale);
        let n = cfg.episodes_per_epoch as f64;
        let stats = EpochStats {
            epoch: self.state.epoch,
            episodes: cfg.episodes_per_epoch,
            mean_reward: reward_sum / n,
            mean_ownership: own_sum / n,
            per_opponent: mix
                .members
                .iter()
                .zip(&per_opp)
                .map(|(m, (sum, count))| OpponentReward {
                    id: m.id(),
                    episodes: *count,
                    mean_reward: (*count > 0).then(|| sum / *count as f64),
                })
                .collect(),
            update: update_acc,
        };
        self.state.epoch += 1;
        self.state.curve.push(stats);
        Ok(self.state.curve.last().expect("just pushed"))
    }

    /// Runs `epochs` epochs against a fixed mixture.
    pub fn train(&mut self, mix: &OpponentMix, epochs: usize) -> Result<(), LearnerError> {
        for _ in 0..epochs {
            self.run_epoch(mix)?;
        }
        Ok(())
    }

    pub fn checkpoint(&self, mut provenance: Provenance) -> Result<PolicyCheckpoint, LearnerError> {
        provenance.epoch = self.state.epoch;
        provenance.seed = self.state.seed;
        provenance.role = self.state.role;
        PolicyCheckpoint::new(&self.network, &self.state.game, provenance)
    }

    pub fn finish(self, provenance: Provenance) -> Result<TrainOutcome, LearnerError> {
        let checkpoint = self.checkpoint(provenance)?;
        Ok(TrainOutcome { checkpoint, curve: self.state.curve, opponent_log: self.state.opponent_log })
    }
}

/// Trains a fresh policy against `mix` for `config.total_epochs` epochs.
pub fn train_against(
    mix: &OpponentMix,
    config: &TrainConfig,
    game: &GameConfig,
    role: Player,
    seed: u64,
    workers: Workers,
    name: &str,
) -> Result<TrainOutcome, LearnerError> {
    let mut t = Trainer::new(config.clone(), game.clone(), role, seed, workers)?;
    t.train(mix, config.total_epochs)?;
    let mut prov = Provenance::new(name, role);
    prov.opponents = mix.members.iter().map(|m| m.id()).collect();
    t.finish(prov)
}
