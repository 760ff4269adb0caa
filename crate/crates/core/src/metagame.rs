//! Flip-PSRO: a policy pool, utilities under three response objectives,
//! meta-strategy solvers, and the IBR and specialist baselines.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{run_episode_with_seeds, EpisodeSeeds, GameConfig, Player};
use crate::exec::{try_map_indexed, Workers};
use crate::heuristics::HeuristicSpec;
use crate::learner::{
    EpochStats, LearnerError, Network, OpponentMix, PolicyCheckpoint, PolicySource, Provenance, TrainConfig,
    TrainOutcome, Trainer, TrainerState,
};
use crate::seed::{derive_seed, label, role};

#[derive(Debug, thiserror::Error)]
pub enum MetagameError {
    #[error("invalid pool: {0}")]
    Pool(String),
    #[error("invalid objective: {0}")]
    Objective(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("evaluation against {member} failed: {source}")]
    Evaluation {
        member: String,
        #[source]
        source: LearnerError,
    },
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: LearnerError,
    },
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

pub type Result<T> = std::result::Result<T, MetagameError>;

#[derive(Debug, Clone)]
pub enum PoolMember {
    Heuristic(HeuristicSpec),
    Policy(Arc<PolicyCheckpoint>),
}

impl PoolMember {
    pub fn id(&self) -> String {
        match self {
            PoolMember::Heuristic(s) => s.to_string(),
            PoolMember::Policy(c) => c.provenance.name.clone(),
        }
    }

    pub fn source(&self) -> Arc<dyn PolicySource> {
        match self {
            PoolMember::Heuristic(s) => Arc::new(*s),
            PoolMember::Policy(c) => c.clone(),
        }
    }
}

/// Ordered opponent pool with unique member ids.
#[derive(Debug, Clone)]
pub struct PolicyPool {
    members: Vec<PoolMember>,
}

impl PolicyPool {
    pub fn new(members: Vec<PoolMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(MetagameError::Pool("pool must not be empty".into()));
        }
        let mut seen = HashSet::new();
        for m in &members {
            if !seen.insert(m.id()) {
                return Err(MetagameError::Pool(format!("duplicate member id {}", m.id())));
            }
        }
        Ok(PolicyPool { members })
    }

    pub fn from_specs(specs: &[HeuristicSpec]) -> Result<Self> {
        for s in specs {
            s.validate().map_err(|e| MetagameError::Pool(e.to_string()))?;
        }
        PolicyPool::new(specs.iter().cloned().map(PoolMember::Heuristic).collect())
    }

    /// Periodic(4), Burst(8,3), Awakening(0.05), PeriodicCheck(4), PAC(4).
    pub fn default_heuristics() -> Vec<HeuristicSpec> {
        vec![
            HeuristicSpec::periodic(4),
            HeuristicSpec::burst(8, 3),
            HeuristicSpec::awakening(0.05),
            HeuristicSpec::periodic_check(4),
            HeuristicSpec::pac(4),
        ]
    }

    pub fn push(&mut self, member: PoolMember) -> Result<()> {
        if self.members.iter().any(|m| m.id() == member.id()) {
            return Err(MetagameError::Pool(format!("duplicate member id {}", member.id())));
        }
        self.members.push(member);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[PoolMember] {
        &self.members
    }

    pub fn ids(&self) -> Vec<String> {
        self.members.iter().map(PoolMember::id).collect()
    }

    pub fn sources(&self) -> Vec<Arc<dyn PolicySource>> {
        self.members.iter().map(PoolMember::source).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseObjective {
    Reward,
    WinRate { threshold: f64 },
    /// Specialist reference reward per pool member, in pool order.
    NormalizedGap { specialist_rewards: Vec<f64> },
}

impl ResponseObjective {
    pub fn validate(&self, pool_len: usize) -> Result<()> {
        match self {
            ResponseObjective::Reward => Ok(()),
            ResponseObjective::WinRate { threshold } => {
                if *threshold > 0.0 && *threshold <= 1.0 {
                    Ok(())
                } else {
                    Err(MetagameError::Objective(format!("win-rate threshold {threshold} is outside (0, 1]")))
                }
            }
            ResponseObjective::NormalizedGap { specialist_rewards } => {
                if specialist_rewards.len() != pool_len {
                    return Err(MetagameError::Objective(format!(
                        "{} specialist references for a pool of {pool_len}",
                        specialist_rewards.len()
                    )));
                }
                if pool_len < 2 {
                    return Err(MetagameError::Objective("normalized gaps need at least 2 members".into()));
                }
                if specialist_rewards.iter().any(|r| !r.is_finite()) {
                    return Err(MetagameError::Objective("specialist references must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            ResponseObjective::Reward => "reward".into(),
            ResponseObjective::WinRate { threshold } => format!("own{:.0}", threshold * 100.0),
            ResponseObjective::NormalizedGap { .. } => "gap".into(),
        }
    }
}

/// Per-episode outcome of a defender/attacker matchup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub reward: [f64; 2],
    pub ownership: [f64; 2],
}

/// Plays `episodes` seeded episodes. Episode `i` uses seed
/// `derive_seed(seed, [i])` regardless of scheduling.
pub fn play_matchup(
    defender: &dyn PolicySource,
    attacker: &dyn PolicySource,
    game: &GameConfig,
    episodes: usize,
    seed: u64,
    workers: Workers,
) -> std::result::Result<Vec<EpisodeSummary>, LearnerError> {
    try_map_indexed(workers, episodes, |i| play_episode(defender, attacker, game, derive_seed(seed, &[i as u64])))
}

/// One seeded episode between two policy sources.
pub fn play_episode(
    defender: &dyn PolicySource,
    attacker: &dyn PolicySource,
    game: &GameConfig,
    seed: u64,
) -> std::result::Result<EpisodeSummary, LearnerError> {
    let seeds = EpisodeSeeds::derive(seed);
    let mut d = defender.build(seeds.defender)?;
    let mut a = attacker.build(seeds.attacker)?;
    let r = run_episode_with_seeds(game, d.as_mut(), a.as_mut(), seeds, false)?;
    Ok(EpisodeSummary {
        reward: r.total_reward,
        ownership: [r.mean_ownership(Player::Defender), r.mean_ownership(Player::Attacker)],
    })
}

/// A policy's results against one pool member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberEval {
    pub member: String,
    pub rewards: Vec<f64>,
    pub ownerships: Vec<f64>,
}

impl MemberEval {
    pub fn mean_reward(&self) -> f64 {
        mean(&self.rewards)
    }

    pub fn mean_ownership(&self) -> f64 {
        mean(&self.ownerships)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Seed for evaluating anything against `member_id`: shared by all
/// evaluated policies so comparisons use common random numbers.
pub fn member_seed(seed: u64, member_id: &str) -> u64 {
    derive_seed(seed, &[role::EVAL, label(member_id)])
}

/// Plays `policy` as defender against every pool member, parallel over
/// (member, episode).
pub fn evaluate_against_pool(
    policy: &dyn PolicySource,
    pool: &PolicyPool,
    game: &GameConfig,
    episodes: usize,
    seed: u64,
    workers: Workers,
) -> Result<Vec<MemberEval>> {
    if episodes == 0 {
        return Err(MetagameError::Config("evaluation needs at least one episode".into()));
    }
    let sources = pool.sources();
    let ids = pool.ids();
    let seeds: Vec<u64> = ids.iter().map(|id| member_seed(seed, id)).collect();
    let n = sources.len() * episodes;
    let flat = try_map_indexed(workers, n, |k| {
        let (m, i) = (k / episodes, k % episodes);
        play_episode(policy, sources[m].as_ref(), game, derive_seed(seeds[m], &[i as u64]))
            .map_err(|source| MetagameError::Evaluation { member: ids[m].clone(), source })
    })?;
    Ok(flat
        .chunks(episodes)
        .zip(ids)
        .map(|(c, member)| MemberEval {
            member,
            rewards: c.iter().map(|e| e.reward[0]).collect(),
            ownerships: c.iter().map(|e| e.ownership[0]).collect(),
        })
        .collect())
}

/// Fraction of episodes whose ownership is strictly above `threshold`.
pub fn win_rate_by_ownership(ownerships: &[f64], threshold: f64) -> f64 {
    if ownerships.is_empty() {
        return 0.0;
    }
    ownerships.iter().filter(|o| **o > threshold).count() as f64 / ownerships.len() as f64
}

pub fn performance_gap(reward: f64, specialist_reward: f64) -> f64 {
    (specialist_reward - reward).max(0.0)
}

/// Min-max normalization; a constant vector maps to zeros.
pub fn normalized_gaps(gaps: &[f64]) -> Vec<f64> {
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; gaps.len()];
    }
    gaps.iter().map(|g| (g - lo) / (hi - lo)).collect()
}

/// Utility of each member's results under `objective`.
pub fn utility_row(evals: &[MemberEval], objective: &ResponseObjective) -> Vec<f64> {
    match objective {
        ResponseObjective::Reward => evals.iter().map(MemberEval::mean_reward).collect(),
        ResponseObjective::WinRate { threshold } => {
            evals.iter().map(|e| win_rate_by_ownership(&e.ownerships, *threshold)).collect()
        }
        ResponseObjective::NormalizedGap { specialist_rewards } => {
            let gaps: Vec<f64> = evals
                .iter()
                .zip(specialist_rewards)
                .map(|(e, rs)| performance_gap(e.mean_reward(), *rs))
                .collect();
            normalized_gaps(&gaps)
        }
    }
}

pub fn evaluate_utilities(
    policy: &dyn PolicySource,
    pool: &PolicyPool,
    objective: &ResponseObjective,
    game: &GameConfig,
    episodes: usize,
    seed: u64,
    workers: Workers,
) -> Result<Vec<f64>> {
    objective.validate(pool.len())?;
    let evals = evaluate_against_pool(policy, pool, game, episodes, seed, workers)?;
    Ok(utility_row(&evals, objective))
}

pub fn mss_uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Softmax over difficulty: `1 - u` for win rate, `u` for normalized gap.
pub fn mss_softmax(row: &[f64], objective: &ResponseObjective, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(MetagameError::Config(format!("temperature must be > 0, got {temperature}")));
    }
    if row.is_empty() {
        return Err(MetagameError::Config("empty utility row".into()));
    }
    let difficulty: Vec<f64> = match objective {
        ResponseObjective::Reward => {
            return Err(MetagameError::Objective("the reward objective uses the uniform solver".into()))
        }
        ResponseObjective::WinRate { .. } => row.iter().map(|u| 1.0 - u).collect(),
        ResponseObjective::NormalizedGap { .. } => row.to_vec(),
    };
    Ok(softmax(&difficulty, temperature))
}

pub fn softmax(x: &[f64], temperature: f64) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| ((v - max) / temperature).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// One utility row: the policy trained in an iteration against the pool as
/// it stood then.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityRow {
    pub iteration: usize,
    pub policy: String,
    pub members: Vec<String>,
    pub values: Vec<f64>,
    pub mean_reward: Vec<f64>,
    pub mean_ownership: Vec<f64>,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UtilityMatrix {
    pub rows: Vec<UtilityRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MssKind {
    Uniform,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsroConfig {
    pub name: String,
    pub iterations: usize,
    /// Per-iteration evaluation episodes per pool member.
    pub eval_episodes: usize,
    /// Episodes per member for the final checkpoint's evaluation.
    pub final_eval_episodes: usize,
    pub objective: ResponseObjective,
    pub temperature: f64,
    pub self_play: bool,
    pub seed: u64,
    pub train: TrainConfig,
    pub game: GameConfig,
    /// Forced σ per iteration, overriding the solver.
    #[serde(default)]
    pub sigma_schedule: Option<Vec<Vec<f64>>>,
}

impl PsroConfig {
    pub fn new(name: &str, objective: ResponseObjective, train: TrainConfig, game: GameConfig, seed: u64) -> Self {
        PsroConfig {
            name: name.into(),
            iterations: train.total_epochs,
            eval_episodes: 100,
            final_eval_episodes: 100,
            objective,
            temperature: 1.0,
            self_play: false,
            seed,
            train,
            game,
            sigma_schedule: None,
        }
    }

    pub fn mss(&self) -> MssKind {
        match self.objective {
            ResponseObjective::Reward => MssKind::Uniform,
            _ => MssKind::Softmax,
        }
    }

    pub fn validate(&self, pool_len: usize) -> Result<()> {
        if self.iterations == 0 || self.eval_episodes == 0 || self.final_eval_episodes == 0 {
            return Err(MetagameError::Config("iteration and episode counts must be >= 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(MetagameError::Config("temperature must be > 0".into()));
        }
        if self.self_play && matches!(self.objective, ResponseObjective::NormalizedGap { .. }) {
            return Err(MetagameError::Config(
                "self-play members have no specialist reference; use the reward or win-rate objective".into(),
            ));
        }
        self.objective.validate(pool_len)?;
        self.train.validate()?;
        if let Some(s) = &self.sigma_schedule {
            if s.len() < self.iterations {
                return Err(MetagameError::Config("sigma schedule shorter than the iteration count".into()));
            }
        }
        Ok(())
    }
}

/// Serializable progress of a run, for `--resume`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsroState {
    pub config: PsroConfig,
    pub iteration: usize,
    pub trainer: TrainerState,
    pub sigma: Vec<f64>,
    pub sigma_history: Vec<Vec<f64>>,
    pub utility: UtilityMatrix,
    /// Parameters of checkpoints appended by self-play, in pool order.
    pub self_play_params: Vec<(String, Vec<f64>)>,
}

pub struct PsroRun {
    config: PsroConfig,
    pool: PolicyPool,
    trainer: Trainer,
    workers: Workers,
    iteration: usize,
    sigma: Vec<f64>,
    sigma_history: Vec<Vec<f64>>,
    utility: UtilityMatrix,
    self_play_params: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct PsroOutcome {
    pub checkpoint: PolicyCheckpoint,
    pub utility: UtilityMatrix,
    pub sigma_history: Vec<Vec<f64>>,
    pub curve: Vec<EpochStats>,
    pub opponent_log: Vec<u32>,
    pub pool_ids: Vec<String>,
    /// Final checkpoint against the starting pool.
    pub final_eval: Vec<MemberEval>,
}

impl PsroRun {
    pub fn new(config: PsroConfig, pool: PolicyPool, workers: Workers) -> Result<Self> {
        config.validate(pool.len())?;
        let trainer = Trainer::new(config.train.clone(), config.game.clone(), Player::Defender, config.seed, workers)?;
        let sigma = mss_uniform(pool.len());
        Ok(PsroRun {
            config,
            pool,
            trainer,
            workers,
            iteration: 0,
            sigma,
            sigma_history: Vec::new(),
            utility: UtilityMatrix::default(),
            self_play_params: Vec::new(),
        })
    }

    /// Rebuilds a run from its state and the starting pool.
    pub fn from_state(state: PsroState, mut pool: PolicyPool, workers: Workers) -> Result<Self> {
        state.config.validate(pool.len())?;
        let trainer = Trainer::from_state(state.trainer, workers)?;
        for (name, params) in &state.self_play_params {
            let net = Network::from_params(trainer.state().shape.clone(), params.clone())?;
            let ckpt = PolicyCheckpoint::new(&net, &state.config.game, Provenance::new(name.clone(), Player::Defender))?;
            pool.push(PoolMember::Policy(Arc::new(ckpt)))?;
        }
        if state.sigma.len() != pool.len() {
            return Err(MetagameError::Config("saved sigma does not match the pool".into()));
        }
        Ok(PsroRun {
            config: state.config,
            pool,
            trainer,
            workers,
            iteration: state.iteration,
            sigma: state.sigma,
            sigma_history: state.sigma_history,
            utility: state.utility,
            self_play_params: state.self_play_params,
        })
    }

    pub fn state(&self) -> PsroState {
        PsroState {
            config: self.config.clone(),
            iteration: self.iteration,
            trainer: self.trainer.state().clone(),
            sigma: self.sigma.clone(),
            sigma_history: self.sigma_history.clone(),
            utility: self.utility.clone(),
            self_play_params: self.self_play_params.clone(),
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    pub fn pool(&self) -> &PolicyPool {
        &self.pool
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Train one iteration against σ, evaluate, extend the pool if
    /// self-playing, and compute the next σ.
    pub fn step(&mut self) -> Result<&UtilityRow> {
        let t = self.iteration;
        let wrap = |source| MetagameError::Iteration { iteration: t, source };
        let sigma = match &self.config.sigma_schedule {
            Some(s) => s[t].clone(),
            None => self.sigma.clone(),
        };
        if sigma.len() != self.pool.len() {
            return Err(MetagameError::Config(format!(
                "sigma for iteration {t} has {} entries, pool has {}",
                sigma.len(),
                self.pool.len()
            )));
        }
        let mix = OpponentMix::new(self.pool.sources(), sigma.clone()).map_err(wrap)?;
        self.trainer.run_epoch(&mix).map_err(wrap)?;
        self.sigma_history.push(sigma);

        let name = format!("{}-iter{}", self.config.name, t);
        let ckpt = self.trainer.checkpoint(self.provenance(&name)).map_err(wrap)?;
        if self.config.self_play {
            self.self_play_params.push((name.clone(), ckpt.network.params.clone()));
            self.pool.push(PoolMember::Policy(Arc::new(ckpt.clone())))?;
        }
        let eval_seed = derive_seed(self.config.seed, &[role::EVAL, t as u64]);
        let evals =
            evaluate_against_pool(&ckpt, &self.pool, &self.config.game, self.config.eval_episodes, eval_seed, self.workers)?;
        let values = utility_row(&evals, &self.config.objective);
        self.sigma = match self.config.mss() {
            MssKind::Uniform => mss_uniform(self.pool.len()),
            MssKind::Softmax => mss_softmax(&values, &self.config.objective, self.config.temperature)?,
        };
        self.utility.rows.push(UtilityRow {
            iteration: t,
            policy: name,
            members: self.pool.ids(),
            values,
            mean_reward: evals.iter().map(MemberEval::mean_reward).collect(),
            mean_ownership: evals.iter().map(MemberEval::mean_ownership).collect(),
            episodes: self.config.eval_episodes,
        });
        self.iteration += 1;
        Ok(self.utility.rows.last().expect("just pushed"))
    }

    fn provenance(&self, name: &str) -> Provenance {
        let mut p = Provenance::new(name, Player::Defender);
        p.opponents = self.pool.ids();
        p.notes.push(format!("objective={}", self.config.objective.name()));
        p.notes.push(format!("temperature={}", self.config.temperature));
        p.notes.push(format!("self_play={}", self.config.self_play));
        p
    }

    /// Runs the remaining iterations and evaluates the final policy against
    /// the first `base_members` pool members (the heuristic pool).
    pub fn run(mut self, base_members: usize) -> Result<PsroOutcome> {
        while !self.is_done() {
            self.step()?;
        }
        self.finish(base_members)
    }

    pub fn finish(self, base_members: usize) -> Result<PsroOutcome> {
        let checkpoint = self.trainer.checkpoint(self.provenance(&self.config.name))?;
        let base = PolicyPool::new(self.pool.members()[..base_members.min(self.pool.len())].to_vec())?;
        let seed = derive_seed(self.config.seed, &[role::EVAL, u64::MAX]);
        let final_eval =
            evaluate_against_pool(&checkpoint, &base, &self.config.game, self.config.final_eval_episodes, seed, self.workers)?;
        Ok(PsroOutcome {
            checkpoint,
            utility: self.utility,
            sigma_history: self.sigma_history,
            curve: self.trainer.curve().to_vec(),
            opponent_log: self.trainer.opponent_log().to_vec(),
            pool_ids: self.pool.ids(),
            final_eval,
        })
    }
}

pub fn flip_psro(config: PsroConfig, pool: PolicyPool, workers: Workers) -> Result<PsroOutcome> {
    let base = pool.len();
    PsroRun::new(config, pool, workers)?.run(base)
}

/// One-hot σ schedule that trains on `order[k]` for `epochs_per_opponent`
/// consecutive iterations.
pub fn ibr_schedule(opponents: usize, epochs_per_opponent: usize) -> Vec<Vec<f64>> {
    (0..opponents * epochs_per_opponent)
        .map(|t| {
            let mut s = vec![0.0; opponents];
            s[t / epochs_per_opponent] = 1.0;
            s
        })
        .collect()
}

/// Iterated best response: one policy trained on each opponent in turn.
pub fn ibr_train(
    order: &[HeuristicSpec],
    epochs_per_opponent: usize,
    train: &TrainConfig,
    game: &GameConfig,
    seed: u64,
    workers: Workers,
) -> Result<TrainOutcome> {
    if order.is_empty() || epochs_per_opponent == 0 {
        return Err(MetagameError::Config("IBR needs at least one opponent and one epoch".into()));
    }
    let pool = PolicyPool::from_specs(order)?;
    let mut trainer = Trainer::new(train.clone(), game.clone(), Player::Defender, seed, workers)?;
    for sigma in ibr_schedule(order.len(), epochs_per_opponent) {
        let mix = OpponentMix::new(pool.sources(), sigma)?;
        trainer.run_epoch(&mix)?;
    }
    let mut prov = Provenance::new("ibr", Player::Defender);
    prov.opponents = pool.ids();
    Ok(trainer.finish(prov)?)
}

/// One independent specialist per heuristic.
pub fn train_specialists(
    specs: &[HeuristicSpec],
    train: &TrainConfig,
    game: &GameConfig,
    seed: u64,
    workers: Workers,
) -> Result<Vec<TrainOutcome>> {
    specs
        .iter()
        .map(|s| {
            let id = s.to_string();
            let mix = OpponentMix::single(Arc::new(*s));
            crate::learner::train_against(
                &mix,
                train,
                game,
                Player::Defender,
                derive_seed(seed, &[label(&id)]),
                workers,
                &format!("specialist-{}", s.short_name()),
            )
            .map_err(MetagameError::from)
        })
        .collect()
}
