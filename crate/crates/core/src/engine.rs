//! The PoolFlip game: simultaneous-move resolution over shared resources with
//! stealthy ownership changes.
//!
//! Players only learn who owns a resource when they Flip or Check it. Between
//! such reveals their [`KnowledgeState`] just ages.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{derive_seed, rng_from, role};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("action index {index} out of range for {resources} resource(s) (valid: 0..{})", 1 + 2 * resources)]
    IndexOutOfRange { index: usize, resources: usize },
    #[error("resource {resource} out of range for {resources} resource(s)")]
    ResourceOutOfRange { resource: usize, resources: usize },
    #[error("episode finished: step {step} >= horizon {horizon}")]
    EpisodeFinished { step: u32, horizon: u32 },
    #[error("{player} returned an invalid action at step {step}: {source}")]
    Protocol {
        player: Player,
        step: u32,
        #[source]
        source: Box<EngineError>,
    },
    #[error("trace export failed: {0}")]
    Export(String),
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Defender,
    Attacker,
}

impl Player {
    pub const ALL: [Player; 2] = [Player::Defender, Player::Attacker];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn opponent(self) -> Player {
        match self {
            Player::Defender => Player::Attacker,
            Player::Attacker => Player::Defender,
        }
    }

    pub fn short(self) -> char {
        match self {
            Player::Defender => 'D',
            Player::Attacker => 'A',
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::Defender => "defender",
            Player::Attacker => "attacker",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionCosts {
    pub sleep: f64,
    pub check: f64,
    pub flip: f64,
}

impl ActionCosts {
    pub fn of(&self, action: Action) -> f64 {
        match action {
            Action::Sleep => self.sleep,
            Action::Check(_) => self.check,
            Action::Flip(_) => self.flip,
        }
    }
}

/// A pair of per-player values, indexed by [`Player`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerPlayer<T> {
    pub defender: T,
    pub attacker: T,
}

impl<T: Copy> PerPlayer<T> {
    pub fn both(v: T) -> Self {
        PerPlayer { defender: v, attacker: v }
    }

    pub fn get(&self, p: Player) -> T {
        match p {
            Player::Defender => self.defender,
            Player::Attacker => self.attacker,
        }
    }
}

/// The experiment contract for one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub horizon: u32,
    pub num_resources: usize,
    pub costs: PerPlayer<ActionCosts>,
    /// Gain per owned step, one entry per resource.
    pub gains: Vec<PerPlayer<f64>>,
    pub memory_limit: usize,
    #[serde(default = "default_initial_owner")]
    pub initial_owner: Player,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_initial_owner() -> Player {
    Player::Defender
}

impl GameConfig {
    /// Same costs and gains for both players and every resource.
    pub fn symmetric(
        horizon: u32,
        num_resources: usize,
        costs: ActionCosts,
        gain: f64,
        memory_limit: usize,
    ) -> Self {
        GameConfig {
            horizon,
            num_resources,
            costs: PerPlayer::both(costs),
            gains: vec![PerPlayer::both(gain); num_resources],
            memory_limit,
            initial_owner: Player::Defender,
            base_seed: 0,
        }
    }

    /// 100 steps, one resource, Sleep/Check/Flip costs 0/1/2, gain 1.
    pub fn paper_default() -> Self {
        Self::symmetric(
            100,
            1,
            ActionCosts { sleep: 0.0, check: 1.0, flip: 2.0 },
            1.0,
            16,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.num_resources == 0 {
            return bad("num_resources must be >= 1".into());
        }
        if self.memory_limit == 0 {
            return bad("memory_limit must be >= 1".into());
        }
        if self.gains.len() != self.num_resources {
            return bad(format!(
                "gains has {} entries but num_resources is {}",
                self.gains.len(),
                self.num_resources
            ));
        }
        for p in Player::ALL {
            let c = self.costs.get(p);
            for (name, v) in [("sleep", c.sleep), ("check", c.check), ("flip", c.flip)] {
                if !v.is_finite() || v < 0.0 {
                    return bad(format!("{p} {name} cost must be finite and >= 0, got {v}"));
                }
            }
        }
        for (i, g) in self.gains.iter().enumerate() {
            if !g.defender.is_finite() || !g.attacker.is_finite() {
                return bad(format!("gain of resource {i} must be finite"));
            }
        }
        Ok(())
    }

    pub fn action_dim(&self) -> usize {
        action_space_size(self.num_resources)
    }

    pub fn obs_dim(&self) -> usize {
        observation_size(self.memory_limit, self.num_resources)
    }
}

pub fn action_space_size(resources: usize) -> usize {
    1 + 2 * resources
}

pub fn observation_size(memory_limit: usize, resources: usize) -> usize {
    (2 + 2 * memory_limit) * resources
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Sleep,
    Flip(usize),
    Check(usize),
}

impl Action {
    /// Flat layout: `[Sleep, Flip r0, Check r0, ..., Flip r(R-1), Check r(R-1)]`.
    pub fn encode(self, resources: usize) -> Result<usize> {
        match self {
            Action::Sleep => Ok(0),
            Action::Flip(r) | Action::Check(r) if r >= resources => {
                Err(EngineError::ResourceOutOfRange { resource: r, resources })
            }
            Action::Flip(r) => Ok(1 + 2 * r),
            Action::Check(r) => Ok(2 + 2 * r),
        }
    }

    pub fn decode(index: usize, resources: usize) -> Result<Action> {
        if index >= action_space_size(resources) {
            return Err(EngineError::IndexOutOfRange { index, resources });
        }
        Ok(match index {
            0 => Action::Sleep,
            i if i % 2 == 1 => Action::Flip((i - 1) / 2),
            i => Action::Check((i - 2) / 2),
        })
    }

    pub fn resource(self) -> Option<usize> {
        match self {
            Action::Sleep => None,
            Action::Flip(r) | Action::Check(r) => Some(r),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Action::Sleep => 'S',
            Action::Flip(_) => 'F',
            Action::Check(_) => 'C',
        }
    }

    fn validate(self, resources: usize) -> Result<()> {
        self.encode(resources).map(|_| ())
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Sleep => f.write_str("sleep"),
            Action::Flip(r) => write!(f, "flip:{r}"),
            Action::Check(r) => write!(f, "check:{r}"),
        }
    }
}

/// What a Flip or Check shows: the post-resolution owner and the step at
/// which that owner took control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reveal {
    pub step: u32,
    pub owner: Player,
    pub capture_step: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResourceKnowledge {
    pub last_own_flip: Option<u32>,
    pub last_observed_owner: Option<Player>,
    /// Capture step of the opponent, as last revealed to this player.
    pub last_opponent_capture: Option<u32>,
    pub believes_owned: bool,
    pub last_reveal: Option<Reveal>,
}

/// A player's view of the game. Only changes through the player's own
/// Flip/Check actions, apart from the clock advancing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeState {
    pub player: Player,
    /// The step about to be played.
    pub now: u32,
    pub resources: Vec<ResourceKnowledge>,
}

impl KnowledgeState {
    fn initial(player: Player, config: &GameConfig) -> Self {
        let owns = player == config.initial_owner;
        let rk = ResourceKnowledge {
            believes_owned: owns,
            last_observed_owner: owns.then_some(player),
            ..Default::default()
        };
        KnowledgeState { player, now: 0, resources: vec![rk; config.num_resources] }
    }

    pub fn time_since_own_flip(&self, resource: usize) -> Option<u32> {
        self.resources[resource].last_own_flip.map(|s| self.now - s)
    }

    pub fn time_since_observed_capture(&self, resource: usize) -> Option<u32> {
        self.resources[resource].last_opponent_capture.map(|s| self.now - s)
    }

    /// The reveal produced by this player's action on the previous step, if any.
    pub fn fresh_reveal(&self, resource: usize) -> Option<Reveal> {
        self.resources[resource]
            .last_reveal
            .filter(|r| r.step + 1 == self.now)
    }

    fn apply_reveal(&mut self, resource: usize, reveal: Reveal) {
        let me = self.player;
        let rk = &mut self.resources[resource];
        rk.last_observed_owner = Some(reveal.owner);
        rk.believes_owned = reveal.owner == me;
        if reveal.owner != me {
            rk.last_opponent_capture = Some(reveal.capture_step);
        }
        rk.last_reveal = Some(reveal);
    }

    /// Writes the one-hot observation into `out`, which must have length
    /// `(2 + 2M) * R`. Per resource: a block of `M + 1` cells for the time
    /// since the own last Flip, then `M + 1` cells for the time since the
    /// last observed opponent capture. Times clamp into `0..M`; the last cell
    /// of each block means never/unknown.
    pub fn write_observation(&self, memory_limit: usize, out: &mut [f64]) {
        let block = memory_limit + 1;
        debug_assert_eq!(out.len(), 2 * block * self.resources.len());
        out.fill(0.0);
        let bucket = |dt: Option<u32>| match dt {
            Some(dt) => (dt as usize).min(memory_limit - 1),
            None => memory_limit,
        };
        for r in 0..self.resources.len() {
            let base = 2 * block * r;
            out[base + bucket(self.time_since_own_flip(r))] = 1.0;
            out[base + block + bucket(self.time_since_observed_capture(r))] = 1.0;
        }
    }

    pub fn observation(&self, memory_limit: usize) -> Vec<f64> {
        let mut v = vec![0.0; observation_size(memory_limit, self.resources.len())];
        self.write_observation(memory_limit, &mut v);
        v
    }
}

/// What an agent sees when asked to act.
#[derive(Debug, Clone, Copy)]
pub struct AgentView<'a> {
    pub player: Player,
    pub knowledge: &'a KnowledgeState,
    pub config: &'a GameConfig,
}

/// The act contract shared by heuristics and trained policies.
pub trait Agent: Send {
    /// Restores the post-construction state for a new episode.
    fn reset(&mut self, seed: u64);
    fn act(&mut self, view: &AgentView<'_>) -> Action;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn reset(&mut self, seed: u64) {
        (**self).reset(seed)
    }
    fn act(&mut self, view: &AgentView<'_>) -> Action {
        (**self).act(view)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub step: u32,
    pub owners: Vec<Player>,
    pub rewards: [f64; 2],
    /// Reveals per player as `(resource, reveal)`.
    pub reveals: [Vec<(usize, Reveal)>; 2],
    /// Whether both players flipped the resource this step.
    pub contested: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct EngineState {
    pub t: u32,
    pub owners: Vec<Player>,
    pub last_capture: Vec<u32>,
    pub knowledge: [KnowledgeState; 2],
    rng: ChaCha8Rng,
}

impl EngineState {
    pub fn new_game(config: &GameConfig, engine_seed: u64) -> Result<Self> {
        config.validate()?;
        let r = config.num_resources;
        Ok(EngineState {
            t: 0,
            owners: vec![config.initial_owner; r],
            last_capture: vec![0; r],
            knowledge: [
                KnowledgeState::initial(Player::Defender, config),
                KnowledgeState::initial(Player::Attacker, config),
            ],
            rng: rng_from(engine_seed),
        })
    }

    pub fn knowledge(&self, p: Player) -> &KnowledgeState {
        &self.knowledge[p.index()]
    }

    pub fn is_finished(&self, config: &GameConfig) -> bool {
        self.t >= config.horizon
    }

    pub fn observe(&self, player: Player, memory_limit: usize) -> Vec<f64> {
        self.knowledge(player).observation(memory_limit)
    }

    /// Resolves one simultaneous move. `actions` is indexed by [`Player`].
    pub fn resolve_step(&mut self, config: &GameConfig, actions: [Action; 2]) -> Result<StepOutcome> {
        if self.t >= config.horizon {
            return Err(EngineError::EpisodeFinished { step: self.t, horizon: config.horizon });
        }
        let r = config.num_resources;
        for p in Player::ALL {
            actions[p.index()].validate(r).map_err(|e| EngineError::Protocol {
                player: p,
                step: self.t,
                source: Box::new(e),
            })?;
        }
        let t = self.t;
        let mut contested = vec![false; r];
        for (i, slot) in contested.iter_mut().enumerate() {
            let contestants: Vec<Player> = Player::ALL
                .into_iter()
                .filter(|p| actions[p.index()] == Action::Flip(i))
                .collect();
            *slot = contestants.len() > 1;
            let prev = self.owners[i];
            if contestants.is_empty() || contestants.contains(&prev) {
                continue;
            }
            let winner = if contestants.len() == 1 {
                contestants[0]
            } else {
                contestants[self.rng.gen_range(0..contestants.len())]
            };
            self.owners[i] = winner;
            self.last_capture[i] = t;
        }

        let mut rewards = [0.0; 2];
        let mut reveals: [Vec<(usize, Reveal)>; 2] = [Vec::new(), Vec::new()];
        for p in Player::ALL {
            let a = actions[p.index()];
            let gain: f64 = (0..r)
                .filter(|&i| self.owners[i] == p)
                .map(|i| config.gains[i].get(p))
                .sum();
            rewards[p.index()] = gain - config.costs.get(p).of(a);
            let k = &mut self.knowledge[p.index()];
            if let Action::Flip(i) = a {
                k.resources[i].last_own_flip = Some(t);
            }
            if let Some(i) = a.resource() {
                let rev = Reveal { step: t, owner: self.owners[i], capture_step: self.last_capture[i] };
                k.apply_reveal(i, rev);
                reveals[p.index()].push((i, rev));
            }
            k.now = t + 1;
        }
        self.t += 1;
        Ok(StepOutcome { step: t, owners: self.owners.clone(), rewards, reveals, contested })
    }
}

/// The per-episode random streams: engine tie-breaks and each agent's own RNG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSeeds {
    pub engine: u64,
    pub defender: u64,
    pub attacker: u64,
}

impl EpisodeSeeds {
    pub fn derive(seed: u64) -> Self {
        EpisodeSeeds {
            engine: derive_seed(seed, &[role::ENGINE]),
            defender: derive_seed(seed, &[role::DEFENDER]),
            attacker: derive_seed(seed, &[role::ATTACKER]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u32,
    pub actions: [Action; 2],
    pub owners: Vec<Player>,
    pub rewards: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub total_reward: [f64; 2],
    /// Owned-step counts, `[player][resource]`.
    pub owned_steps: [Vec<u32>; 2],
    pub flips: [u32; 2],
    pub checks: [u32; 2],
    pub horizon: u32,
    pub seeds: EpisodeSeeds,
    pub trace: Option<Vec<StepRecord>>,
}

impl EpisodeResult {
    pub fn reward(&self, p: Player) -> f64 {
        self.total_reward[p.index()]
    }

    pub fn ownership(&self, p: Player, resource: usize) -> f64 {
        f64::from(self.owned_steps[p.index()][resource]) / f64::from(self.horizon)
    }

    /// Ownership averaged over resources.
    pub fn mean_ownership(&self, p: Player) -> f64 {
        let v = &self.owned_steps[p.index()];
        v.iter().map(|&c| f64::from(c)).sum::<f64>() / (f64::from(self.horizon) * v.len() as f64)
    }
}

/// Plays one episode. `seed` is split into engine, defender and attacker streams.
pub fn run_episode(
    config: &GameConfig,
    defender: &mut dyn Agent,
    attacker: &mut dyn Agent,
    seed: u64,
    record_trace: bool,
) -> Result<EpisodeResult> {
    run_episode_with_seeds(config, defender, attacker, EpisodeSeeds::derive(seed), record_trace)
}

pub fn run_episode_with_seeds(
    config: &GameConfig,
    defender: &mut dyn Agent,
    attacker: &mut dyn Agent,
    seeds: EpisodeSeeds,
    record_trace: bool,
) -> Result<EpisodeResult> {
    let mut state = EngineState::new_game(config, seeds.engine)?;
    defender.reset(seeds.defender);
    attacker.reset(seeds.attacker);
    let r = config.num_resources;
    let mut total = [0.0; 2];
    let mut owned = [vec![0u32; r], vec![0u32; r]];
    let mut flips = [0u32; 2];
    let mut checks = [0u32; 2];
    let mut trace = record_trace.then(|| Vec::with_capacity(config.horizon as usize));
    while !state.is_finished(config) {
        let d = defender.act(&AgentView {
            player: Player::Defender,
            knowledge: state.knowledge(Player::Defender),
            config,
        });
        let a = attacker.act(&AgentView {
            player: Player::Attacker,
            knowledge: state.knowledge(Player::Attacker),
            config,
        });
        let out = state.resolve_step(config, [d, a])?;
        for p in Player::ALL {
            total[p.index()] += out.rewards[p.index()];
            match [d, a][p.index()] {
                Action::Flip(_) => flips[p.index()] += 1,
                Action::Check(_) => checks[p.index()] += 1,
                Action::Sleep => {}
            }
        }
        for (i, o) in out.owners.iter().enumerate() {
            owned[o.index()][i] += 1;
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(StepRecord { step: out.step, actions: [d, a], owners: out.owners, rewards: out.rewards });
        }
    }
    Ok(EpisodeResult {
        total_reward: total,
        owned_steps: owned,
        flips,
        checks,
        horizon: config.horizon,
        seeds,
        trace,
    })
}

/// Fraction of trace steps in which `player` owned `resource` after resolution.
pub fn ownership_fraction(trace: &[StepRecord], player: Player, resource: usize) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    let owned = trace.iter().filter(|s| s.owners[resource] == player).count();
    owned as f64 / trace.len() as f64
}

/// Writes a trace as CSV: one row per step.
pub fn write_trace_csv<W: Write>(trace: &[StepRecord], out: W) -> Result<()> {
    let err = |e: csv::Error| EngineError::Export(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "step",
        "defender_action",
        "attacker_action",
        "owners",
        "defender_reward",
        "attacker_reward",
    ])
    .map_err(err)?;
    for s in trace {
        let owners = s.owners.iter().map(|o| o.short().to_string()).collect::<Vec<_>>().join(";");
        w.write_record([
            s.step.to_string(),
            s.actions[0].to_string(),
            s.actions[1].to_string(),
            owners,
            // `+ 0.0` folds -0 into 0.
            (s.rewards[0] + 0.0).to_string(),
            (s.rewards[1] + 0.0).to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| EngineError::Export(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(r: usize, m: usize) -> GameConfig {
        let mut c = GameConfig::paper_default();
        c.num_resources = r;
        c.gains = vec![PerPlayer::both(1.0); r];
        c.memory_limit = m;
        c
    }

    #[test]
    fn new_game_defender_owns_everything() {
        for r in [1, 3] {
            let c = cfg(r, 4);
            let s = EngineState::new_game(&c, 0).unwrap();
            assert_eq!(s.t, 0);
            assert!(s.owners.iter().all(|&o| o == Player::Defender));
            assert!(s.last_capture.iter().all(|&c| c == 0));
            let att = s.knowledge(Player::Attacker);
            for rk in &att.resources {
                assert_eq!(rk.last_observed_owner, None);
                assert_eq!(rk.last_opponent_capture, None);
                assert_eq!(rk.last_own_flip, None);
                assert!(!rk.believes_owned);
            }
            assert!(s.knowledge(Player::Defender).resources.iter().all(|k| k.believes_owned));
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = cfg(1, 4);
        c.horizon = 0;
        assert!(matches!(EngineState::new_game(&c, 0), Err(EngineError::InvalidConfig(_))));
        let mut c = cfg(1, 4);
        c.num_resources = 0;
        c.gains.clear();
        assert!(EngineState::new_game(&c, 0).is_err());
        let mut c = cfg(1, 4);
        c.memory_limit = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(1, 4);
        c.costs.attacker.flip = f64::NAN;
        assert!(c.validate().is_err());
        // degenerate but legal
        let mut c = cfg(1, 1);
        c.horizon = 1;
        c.gains = vec![PerPlayer::both(0.0)];
        assert!(c.validate().is_ok());
    }

    #[test]
    fn action_layout() {
        assert_eq!(Action::decode(0, 1).unwrap(), Action::Sleep);
        assert_eq!(Action::decode(1, 1).unwrap(), Action::Flip(0));
        assert_eq!(Action::decode(2, 1).unwrap(), Action::Check(0));
        assert!(Action::decode(3, 1).is_err());
        assert_eq!(Action::Check(3).encode(4).unwrap(), 8);
        assert!(Action::decode(9, 4).is_err());
        assert!(Action::Flip(4).encode(4).is_err());
        for r in 1..=8 {
            for i in 0..action_space_size(r) {
                assert_eq!(Action::decode(i, r).unwrap().encode(r).unwrap(), i);
            }
        }
    }

    #[test]
    fn ownership_resolution_cases() {
        let c = cfg(1, 4);
        let mut s = EngineState::new_game(&c, 1).unwrap();
        let o = s.resolve_step(&c, [Action::Sleep, Action::Sleep]).unwrap();
        assert_eq!(o.owners, vec![Player::Defender]);
        assert_eq!(o.rewards, [1.0, 0.0]);
        let o = s.resolve_step(&c, [Action::Flip(0), Action::Flip(0)]).unwrap();
        assert_eq!(o.owners, vec![Player::Defender]);
        assert!(o.contested[0]);
        let o = s.resolve_step(&c, [Action::Sleep, Action::Flip(0)]).unwrap();
        assert_eq!(o.owners, vec![Player::Attacker]);
        assert_eq!(s.last_capture[0], 2);
        assert_eq!(o.rewards, [0.0, -1.0]);
        assert_eq!(o.reveals[1], vec![(0, Reveal { step: 2, owner: Player::Attacker, capture_step: 2 })]);
        // stealth: the defender learned nothing
        assert!(s.knowledge(Player::Defender).resources[0].believes_owned);
        let o = s.resolve_step(&c, [Action::Check(0), Action::Sleep]).unwrap();
        assert_eq!(o.reveals[0], vec![(0, Reveal { step: 3, owner: Player::Attacker, capture_step: 2 })]);
        assert_eq!(o.rewards[0], -1.0);
        let k = s.knowledge(Player::Defender);
        assert!(!k.resources[0].believes_owned);
        assert_eq!(k.time_since_observed_capture(0), Some(2));
    }

    #[test]
    fn finished_episode_rejects_steps() {
        let mut c = cfg(1, 2);
        c.horizon = 1;
        let mut s = EngineState::new_game(&c, 0).unwrap();
        s.resolve_step(&c, [Action::Sleep, Action::Sleep]).unwrap();
        assert!(matches!(
            s.resolve_step(&c, [Action::Sleep, Action::Sleep]),
            Err(EngineError::EpisodeFinished { .. })
        ));
    }

    #[test]
    fn out_of_range_action_is_a_protocol_error() {
        let c = cfg(1, 2);
        let mut s = EngineState::new_game(&c, 0).unwrap();
        let e = s.resolve_step(&c, [Action::Sleep, Action::Check(1)]).unwrap_err();
        assert!(matches!(e, EngineError::Protocol { player: Player::Attacker, .. }));
    }

    #[test]
    fn observation_examples() {
        let c = cfg(1, 3);
        let mut s = EngineState::new_game(&c, 0).unwrap();
        // never flipped, never observed
        assert_eq!(s.observe(Player::Attacker, 3), vec![0., 0., 0., 1., 0., 0., 0., 1.]);
        s.resolve_step(&c, [Action::Flip(0), Action::Sleep]).unwrap();
        // own flip 1 step ago, opponent capture unknown
        assert_eq!(s.observe(Player::Defender, 3), vec![0., 1., 0., 0., 0., 0., 0., 1.]);
        for _ in 0..6 {
            s.resolve_step(&c, [Action::Sleep, Action::Sleep]).unwrap();
        }
        // 7 steps ago clamps to bucket 2
        assert_eq!(&s.observe(Player::Defender, 3)[..4], &[0., 0., 1., 0.]);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let c = cfg(2, 2);
        let mut s = EngineState::new_game(&c, 0).unwrap();
        let o = s.resolve_step(&c, [Action::Sleep, Action::Flip(1)]).unwrap();
        let rec = StepRecord { step: o.step, actions: [Action::Sleep, Action::Flip(1)], owners: o.owners, rewards: o.rewards };
        let mut buf = Vec::new();
        write_trace_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "step,defender_action,attacker_action,owners,defender_reward,attacker_reward\n0,sleep,flip:1,D;A,1,-1\n"
        );
    }
}
