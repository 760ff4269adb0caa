//! Named, self-describing experiment bundles.

use serde::{Deserialize, Serialize};

use crate::engine::{ActionCosts, GameConfig};
use crate::heuristics::HeuristicSpec;
use crate::learner::TrainConfig;
use crate::metagame::PolicyPool;

use super::{transfer_roster, HarnessError, Result};

pub const PRESET_NAMES: &[&str] = &["paper-default", "cheap-check", "self-play", "table2", "desk", "smoke"];

/// Serializes spec lists as their canonical strings.
pub mod spec_list {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::heuristics::HeuristicSpec;

    pub fn serialize<S: Serializer>(v: &[HeuristicSpec], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(ToString::to_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<HeuristicSpec>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| s.parse().map_err(D::Error::custom)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsroSettings {
    pub eval_episodes: usize,
    pub final_eval_episodes: usize,
    pub temperature: f64,
    pub self_play: bool,
    /// Opponent order for iterated best response.
    #[serde(with = "spec_list")]
    pub ibr_order: Vec<HeuristicSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPreset {
    pub name: String,
    pub description: String,
    pub game: GameConfig,
    #[serde(with = "spec_list")]
    pub defenders: Vec<HeuristicSpec>,
    #[serde(with = "spec_list")]
    pub attackers: Vec<HeuristicSpec>,
    /// Training and evaluation pool.
    #[serde(with = "spec_list")]
    pub pool: Vec<HeuristicSpec>,
    #[serde(with = "spec_list")]
    pub transfer: Vec<HeuristicSpec>,
    /// Episodes per tournament cell.
    pub episodes: usize,
    /// Episodes per opponent when evaluating a checkpoint.
    pub eval_episodes: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub psro: PsroSettings,
}

/// Every heuristic family at its default parameters, plus the two baselines.
fn heuristic_roster() -> Vec<HeuristicSpec> {
    vec![
        HeuristicSpec::SleepOnly,
        HeuristicSpec::Random { flip_prob: 0.33 },
        HeuristicSpec::periodic(4),
        HeuristicSpec::burst(8, 3),
        HeuristicSpec::awakening(0.05),
        HeuristicSpec::retaliating(4),
        HeuristicSpec::periodic_check(4),
        HeuristicSpec::pac(4),
        HeuristicSpec::upac(),
    ]
}

fn ablation_roster() -> Vec<HeuristicSpec> {
    vec![
        HeuristicSpec::awakening(0.05),
        HeuristicSpec::awakening(0.5),
        HeuristicSpec::retaliating(2),
        HeuristicSpec::retaliating(4),
        HeuristicSpec::retaliating(8),
        HeuristicSpec::pac(2),
        HeuristicSpec::pac(4),
        HeuristicSpec::pac(8),
    ]
}

fn ibr_order() -> Vec<HeuristicSpec> {
    vec![
        HeuristicSpec::awakening(0.05),
        HeuristicSpec::burst(8, 3),
        HeuristicSpec::periodic(4),
        HeuristicSpec::periodic_check(4),
        HeuristicSpec::pac(4),
    ]
}

fn with_costs(check: f64, flip: f64) -> GameConfig {
    let mut g = GameConfig::paper_default();
    let c = ActionCosts { sleep: 0.0, check, flip };
    g.costs.defender = c;
    g.costs.attacker = c;
    g
}

impl ExperimentPreset {
    pub fn paper_default() -> Self {
        ExperimentPreset {
            name: "paper-default".into(),
            description: "T=100, one resource, costs 0/1/2, gain 1; full 200-epoch training budget".into(),
            game: GameConfig::paper_default(),
            defenders: heuristic_roster(),
            attackers: heuristic_roster(),
            pool: PolicyPool::default_heuristics(),
            transfer: transfer_roster(),
            episodes: 100,
            eval_episodes: 100,
            seed: 0,
            train: TrainConfig::default(),
            psro: PsroSettings {
                eval_episodes: 100,
                final_eval_episodes: 100,
                temperature: 0.25,
                self_play: false,
                ibr_order: ibr_order(),
            },
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        let mut p = Self::paper_default();
        match name {
            "paper-default" => {}
            "cheap-check" => {
                p.description = "Check costs 1/20 of a Flip (0.1 vs 2)".into();
                p.game = with_costs(0.1, 2.0);
            }
            "self-play" => {
                p.description = "Flip 2, Check 0.1; trained checkpoints join the opponent pool".into();
                p.game = with_costs(0.1, 2.0);
                p.psro.self_play = true;
            }
            "table2" => {
                p.description = "Awakening / Retaliating / PAC parameter grid, 1000 episodes per cell".into();
                p.defenders = ablation_roster();
                p.attackers = ablation_roster();
                p.episodes = 1000;
            }
            "desk" => {
                p.description = "Default game at a reduced 50-epoch training budget".into();
                p.train.total_epochs = 50;
                p.train.entropy_anneal_epochs = 30;
                p.psro.eval_episodes = 20;
            }
            "smoke" => {
                p.description = "Tiny budget for wiring checks; results are not meaningful".into();
                p.defenders = vec![HeuristicSpec::SleepOnly, HeuristicSpec::periodic(4), HeuristicSpec::awakening(0.05)];
                p.attackers = p.defenders.clone();
                p.episodes = 20;
                p.eval_episodes = 10;
                p.train.total_epochs = 5;
                p.train.episodes_per_epoch = 20;
                p.train.entropy_anneal_epochs = 3;
                p.train.hidden = vec![16, 16];
                p.psro.eval_episodes = 5;
                p.psro.final_eval_episodes = 10;
            }
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown preset `{other}` (known: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        }
        p.name = name.into();
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(HarnessError::Config(m));
        self.game.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.train.validate().map_err(HarnessError::from)?;
        if self.episodes == 0 || self.eval_episodes == 0 {
            return cfg("episode counts must be >= 1".into());
        }
        if self.psro.eval_episodes == 0 || self.psro.final_eval_episodes == 0 {
            return cfg("psro episode counts must be >= 1".into());
        }
        if !(self.psro.temperature.is_finite() && self.psro.temperature > 0.0) {
            return cfg(format!("temperature must be > 0, got {}", self.psro.temperature));
        }
        for s in self.defenders.iter().chain(&self.attackers).chain(&self.pool).chain(&self.transfer) {
            s.validate().map_err(|e| HarnessError::Specs(vec![e]))?;
        }
        if self.pool.is_empty() || self.psro.ibr_order.is_empty() {
            return cfg("pool and IBR order must be non-empty".into());
        }
        Ok(())
    }
}
