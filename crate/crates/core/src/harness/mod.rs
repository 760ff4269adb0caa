//! Batch experiments: tournaments, parameter sweeps, checkpoint evaluation
//! and the statistics and tables built from them.
//!
//! Every cell draws its episodes from a seed derived from the run seed and
//! the participants' ids, so tables are identical for any worker count and
//! any roster order.

mod io;
mod presets;

pub use io::{
    curve_rows, file_sha256, read_curve_csv, read_tournament_csv, read_wide_csv, sigma_rows, utility_rows,
    write_curve_csv, write_sigma_csv, write_tournament_csv, write_utility_csv, write_wide_csv, CurveRow,
    OutputRecord, PoolEntry, PoolManifest, RunManifest, SigmaRow, TournamentRow, UtilityCsvRow,
};
pub use presets::{spec_list, ExperimentPreset, PsroSettings, PRESET_NAMES};

use crate::engine::GameConfig;
use crate::exec::{try_map_indexed, Workers};
use crate::heuristics::{HeuristicError, HeuristicSpec};
use crate::learner::{LearnerError, PolicyCheckpoint, PolicySource};
use crate::metagame::{evaluate_against_pool, play_episode, MetagameError, PolicyPool};
use crate::seed::{derive_seed, label};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{}", format_spec_errors(.0))]
    Specs(Vec<HeuristicError>),
    #[error("{0}")]
    Config(String),
    #[error("cannot summarize an empty sample")]
    EmptySample,
    #[error("malformed table: {0}")]
    Table(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Metagame(#[from] MetagameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_spec_errors(errs: &[HeuristicError]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Parses every spec and reports all failures together.
pub fn parse_specs<S: AsRef<str>>(specs: &[S]) -> Result<Vec<HeuristicSpec>> {
    let mut ok = Vec::with_capacity(specs.len());
    let mut errs = Vec::new();
    for s in specs {
        match s.as_ref().parse::<HeuristicSpec>() {
            Ok(spec) => ok.push(spec),
            Err(e) => errs.push(e),
        }
    }
    if errs.is_empty() {
        Ok(ok)
    } else {
        Err(HarnessError::Specs(errs))
    }
}

/// Splits a comma-separated roster where specs may themselves contain
/// commas: a fragment of the form `key=value` without a `:` continues the
/// previous spec. `;` always separates.
pub fn split_roster(list: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for group in list.split(';') {
        let mut continuing = false;
        for frag in group.split(',') {
            let frag = frag.trim();
            if frag.is_empty() {
                continue;
            }
            let is_param = frag.contains('=') && !frag.contains(':');
            match out.last_mut() {
                Some(last) if continuing && is_param => {
                    last.push(',');
                    last.push_str(frag);
                }
                _ => out.push(frag.to_string()),
            }
            continuing = true;
        }
    }
    out
}

/// Mean, sample standard deviation (n − 1) and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub se: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Result<Stats> {
    let n = values.len();
    if n == 0 {
        return Err(HarnessError::EmptySample);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Stats { mean, std, se: std / (n as f64).sqrt(), count: n })
}

/// One tournament cell. Rewards and ownership are the defender's.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchupResult {
    pub defender: String,
    pub attacker: String,
    pub episodes: usize,
    pub mean: f64,
    pub std: f64,
    pub se: f64,
    pub ownership: f64,
    pub attacker_ownership: f64,
    pub rewards: Vec<f64>,
    pub ownerships: Vec<f64>,
}

impl MatchupResult {
    fn from_episodes(defender: String, attacker: String, eps: &[crate::metagame::EpisodeSummary]) -> Result<Self> {
        let rewards: Vec<f64> = eps.iter().map(|e| e.reward[0]).collect();
        let ownerships: Vec<f64> = eps.iter().map(|e| e.ownership[0]).collect();
        let s = summarize(&rewards)?;
        let ownership = summarize(&ownerships)?.mean;
        let attacker_ownership = eps.iter().map(|e| e.ownership[1]).sum::<f64>() / eps.len() as f64;
        Ok(MatchupResult {
            defender,
            attacker,
            episodes: eps.len(),
            mean: s.mean,
            std: s.std,
            se: s.se,
            ownership,
            attacker_ownership,
            rewards,
            ownerships,
        })
    }

    pub fn row(&self) -> TournamentRow {
        TournamentRow {
            defender: self.defender.clone(),
            attacker: self.attacker.clone(),
            episodes: self.episodes,
            mean: self.mean,
            std: self.std,
            se: self.se,
            ownership: self.ownership,
            attacker_ownership: self.attacker_ownership,
        }
    }
}

/// Defender × attacker results, row-major by defender.
#[derive(Debug, Clone, PartialEq)]
pub struct Tournament {
    pub defenders: Vec<HeuristicSpec>,
    pub attackers: Vec<HeuristicSpec>,
    pub episodes: usize,
    pub cells: Vec<MatchupResult>,
}

impl Tournament {
    pub fn cell(&self, defender: usize, attacker: usize) -> &MatchupResult {
        &self.cells[defender * self.attackers.len() + attacker]
    }

    /// Looks a cell up by spec.
    pub fn find(&self, defender: &HeuristicSpec, attacker: &HeuristicSpec) -> Option<&MatchupResult> {
        let d = self.defenders.iter().position(|s| s == defender)?;
        let a = self.attackers.iter().position(|s| s == attacker)?;
        Some(self.cell(d, a))
    }

    pub fn rows(&self) -> Vec<TournamentRow> {
        self.cells.iter().map(MatchupResult::row).collect()
    }

    /// Mean defender reward as a defender-by-attacker grid with row averages.
    pub fn mean_matrix(&self) -> WideTable {
        let cols = display_names(&self.attackers);
        let rows = display_names(&self.defenders)
            .into_iter()
            .enumerate()
            .map(|(d, name)| {
                WideRow::new(name, (0..self.attackers.len()).map(|a| self.cell(d, a).mean).collect())
            })
            .collect();
        WideTable { columns: cols, rows }
    }
}

/// Short names (`P(4)`), falling back to full spec strings when two
/// entries would share a short name.
pub fn display_names(specs: &[HeuristicSpec]) -> Vec<String> {
    let short: Vec<String> = specs.iter().map(HeuristicSpec::short_name).collect();
    let mut sorted = short.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() == short.len() {
        short
    } else {
        specs.iter().map(ToString::to_string).collect()
    }
}

/// Seed of the (defender, attacker) cell; depends only on the two ids.
pub fn cell_seed(seed: u64, defender: &str, attacker: &str) -> u64 {
    derive_seed(seed, &[label(defender), label(attacker)])
}

/// Plays every defender against every attacker for `episodes` episodes.
pub fn tournament(
    defenders: &[HeuristicSpec],
    attackers: &[HeuristicSpec],
    game: &GameConfig,
    episodes: usize,
    seed: u64,
    workers: Workers,
) -> Result<Tournament> {
    if episodes == 0 {
        return Err(HarnessError::Config("tournament needs at least one episode per cell".into()));
    }
    if defenders.is_empty() || attackers.is_empty() {
        return Err(HarnessError::Config("tournament needs at least one defender and one attacker".into()));
    }
    let errs: Vec<HeuristicError> =
        defenders.iter().chain(attackers).filter_map(|s| s.validate().err()).collect();
    if !errs.is_empty() {
        return Err(HarnessError::Specs(errs));
    }
    game.validate().map_err(|e| HarnessError::Config(e.to_string()))?;

    let d_ids: Vec<String> = defenders.iter().map(ToString::to_string).collect();
    let a_ids: Vec<String> = attackers.iter().map(ToString::to_string).collect();
    let na = attackers.len();
    let seeds: Vec<u64> =
        (0..defenders.len() * na).map(|c| cell_seed(seed, &d_ids[c / na], &a_ids[c % na])).collect();
    let flat = try_map_indexed(workers, seeds.len() * episodes, |k| {
        let (c, i) = (k / episodes, k % episodes);
        play_episode(&defenders[c / na], &attackers[c % na], game, derive_seed(seeds[c], &[i as u64]))
    })?;
    let cells = flat
        .chunks(episodes)
        .enumerate()
        .map(|(c, eps)| MatchupResult::from_episodes(d_ids[c / na].clone(), a_ids[c % na].clone(), eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tournament { defenders: defenders.to_vec(), attackers: attackers.to_vec(), episodes, cells })
}

/// A family of heuristics with one braced parameter grid, e.g.
/// `pac:phase={2,4,8}` or `awake:lambda={0.05,0.5}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFamily {
    pub prefix: String,
    pub values: Vec<String>,
    pub suffix: String,
}

impl SweepFamily {
    pub fn parse(template: &str) -> Result<Self> {
        let bad = |why: &str| HarnessError::Config(format!("sweep template `{template}`: {why}"));
        let open = template.find('{').ok_or_else(|| bad("missing `{...}` grid"))?;
        let close = template[open..].find('}').map(|i| i + open).ok_or_else(|| bad("unclosed `{`"))?;
        let values: Vec<String> =
            template[open + 1..close].split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(bad("empty grid"));
        }
        let suffix = &template[close + 1..];
        if suffix.contains('{') {
            return Err(bad("only one grid per family"));
        }
        Ok(SweepFamily { prefix: template[..open].to_string(), values, suffix: suffix.to_string() })
    }

    pub fn expand(&self) -> Result<Vec<HeuristicSpec>> {
        let specs: Vec<String> = self.values.iter().map(|v| format!("{}{v}{}", self.prefix, self.suffix)).collect();
        parse_specs(&specs)
    }
}

/// Expands every family (in order) and plays the grid against `opponents`,
/// or against the expanded roster itself when `opponents` is `None`.
pub fn parameter_sweep(
    families: &[SweepFamily],
    opponents: Option<&[HeuristicSpec]>,
    game: &GameConfig,
    episodes: usize,
    seed: u64,
    workers: Workers,
) -> Result<Tournament> {
    if families.is_empty() {
        return Err(HarnessError::Config("sweep grid is empty".into()));
    }
    let mut roster = Vec::new();
    let mut errs = Vec::new();
    for f in families {
        match f.expand() {
            Ok(v) => roster.extend(v),
            Err(HarnessError::Specs(e)) => errs.extend(e),
            Err(e) => return Err(e),
        }
    }
    if !errs.is_empty() {
        return Err(HarnessError::Specs(errs));
    }
    let opponents = opponents.map_or_else(|| roster.clone(), <[_]>::to_vec);
    tournament(&roster, &opponents, game, episodes, seed, workers)
}

/// One evaluated opponent.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub opponent: HeuristicSpec,
    pub reward: Stats,
    /// Mean defender ownership fraction in [0, 1].
    pub ownership: f64,
}

/// A policy evaluated as defender against a roster.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub policy: String,
    pub episodes: usize,
    pub cells: Vec<EvalCell>,
}

impl EvalRow {
    pub fn avg_reward(&self) -> f64 {
        self.cells.iter().map(|c| c.reward.mean).sum::<f64>() / self.cells.len() as f64
    }

    pub fn avg_ownership(&self) -> f64 {
        self.cells.iter().map(|c| c.ownership).sum::<f64>() / self.cells.len() as f64
    }

    pub fn reward_against(&self, opponent: &HeuristicSpec) -> Option<f64> {
        self.cells.iter().find(|c| &c.opponent == opponent).map(|c| c.reward.mean)
    }

    pub fn opponents(&self) -> Vec<HeuristicSpec> {
        self.cells.iter().map(|c| c.opponent).collect()
    }
}

/// Evaluates any policy source as defender. Opponent `o` uses
/// `member_seed(seed, o)`, so different policies face identical streams.
pub fn evaluate_policy(
    name: &str,
    policy: &dyn PolicySource,
    opponents: &[HeuristicSpec],
    game: &GameConfig,
    episodes: usize,
    seed: u64,
    workers: Workers,
) -> Result<EvalRow> {
    let pool = PolicyPool::from_specs(opponents)?;
    let evals = evaluate_against_pool(policy, &pool, game, episodes, seed, workers)?;
    let cells = opponents
        .iter()
        .zip(evals)
        .map(|(o, e)| Ok(EvalCell { opponent: *o, reward: summarize(&e.rewards)?, ownership: e.mean_ownership() }))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalRow { policy: name.to_string(), episodes, cells })
}

pub fn evaluate_checkpoint(
    checkpoint: &PolicyCheckpoint,
    opponents: &[HeuristicSpec],
    game: &GameConfig,
    episodes: usize,
    seed: u64,
    workers: Workers,
) -> Result<EvalRow> {
    checkpoint.check_compatible(game)?;
    evaluate_policy(&checkpoint.provenance.name, checkpoint, opponents, game, episodes, seed, workers)
}

/// Opponents never seen in training: other phases and burst shapes.
pub fn transfer_roster() -> Vec<HeuristicSpec> {
    vec![
        HeuristicSpec::periodic(6),
        HeuristicSpec::periodic(8),
        HeuristicSpec::burst(8, 6),
        HeuristicSpec::burst(16, 3),
        HeuristicSpec::periodic_check(8),
        HeuristicSpec::pac(6),
        HeuristicSpec::pac(8),
    ]
}

pub fn transfer_eval(
    checkpoint: &PolicyCheckpoint,
    unseen: Option<&[HeuristicSpec]>,
    game: &GameConfig,
    episodes: usize,
    seed: u64,
    workers: Workers,
) -> Result<EvalRow> {
    let roster = unseen.map_or_else(transfer_roster, <[_]>::to_vec);
    evaluate_checkpoint(checkpoint, &roster, game, episodes, seed, workers)
}

/// Which number an evaluation table reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Reward,
    /// Ownership as a percentage.
    OwnershipPct,
}

/// Rows of evaluations against a shared roster, with an average column.
pub fn eval_table(rows: &[EvalRow], metric: Metric) -> Result<WideTable> {
    let first = rows.first().ok_or_else(|| HarnessError::Table("no rows".into()))?;
    let opponents = first.opponents();
    if rows.iter().any(|r| r.opponents() != opponents) {
        return Err(HarnessError::Table("rows were evaluated against different rosters".into()));
    }
    let rows = rows
        .iter()
        .map(|r| {
            let v = r
                .cells
                .iter()
                .map(|c| match metric {
                    Metric::Reward => c.reward.mean,
                    Metric::OwnershipPct => 100.0 * c.ownership,
                })
                .collect();
            WideRow::new(r.policy.clone(), v)
        })
        .collect();
    Ok(WideTable { columns: display_names(&opponents), rows })
}

/// A named row of values plus their average.
#[derive(Debug, Clone, PartialEq)]
pub struct WideRow {
    pub name: String,
    pub values: Vec<f64>,
    pub avg: f64,
}

impl WideRow {
    pub fn new(name: String, values: Vec<f64>) -> Self {
        let avg = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
        WideRow { name, values, avg }
    }
}

/// `policy, <columns...>, avg` table.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTable {
    pub columns: Vec<String>,
    pub rows: Vec<WideRow>,
}

impl WideTable {
    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).chain([6]).max().unwrap_or(6);
        let colw: Vec<usize> = self.columns.iter().map(|c| c.len().max(7)).collect();
        let mut s = format!("{:<width$}", "");
        for (c, w) in self.columns.iter().zip(&colw) {
            s += &format!(" {c:>w$}");
        }
        s += &format!(" {:>7}\n", "avg");
        for r in &self.rows {
            s += &format!("{:<width$}", r.name);
            for (v, w) in r.values.iter().zip(&colw) {
                s += &format!(" {v:>w$.1}");
            }
            s += &format!(" {:>7.1}\n", r.avg);
        }
        s
    }
}
