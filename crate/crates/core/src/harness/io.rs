//! CSV tables and JSON manifests. Floats are written in shortest
//! round-trip form, so reading a file back reproduces the values exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, Result, WideRow, WideTable};
use crate::learner::EpochStats;
use crate::metagame::UtilityMatrix;

/// One line of `tournament.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentRow {
    pub defender: String,
    pub attacker: String,
    pub episodes: usize,
    pub mean: f64,
    pub std: f64,
    pub se: f64,
    pub ownership: f64,
    pub attacker_ownership: f64,
}

pub fn write_tournament_csv<W: Write>(rows: &[TournamentRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_tournament_csv<R: Read>(input: R) -> Result<Vec<TournamentRow>> {
    read_rows(input)
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}

/// Writes `policy,<columns...>,avg`.
pub fn write_wide_csv<W: Write>(table: &WideTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["policy".to_string()];
    header.extend(table.columns.iter().cloned());
    header.push("avg".into());
    w.write_record(&header)?;
    for r in &table.rows {
        if r.values.len() != table.columns.len() {
            return Err(HarnessError::Table(format!("row `{}` has {} values for {} columns", r.name, r.values.len(), table.columns.len())));
        }
        let mut rec = vec![r.name.clone()];
        rec.extend(r.values.iter().map(f64::to_string));
        rec.push(r.avg.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_wide_csv<R: Read>(input: R) -> Result<WideTable> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    let n = header.len();
    if n < 2 || &header[0] != "policy" || &header[n - 1] != "avg" {
        return Err(HarnessError::Table("expected header `policy,...,avg`".into()));
    }
    let columns = header.iter().skip(1).take(n - 2).map(str::to_string).collect();
    let parse = |s: &str| s.parse::<f64>().map_err(|e| HarnessError::Table(format!("`{s}`: {e}")));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let values = rec.iter().skip(1).take(n - 2).map(parse).collect::<Result<Vec<_>>>()?;
        rows.push(WideRow { name: rec[0].to_string(), values, avg: parse(&rec[n - 1])? });
    }
    Ok(WideTable { columns, rows })
}

/// One line of `curve_<run>.csv`. The `all` row carries the epoch mean
/// reward and ownership; per-opponent rows carry the mean reward over the
/// episodes that opponent was drawn (empty when it was not drawn).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epoch: usize,
    pub opponent: String,
    pub episodes: usize,
    pub mean_reward: Option<f64>,
    pub mean_ownership: Option<f64>,
}

pub fn curve_rows(curve: &[EpochStats]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for e in curve {
        rows.push(CurveRow {
            epoch: e.epoch,
            opponent: "all".into(),
            episodes: e.episodes,
            mean_reward: Some(e.mean_reward),
            mean_ownership: Some(e.mean_ownership),
        });
        rows.extend(e.per_opponent.iter().map(|o| CurveRow {
            epoch: e.epoch,
            opponent: o.id.clone(),
            episodes: o.episodes,
            mean_reward: o.mean_reward,
            mean_ownership: None,
        }));
    }
    rows
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_curve_csv<R: Read>(input: R) -> Result<Vec<CurveRow>> {
    read_rows(input)
}

/// Long-form utility matrix: one line per (iteration, member).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityCsvRow {
    pub iteration: usize,
    pub policy: String,
    pub member: String,
    pub value: f64,
    pub mean_reward: f64,
    pub mean_ownership: f64,
    pub episodes: usize,
}

pub fn utility_rows(u: &UtilityMatrix) -> Vec<UtilityCsvRow> {
    u.rows
        .iter()
        .flat_map(|r| {
            r.members.iter().enumerate().map(move |(i, m)| UtilityCsvRow {
                iteration: r.iteration,
                policy: r.policy.clone(),
                member: m.clone(),
                value: r.values[i],
                mean_reward: r.mean_reward[i],
                mean_ownership: r.mean_ownership[i],
                episodes: r.episodes,
            })
        })
        .collect()
}

pub fn write_utility_csv<W: Write>(rows: &[UtilityCsvRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

/// σ used to draw opponents at each iteration. Member `i` of iteration `k`
/// is `pool_ids[i]`; the pool can grow with self-play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    pub iteration: usize,
    pub member: String,
    pub probability: f64,
}

pub fn sigma_rows(history: &[Vec<f64>], pool_ids: &[String]) -> Vec<SigmaRow> {
    history
        .iter()
        .enumerate()
        .flat_map(|(k, s)| {
            s.iter().enumerate().map(move |(i, p)| SigmaRow {
                iteration: k,
                member: pool_ids.get(i).cloned().unwrap_or_else(|| format!("#{i}")),
                probability: *p,
            })
        })
        .collect()
}

pub fn write_sigma_csv<W: Write>(rows: &[SigmaRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

/// Provenance for one command invocation. `config` is the fully resolved
/// run configuration; re-running it reproduces every listed output. The
/// worker count is deliberately absent because it cannot change results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            tool: "poolflip".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            outputs: Vec::new(),
        }
    }

    /// Records `file` (relative to `dir`) with its current hash.
    pub fn record(&mut self, dir: &Path, file: &str) -> Result<()> {
        let sha256 = file_sha256(&dir.join(file))?;
        self.outputs.retain(|o| o.file != file);
        self.outputs.push(OutputRecord { file: file.into(), sha256 });
        self.outputs.sort_by(|a, b| a.file.cmp(&b.file));
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// One opponent-pool member as written to `pool.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolEntry {
    pub id: String,
    /// `heuristic` or `policy`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolManifest {
    pub members: Vec<PoolEntry>,
}
