//! Versioned binary checkpoint with a JSON metadata sidecar.
//!
//! Layout, all integers little-endian:
//! magic (8 bytes), version u32, obs_dim u32, action_dim u32, memory_limit
//! u32, num_resources u32, hidden layer count u32, hidden sizes u32 each,
//! parameter count u64, then parameters as f32 in the network's flat order
//! (per layer: row-major `out x in` weights followed by biases).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{Network, NetworkShape};
use super::LearnerError;
use crate::engine::{GameConfig, Player};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PFLIPNN\0";
pub const FORMAT_VERSION: u32 = 1;

/// How a checkpoint was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub name: String,
    pub role: Player,
    /// Training opponents, as spec strings or member ids.
    pub opponents: Vec<String>,
    pub epoch: usize,
    pub seed: u64,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(name: impl Into<String>, role: Player) -> Self {
        Provenance { name: name.into(), role, opponents: Vec::new(), epoch: 0, seed: 0, notes: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub memory_limit: usize,
    pub num_resources: usize,
    pub hidden: Vec<usize>,
    pub content_hash: String,
    pub provenance: Provenance,
}

/// A frozen policy. Parameters are rounded to f32 on construction so a
/// loaded checkpoint behaves exactly like the in-memory one.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCheckpoint {
    pub network: Arc<Network>,
    pub memory_limit: usize,
    pub num_resources: usize,
    pub provenance: Provenance,
}

impl PolicyCheckpoint {
    pub fn new(network: &Network, game: &GameConfig, provenance: Provenance) -> Result<Self, LearnerError> {
        let shape = network.shape().clone();
        if shape.obs_dim != game.obs_dim() || shape.action_dim != game.action_dim() {
            return Err(LearnerError::Incompatible {
                found_obs: shape.obs_dim,
                found_act: shape.action_dim,
                want_obs: game.obs_dim(),
                want_act: game.action_dim(),
            });
        }
        let params = network.params.iter().map(|p| f64::from(*p as f32)).collect();
        Ok(PolicyCheckpoint {
            network: Arc::new(Network::from_params(shape, params)?),
            memory_limit: game.memory_limit,
            num_resources: game.num_resources,
            provenance,
        })
    }

    pub fn shape(&self) -> &NetworkShape {
        self.network.shape()
    }

    pub fn check_compatible(&self, game: &GameConfig) -> Result<(), LearnerError> {
        let s = self.shape();
        if s.obs_dim != game.obs_dim()
            || s.action_dim != game.action_dim()
            || self.memory_limit != game.memory_limit
            || self.num_resources != game.num_resources
        {
            return Err(LearnerError::Incompatible {
                found_obs: s.obs_dim,
                found_act: s.action_dim,
                want_obs: game.obs_dim(),
                want_act: game.action_dim(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let s = self.shape();
        let params = &self.network.params;
        let mut out = Vec::with_capacity(48 + 4 * s.hidden.len() + 4 * params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        for v in [FORMAT_VERSION, s.obs_dim as u32, s.action_dim as u32, self.memory_limit as u32, self.num_resources as u32]
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(s.hidden.len() as u32).to_le_bytes());
        for h in &s.hidden {
            out.extend_from_slice(&(*h as u32).to_le_bytes());
        }
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in params {
            out.extend_from_slice(&(*p as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], provenance: Provenance) -> Result<Self, LearnerError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(LearnerError::Checkpoint("bad magic, not a policy checkpoint".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(LearnerError::Version { found: version, expected: FORMAT_VERSION });
        }
        let obs_dim = r.u32()? as usize;
        let action_dim = r.u32()? as usize;
        let memory_limit = r.u32()? as usize;
        let num_resources = r.u32()? as usize;
        let layers = r.u32()? as usize;
        if layers > 64 {
            return Err(LearnerError::Checkpoint(format!("implausible hidden layer count {layers}")));
        }
        let hidden = (0..layers).map(|_| r.u32().map(|h| h as usize)).collect::<Result<Vec<_>, _>>()?;
        let shape = NetworkShape::new(obs_dim, action_dim, hidden)?;
        let count = r.u64()?;
        if count != shape.num_params() as u64 {
            return Err(LearnerError::Checkpoint(format!(
                "header declares {count} parameters, layer sizes imply {}",
                shape.num_params()
            )));
        }
        let raw = r.take(4 * count as usize)?;
        let params = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        if r.pos != bytes.len() {
            return Err(LearnerError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(PolicyCheckpoint {
            network: Arc::new(Network::from_params(shape, params)?),
            memory_limit,
            num_resources,
            provenance,
        })
    }

    /// Lowercase hex sha256 of the binary encoding.
    pub fn content_hash(&self) -> String {
        hex(&Sha256::digest(self.to_bytes()))
    }

    pub fn meta(&self) -> CheckpointMeta {
        let s = self.shape();
        CheckpointMeta {
            format_version: FORMAT_VERSION,
            obs_dim: s.obs_dim,
            action_dim: s.action_dim,
            memory_limit: self.memory_limit,
            num_resources: self.num_resources,
            hidden: s.hidden.clone(),
            content_hash: self.content_hash(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    /// Writes the binary and its sidecar.
    pub fn save(&self, path: &Path) -> Result<(), LearnerError> {
        fs::write(path, self.to_bytes())?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        fs::write(Self::sidecar_path(path), meta + "\n")?;
        Ok(())
    }

    /// Loads a binary checkpoint. The sidecar is optional, but when present
    /// its hash must match the binary.
    pub fn load(path: &Path) -> Result<Self, LearnerError> {
        let bytes = fs::read(path)?;
        let sidecar = Self::sidecar_path(path);
        let meta: Option<CheckpointMeta> = match fs::read_to_string(&sidecar) {
            Ok(s) => Some(serde_json::from_str(&s)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let fallback = || {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Provenance::new(stem, Player::Defender)
        };
        let provenance = meta.as_ref().map(|m| m.provenance.clone()).unwrap_or_else(fallback);
        let ckpt = Self::from_bytes(&bytes, provenance)?;
        if let Some(m) = meta {
            let actual = hex(&Sha256::digest(&bytes));
            if m.content_hash != actual {
                return Err(LearnerError::Checkpoint(format!(
                    "sidecar hash {} does not match binary {}",
                    m.content_hash, actual
                )));
            }
        }
        Ok(ckpt)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LearnerError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or(LearnerError::Truncated {
            needed: self.pos.saturating_add(n),
            found: self.bytes.len(),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, LearnerError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, LearnerError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
