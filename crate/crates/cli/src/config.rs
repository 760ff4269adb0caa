//! Run configuration: preset, then config file, then `--set`, then flags.
//!
//! A config file is a JSON document of the form
//! `{"preset": "...", "seed": 1, "out_dir": "...", "experiment": {...}, "args": {...}}`
//! where `experiment` is a partial preset and `args` holds the command's own
//! options. A run manifest is also accepted: its `config` entry is a fully
//! resolved document of the same shape.

use std::path::{Path, PathBuf};

use poolflip::harness::{ExperimentPreset, RunManifest};
use poolflip::Workers;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::{CliResult, Failure};
use crate::GlobalArgs;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub experiment: Value,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub args: Value,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("config {} is not valid JSON: {e}", path.display())))?;
        let v = if v.get("tool").is_some() && v.get("config").is_some() {
            let m: RunManifest = serde_json::from_value(v)
                .map_err(|e| Failure::config(format!("manifest {}: {e}", path.display())))?;
            m.config
        } else {
            v
        };
        serde_json::from_value(v).map_err(|e| Failure::config(format!("config {}: {e}", path.display())))
    }
}

/// Everything a command needs after resolution.
pub struct Resolved<A> {
    pub experiment: ExperimentPreset,
    pub args: A,
    pub out_dir: PathBuf,
    pub workers: Workers,
}

impl<A: Serialize> Resolved<A> {
    /// The document recorded in the manifest. It omits the output directory
    /// and worker count, neither of which affects results.
    pub fn snapshot(&self) -> Value {
        let cfg = RunConfig {
            preset: Some(self.experiment.name.clone()),
            seed: Some(self.experiment.seed),
            out_dir: None,
            experiment: serde_json::to_value(&self.experiment).expect("presets serialize"),
            args: serde_json::to_value(&self.args).expect("args serialize"),
        };
        serde_json::to_value(cfg).expect("config serializes")
    }
}

/// Deep-merges `overlay` into `base`; objects merge key by key, anything
/// else replaces.
pub fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, o) if !o.is_null() => *b = o.clone(),
        _ => {}
    }
}

/// Applies `path.to.key=value`; the value is parsed as JSON when possible and
/// taken as a string otherwise.
pub fn apply_set(doc: &mut Value, assignment: &str) -> CliResult<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::config(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, k) in keys.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Failure::config(format!("--set {path}: `{}` is not an object", keys[..i].join("."))))?;
        if !obj.contains_key(*k) {
            return Err(Failure::config(format!("--set {path}: unknown key `{k}`")));
        }
        cur = obj.get_mut(*k).expect("checked");
    }
    *cur = value;
    Ok(())
}

/// Flag values win over file values field by field.
pub trait Overlay {
    fn overlay(self, file: Self) -> Self;
}

pub fn resolve<A>(global: &GlobalArgs, cli_args: A) -> CliResult<Resolved<A>>
where
    A: Overlay + DeserializeOwned + Serialize + Default,
{
    let file = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let preset_name = global.preset.clone().or(file.preset.clone()).unwrap_or_else(|| "paper-default".into());
    let preset = ExperimentPreset::by_name(&preset_name)?;
    let mut doc = serde_json::to_value(&preset).expect("presets serialize");
    merge(&mut doc, &file.experiment);
    for s in &global.set {
        apply_set(&mut doc, s)?;
    }
    let mut experiment: ExperimentPreset =
        serde_json::from_value(doc).map_err(|e| Failure::config(format!("experiment config: {e}")))?;
    if let Some(seed) = global.seed.or(file.seed) {
        experiment.seed = seed;
    }
    let file_args: A = if file.args.is_null() {
        A::default()
    } else {
        serde_json::from_value(file.args.clone()).map_err(|e| Failure::config(format!("args: {e}")))?
    };
    let args = cli_args.overlay(file_args);
    let out_dir = global.out_dir.clone().or(file.out_dir).unwrap_or_else(|| PathBuf::from("poolflip-out"));
    let workers = global.workers.map_or_else(Workers::available, Workers::new);
    Ok(Resolved { experiment, args, out_dir, workers })
}

/// Creates the output directory.
pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(anyhow::anyhow!("creating {}: {e}", dir.display())))
}
