use clap::Args;
use poolflip::harness::{parameter_sweep, write_tournament_csv, write_wide_csv, SweepFamily};
use serde::{Deserialize, Serialize};

use super::{overlay_fields, roster};
use crate::config::resolve;
use crate::failure::{CliResult, Failure};
use crate::output::Outputs;
use crate::GlobalArgs;

/// Families swept when none are given.
const DEFAULT_FAMILIES: [&str; 3] = ["awake:lambda={0.05,0.5}", "reta:phase={2,4,8}", "pac:phase={2,4,8}"];

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// Family with one braced grid; repeatable.
    #[arg(long = "family")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<String>>,
    /// Fixed opponents; by default the swept roster plays itself.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opponents: Option<String>,
    /// Episodes per cell.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
}

overlay_fields!(SweepArgs { families, opponents, episodes });

pub fn run(global: &GlobalArgs, args: SweepArgs) -> CliResult<()> {
    let mut r = resolve(global, args)?;
    if let Some(n) = r.args.episodes.take() {
        r.experiment.episodes = n;
    }
    let families = r.args.families.get_or_insert_with(|| DEFAULT_FAMILIES.iter().map(|s| s.to_string()).collect());
    if families.is_empty() {
        return Err(Failure::config("sweep needs at least one --family"));
    }
    let families = families.iter().map(|f| SweepFamily::parse(f)).collect::<Result<Vec<_>, _>>()?;
    let opponents = r.args.opponents.as_deref().map(roster).transpose()?;
    r.experiment.validate()?;
    let e = &r.experiment;
    let t = parameter_sweep(&families, opponents.as_deref(), &e.game, e.episodes, e.seed, r.workers)?;
    let matrix = t.mean_matrix();
    print!("{}", matrix.render());

    let mut out = Outputs::new(&r.out_dir, "sweep", r.snapshot(), "manifest_sweep.json".into())?;
    out.write("sweep.csv", |w| write_tournament_csv(&t.rows(), w))?;
    out.write("sweep_matrix.csv", |w| write_wide_csv(&matrix, w))?;
    let m = out.finish()?;
    eprintln!("wrote {}", m.display());
    Ok(())
}
