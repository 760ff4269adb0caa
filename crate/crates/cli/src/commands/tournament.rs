use clap::Args;
use poolflip::harness::{tournament, write_tournament_csv, write_wide_csv};
use serde::{Deserialize, Serialize};

use super::{overlay_fields, roster};
use crate::config::resolve;
use crate::failure::CliResult;
use crate::output::Outputs;
use crate::GlobalArgs;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TournamentArgs {
    /// Defender roster, e.g. `sleep,periodic:phase=4;awake:lambda=0.05`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defenders: Option<String>,
    /// Attacker roster (defaults to the preset's).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attackers: Option<String>,
    /// Episodes per cell.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
}

overlay_fields!(TournamentArgs { defenders, attackers, episodes });

pub fn run(global: &GlobalArgs, args: TournamentArgs) -> CliResult<()> {
    let mut r = resolve(global, args)?;
    // Fold the flags into the experiment so the manifest alone replays the run.
    if let Some(d) = r.args.defenders.take() {
        r.experiment.defenders = roster(&d)?;
    }
    if let Some(a) = r.args.attackers.take() {
        r.experiment.attackers = roster(&a)?;
    }
    if let Some(n) = r.args.episodes.take() {
        r.experiment.episodes = n;
    }
    r.experiment.validate()?;
    let e = &r.experiment;
    let t = tournament(&e.defenders, &e.attackers, &e.game, e.episodes, e.seed, r.workers)?;
    let matrix = t.mean_matrix();
    print!("{}", matrix.render());

    let mut out = Outputs::new(&r.out_dir, "tournament", r.snapshot(), "manifest_tournament.json".into())?;
    out.write("tournament.csv", |w| write_tournament_csv(&t.rows(), w))?;
    out.write("tournament_matrix.csv", |w| write_wide_csv(&matrix, w))?;
    let m = out.finish()?;
    eprintln!("wrote {}", m.display());
    Ok(())
}
