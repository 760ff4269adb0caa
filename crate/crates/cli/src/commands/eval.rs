use std::path::PathBuf;

use clap::{Args, ValueEnum};
use poolflip::harness::{eval_table, evaluate_checkpoint, evaluate_policy, write_wide_csv, EvalRow, Metric};
use poolflip::learner::PolicyCheckpoint;
use poolflip::HeuristicSpec;
use serde::{Deserialize, Serialize};

use super::{overlay_fields, roster};
use crate::config::resolve;
use crate::failure::{CliResult, Context, Failure};
use crate::output::Outputs;
use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Roster {
    /// The training pool: reward and ownership tables.
    Pool,
    /// Unseen opponents: reward table.
    Transfer,
    All,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalArgs {
    /// Checkpoint file; repeatable. Rows are named by file stem.
    #[arg(long = "checkpoint")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<PathBuf>>,
    /// Heuristic baseline row(s), e.g. `awake:lambda=0.05`.
    #[arg(long = "heuristic")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heuristics: Option<Vec<String>>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roster: Option<Roster>,
    /// Episodes per opponent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
}

overlay_fields!(EvalArgs { checkpoints, heuristics, roster, episodes });

enum Subject {
    Checkpoint(String, PolicyCheckpoint),
    Heuristic(HeuristicSpec),
}

pub fn run(global: &GlobalArgs, args: EvalArgs) -> CliResult<()> {
    let mut r = resolve(global, args)?;
    if let Some(n) = r.args.episodes.take() {
        r.experiment.eval_episodes = n;
    }
    r.experiment.validate()?;
    let roster_kind = *r.args.roster.get_or_insert(Roster::All);
    let mut subjects = Vec::new();
    for path in r.args.checkpoints.iter().flatten() {
        if !path.is_file() {
            return Err(Failure::config(format!("checkpoint {} does not exist", path.display())));
        }
        let ckpt = PolicyCheckpoint::load(path).context(format!("loading {}", path.display()))?;
        ckpt.check_compatible(&r.experiment.game).context(format!("checkpoint {}", path.display()))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        subjects.push(Subject::Checkpoint(stem, ckpt));
    }
    for h in r.args.heuristics.iter().flatten() {
        subjects.extend(roster(h)?.into_iter().map(Subject::Heuristic));
    }
    if subjects.is_empty() {
        return Err(Failure::config("nothing to evaluate: pass --checkpoint <file> and/or --heuristic <spec>"));
    }

    let e = &r.experiment;
    let evaluate = |opponents: &[HeuristicSpec]| -> CliResult<Vec<EvalRow>> {
        subjects
            .iter()
            .map(|s| {
                Ok(match s {
                    Subject::Checkpoint(name, c) => {
                        let mut row = evaluate_checkpoint(c, opponents, &e.game, e.eval_episodes, e.seed, r.workers)?;
                        row.policy = name.clone();
                        row
                    }
                    Subject::Heuristic(h) => {
                        evaluate_policy(&h.short_name(), h, opponents, &e.game, e.eval_episodes, e.seed, r.workers)?
                    }
                })
            })
            .collect()
    };

    let mut out = Outputs::new(&r.out_dir, "eval", r.snapshot(), "manifest_eval.json".into())?;
    if matches!(roster_kind, Roster::Pool | Roster::All) {
        let rows = evaluate(&e.pool)?;
        let reward = eval_table(&rows, Metric::Reward)?;
        let own = eval_table(&rows, Metric::OwnershipPct)?;
        println!("reward vs pool\n{}", reward.render());
        println!("ownership % vs pool\n{}", own.render());
        out.write("table3.csv", |w| write_wide_csv(&reward, w))?;
        out.write("table4.csv", |w| write_wide_csv(&own, w))?;
    }
    if matches!(roster_kind, Roster::Transfer | Roster::All) {
        let rows = evaluate(&e.transfer)?;
        let reward = eval_table(&rows, Metric::Reward)?;
        println!("reward vs unseen opponents\n{}", reward.render());
        out.write("table5.csv", |w| write_wide_csv(&reward, w))?;
    }
    let m = out.finish()?;
    eprintln!("wrote {}", m.display());
    Ok(())
}
