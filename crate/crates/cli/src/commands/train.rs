use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use poolflip::harness::{
    curve_rows, eval_table, evaluate_checkpoint, sigma_rows, utility_rows, write_curve_csv, write_sigma_csv,
    write_utility_csv, write_wide_csv, EvalRow, ExperimentPreset, Metric, PoolEntry, PoolManifest, WideRow, WideTable,
};
use poolflip::learner::{EpochStats, OpponentMix, PolicyCheckpoint, Provenance, Trainer, TrainerState};
use poolflip::metagame::{PolicyPool, PsroConfig, PsroRun, PsroState, ResponseObjective};
use poolflip::seed::{derive_seed, label};
use poolflip::{HeuristicSpec, Player, Workers};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::roster;
use crate::config::{resolve, Overlay};
use crate::failure::{CliResult, Context, Failure};
use crate::output::{file_tag, Outputs};
use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Specialist,
    Ibr,
    Psro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mss {
    /// Uniform σ over the pool.
    Uniform,
    /// Softmax over normalized gaps to specialist rewards.
    Gap,
    /// Softmax over 1 − win rate by ownership.
    Own,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Run name; output files are `<name>.ckpt`, `curve_<name>.csv`, ...
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Specialist opponent spec.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opponent: Option<String>,
    /// Meta-strategy solver for psro mode.
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mss: Option<Mss>,
    /// Ownership threshold for `--mss own` (default 0.5).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub own_threshold: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_play: Option<OnOff>,
    /// IBR opponent order, e.g. `awake,burst,periodic,pc,pac`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<String>,
    /// Training epochs (PSRO iterations); the entropy schedule is rescaled.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    /// Specialist reference file for `--mss gap` (default `<out>/specialists.json`).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specialists: Option<PathBuf>,
    /// Save resumable state every N epochs.
    #[arg(long, default_value_t = 10)]
    #[serde(skip)]
    pub checkpoint_every: usize,
    /// Continue from `<name>.state.json` if present.
    #[arg(long)]
    #[serde(skip)]
    pub resume: bool,
}

impl Overlay for TrainArgs {
    fn overlay(self, file: Self) -> Self {
        TrainArgs {
            mode: self.mode.or(file.mode),
            name: self.name.or(file.name),
            opponent: self.opponent.or(file.opponent),
            mss: self.mss.or(file.mss),
            own_threshold: self.own_threshold.or(file.own_threshold),
            self_play: self.self_play.or(file.self_play),
            order: self.order.or(file.order),
            epochs: self.epochs.or(file.epochs),
            specialists: self.specialists.or(file.specialists),
            checkpoint_every: self.checkpoint_every,
            resume: self.resume,
        }
    }
}

/// `specialists.json`: the reward each specialist earns against its own
/// opponent, keyed by the opponent's spec id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialistRefs {
    pub members: BTreeMap<String, SpecialistRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialistRef {
    pub reward: f64,
    pub checkpoint: String,
}

/// Resumable state plus the configuration that produced it.
#[derive(Serialize, Deserialize)]
struct Saved<T> {
    config: Value,
    state: T,
}

struct Ctx {
    experiment: ExperimentPreset,
    snapshot: Value,
    out_dir: PathBuf,
    workers: Workers,
    name: String,
    every: usize,
    resume: bool,
}

impl Ctx {
    fn state_path(&self) -> PathBuf {
        self.out_dir.join(format!("{}.state.json", self.name))
    }

    fn load_state<T: DeserializeOwned>(&self) -> CliResult<Option<T>> {
        let p = self.state_path();
        if !self.resume || !p.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&p).context(format!("reading {}", p.display()))?;
        let saved: Saved<T> = serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("state file {} is unreadable: {e}", p.display())))?;
        if saved.config != self.snapshot {
            return Err(Failure::config(format!(
                "state file {} was written by a different configuration; remove it or rerun without --resume",
                p.display()
            )));
        }
        eprintln!("resuming from {}", p.display());
        Ok(Some(saved.state))
    }

    fn save_state<T: Serialize>(&self, state: T) -> CliResult<()> {
        let p = self.state_path();
        let tmp = p.with_extension("json.tmp");
        let text = serde_json::to_string(&Saved { config: self.snapshot.clone(), state })
            .map_err(|e| Failure::Runtime(e.into()))?;
        std::fs::write(&tmp, text).context(format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &p).context(format!("renaming {}", tmp.display()))?;
        Ok(())
    }

    fn due(&self, epoch: usize) -> bool {
        self.every > 0 && epoch.is_multiple_of(self.every)
    }
}

fn log_epoch(name: &str, total: usize, s: &EpochStats) {
    eprintln!(
        "[{name}] epoch {:>4}/{total}  reward {:>7.2}  ownership {:.3}",
        s.epoch + 1,
        s.mean_reward,
        s.mean_ownership
    );
}

pub fn run(global: &GlobalArgs, args: TrainArgs) -> CliResult<()> {
    let mut r = resolve(global, args)?;
    if let Some(n) = r.args.epochs.take() {
        // The entropy schedule keeps its share of the run.
        let t = &mut r.experiment.train;
        t.entropy_anneal_epochs = (t.entropy_anneal_epochs * n).div_ceil(t.total_epochs.max(1));
        t.total_epochs = n;
    }
    if let Some(o) = r.args.order.take() {
        r.experiment.psro.ibr_order = roster(&o)?;
    }
    if let Some(sp) = r.args.self_play.take() {
        r.experiment.psro.self_play = sp == OnOff::On;
    }
    r.experiment.validate()?;
    let mode = r.args.mode.ok_or_else(|| Failure::config("missing --mode (specialist, ibr or psro)"))?;
    if mode != Mode::Psro && (r.args.mss.is_some() || r.args.own_threshold.is_some()) {
        return Err(Failure::config("--mss and --own-threshold only apply to --mode psro"));
    }
    if mode != Mode::Specialist && r.args.opponent.is_some() {
        return Err(Failure::config("--opponent only applies to --mode specialist"));
    }
    let opponent = match (mode, &r.args.opponent) {
        (Mode::Specialist, Some(o)) => {
            let mut v = roster(o)?;
            if v.len() != 1 {
                return Err(Failure::config(format!("--opponent needs exactly one spec, got {}", v.len())));
            }
            v.pop()
        }
        (Mode::Specialist, None) => return Err(Failure::config("--mode specialist needs --opponent <spec>")),
        _ => None,
    };
    let default_name = match mode {
        Mode::Specialist => format!("specialist_{}", file_tag(&opponent.expect("checked").short_name())),
        Mode::Ibr => "ibr".into(),
        Mode::Psro => match r.args.mss.unwrap_or(Mss::Uniform) {
            Mss::Uniform => "mss_unif".into(),
            Mss::Gap => "mss_gap".into(),
            Mss::Own => format!("mss_o{}", (100.0 * r.args.own_threshold.unwrap_or(0.5)).round()),
        },
    };
    let name = r.args.name.get_or_insert(default_name).clone();
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(Failure::config(format!("invalid run name `{name}`")));
    }
    let ctx = Ctx {
        snapshot: r.snapshot(),
        experiment: r.experiment.clone(),
        out_dir: r.out_dir.clone(),
        workers: r.workers,
        name,
        every: r.args.checkpoint_every,
        resume: r.args.resume,
    };
    let mut out = Outputs::new(&ctx.out_dir, "train", ctx.snapshot.clone(), format!("manifest_train_{}.json", ctx.name))?;
    match mode {
        Mode::Specialist => specialist(&ctx, &mut out, opponent.expect("checked"))?,
        Mode::Ibr => ibr(&ctx, &mut out)?,
        Mode::Psro => psro(&ctx, &mut out, &r.args)?,
    }
    let m = out.finish()?;
    eprintln!("wrote {}", m.display());
    Ok(())
}

/// Epoch loop shared by specialist and IBR training.
fn train_loop(ctx: &Ctx, seed: u64, epochs: usize, mix_at: impl Fn(usize) -> OpponentMix) -> CliResult<Trainer> {
    let e = &ctx.experiment;
    let mut trainer = match ctx.load_state::<TrainerState>()? {
        Some(s) => Trainer::from_state(s, ctx.workers)?,
        None => Trainer::new(e.train.clone(), e.game.clone(), Player::Defender, seed, ctx.workers)?,
    };
    while trainer.epoch() < epochs {
        let mix = mix_at(trainer.epoch());
        let s = trainer.run_epoch(&mix)?;
        log_epoch(&ctx.name, epochs, s);
        if ctx.due(trainer.epoch()) {
            ctx.save_state(trainer.state())?;
        }
    }
    ctx.save_state(trainer.state())?;
    Ok(trainer)
}

fn specialist(ctx: &Ctx, out: &mut Outputs, opponent: HeuristicSpec) -> CliResult<()> {
    let e = &ctx.experiment;
    let id = opponent.to_string();
    let seed = derive_seed(e.seed, &[label(&id)]);
    let mix = OpponentMix::single(Arc::new(opponent));
    let trainer = train_loop(ctx, seed, e.train.total_epochs, |_| mix.clone())?;
    let mut prov = Provenance::new(&ctx.name, Player::Defender);
    prov.opponents = vec![id.clone()];
    let ckpt = trainer.checkpoint(prov)?;
    let curve = trainer.curve().to_vec();
    save_common(ctx, out, &ckpt, &curve)?;

    let row = evaluate_checkpoint(&ckpt, &[opponent], &e.game, e.eval_episodes, e.seed, ctx.workers)?;
    write_final(ctx, out, &row)?;
    let refs_path = ctx.out_dir.join("specialists.json");
    let mut refs = if refs_path.exists() { read_refs(&refs_path)? } else { SpecialistRefs::default() };
    refs.members.insert(id, SpecialistRef { reward: row.avg_reward(), checkpoint: format!("{}.ckpt", ctx.name) });
    let text = serde_json::to_string_pretty(&refs).map_err(|e| Failure::Runtime(e.into()))? + "\n";
    std::fs::write(&refs_path, text).context(format!("writing {}", refs_path.display()))?;
    out.record("specialists.json")?;
    Ok(())
}

fn ibr(ctx: &Ctx, out: &mut Outputs) -> CliResult<()> {
    let e = &ctx.experiment;
    let order = &e.psro.ibr_order;
    let per = (e.train.total_epochs / order.len()).max(1);
    let epochs = per * order.len();
    let pool = PolicyPool::from_specs(order)?;
    let sources = pool.sources();
    let mix_at = |epoch: usize| {
        let mut w = vec![0.0; order.len()];
        w[(epoch / per).min(order.len() - 1)] = 1.0;
        OpponentMix::new(sources.clone(), w).expect("one-hot weights are valid")
    };
    let trainer = train_loop(ctx, e.seed, epochs, mix_at)?;
    let mut prov = Provenance::new(&ctx.name, Player::Defender);
    prov.opponents = pool.ids();
    prov.notes.push(format!("epochs_per_opponent={per}"));
    let ckpt = trainer.checkpoint(prov)?;
    let curve = trainer.curve().to_vec();
    save_common(ctx, out, &ckpt, &curve)?;
    let row = evaluate_checkpoint(&ckpt, &e.pool, &e.game, e.eval_episodes, e.seed, ctx.workers)?;
    write_final(ctx, out, &row)
}

fn read_refs(path: &Path) -> CliResult<SpecialistRefs> {
    let text = std::fs::read_to_string(path).context(format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn objective(ctx: &Ctx, args: &TrainArgs) -> CliResult<ResponseObjective> {
    let mss = args.mss.unwrap_or(Mss::Uniform);
    if mss != Mss::Own && args.own_threshold.is_some() {
        return Err(Failure::config("--own-threshold only applies to --mss own"));
    }
    Ok(match mss {
        Mss::Uniform => ResponseObjective::Reward,
        Mss::Own => ResponseObjective::WinRate { threshold: args.own_threshold.unwrap_or(0.5) },
        Mss::Gap => {
            let path = args.specialists.clone().unwrap_or_else(|| ctx.out_dir.join("specialists.json"));
            let hint = |spec: &str| {
                format!("run `poolflip train --mode specialist --opponent {spec}` with the same --out-dir first")
            };
            if !path.exists() {
                let first = ctx.experiment.pool[0].to_string();
                return Err(Failure::config(format!(
                    "--mss gap needs specialist references but {} does not exist; {}",
                    path.display(),
                    hint(&first)
                )));
            }
            let refs = read_refs(&path)?;
            let mut rewards = Vec::new();
            for spec in &ctx.experiment.pool {
                let id = spec.to_string();
                match refs.members.get(&id) {
                    Some(r) => rewards.push(r.reward),
                    None => {
                        return Err(Failure::config(format!(
                            "--mss gap: no specialist reference for `{id}` in {}; {}",
                            path.display(),
                            hint(&id)
                        )))
                    }
                }
            }
            ResponseObjective::NormalizedGap { specialist_rewards: rewards }
        }
    })
}

fn psro(ctx: &Ctx, out: &mut Outputs, args: &TrainArgs) -> CliResult<()> {
    let e = &ctx.experiment;
    let objective = objective(ctx, args)?;
    let mut cfg = PsroConfig::new(&ctx.name, objective, e.train.clone(), e.game.clone(), e.seed);
    cfg.eval_episodes = e.psro.eval_episodes;
    cfg.final_eval_episodes = e.psro.final_eval_episodes;
    cfg.temperature = e.psro.temperature;
    cfg.self_play = e.psro.self_play;
    let pool = PolicyPool::from_specs(&e.pool)?;
    let base = pool.len();
    let mut run = match ctx.load_state::<PsroState>()? {
        Some(s) => PsroRun::from_state(s, pool, ctx.workers)?,
        None => PsroRun::new(cfg, pool, ctx.workers)?,
    };
    let total = e.train.total_epochs;
    while !run.is_done() {
        let row = run.step()?;
        let avg = row.mean_reward.iter().sum::<f64>() / row.mean_reward.len() as f64;
        eprintln!("[{}] iteration {:>4}/{total}  pool reward {avg:>7.2}  sigma {:?}", ctx.name, row.iteration + 1, rounded(run.sigma()));
        if ctx.due(run.iteration()) {
            ctx.save_state(run.state())?;
        }
    }
    ctx.save_state(run.state())?;
    let outcome = run.finish(base)?;
    save_common(ctx, out, &outcome.checkpoint, &outcome.curve)?;
    let name = &ctx.name;
    let sig = sigma_rows(&outcome.sigma_history, &outcome.pool_ids);
    out.write(&format!("sigma_{name}.csv"), |w| write_sigma_csv(&sig, w))?;
    let util = utility_rows(&outcome.utility);
    out.write(&format!("utility_{name}.csv"), |w| write_utility_csv(&util, w))?;
    let members = outcome
        .pool_ids
        .iter()
        .enumerate()
        .map(|(i, id)| PoolEntry {
            id: id.clone(),
            kind: if i < base { "heuristic".into() } else { "policy".into() },
            checkpoint: None,
            sha256: None,
        })
        .collect();
    let pm = PoolManifest { members };
    out.write(&format!("pool_{name}.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &pm)?;
        std::io::Write::write_all(w, b"\n")?;
        Ok(())
    })?;
    let row = evaluate_checkpoint(&outcome.checkpoint, &e.pool, &e.game, e.eval_episodes, e.seed, ctx.workers)?;
    write_final(ctx, out, &row)
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 100.0).round() / 100.0).collect()
}

fn save_common(ctx: &Ctx, out: &mut Outputs, ckpt: &PolicyCheckpoint, curve: &[EpochStats]) -> CliResult<()> {
    let name = &ctx.name;
    let file = format!("{name}.ckpt");
    ckpt.save(&out.path(&file)).context(format!("saving {file}"))?;
    out.record(&file)?;
    out.record(&format!("{file}.meta.json"))?;
    let rows = curve_rows(curve);
    out.write(&format!("curve_{name}.csv"), |w| write_curve_csv(&rows, w))?;
    eprintln!("[{name}] checkpoint {} ({} params)", out.path(&file).display(), ckpt.network.params.len());
    Ok(())
}

/// `final_<name>.csv`: reward and ownership (%) against the evaluation roster.
fn write_final(ctx: &Ctx, out: &mut Outputs, row: &EvalRow) -> CliResult<()> {
    let reward = eval_table(std::slice::from_ref(row), Metric::Reward)?;
    let own = eval_table(std::slice::from_ref(row), Metric::OwnershipPct)?;
    let table = WideTable {
        columns: reward.columns.clone(),
        rows: vec![
            WideRow { name: "reward".into(), ..reward.rows[0].clone() },
            WideRow { name: "ownership_pct".into(), ..own.rows[0].clone() },
        ],
    };
    print!("{}", table.render());
    out.write(&format!("final_{}.csv", ctx.name), |w| write_wide_csv(&table, w))
}
