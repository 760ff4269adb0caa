use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use poolflip::engine::{run_episode_with_seeds, write_trace_csv, EpisodeSeeds};
use poolflip::harness::{cell_seed, display_names, read_tournament_csv, write_wide_csv, HarnessError, WideRow, WideTable};
use poolflip::learner::{PolicyCheckpoint, PolicySource};
use poolflip::seed::derive_seed;
use poolflip::HeuristicSpec;
use serde::{Deserialize, Serialize};

use super::overlay_fields;
use crate::config::resolve;
use crate::failure::{CliResult, Context, Failure};
use crate::output::Outputs;
use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum What {
    /// Step-by-step CSV of one episode.
    Trace,
    /// Defender x attacker grid from a `tournament.csv`.
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixMetric {
    Mean,
    Std,
    Ownership,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportArgs {
    #[arg(value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub what: Option<What>,
    /// Defender: a spec string or a `.ckpt` file.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defender: Option<String>,
    /// Attacker: a spec string or a `.ckpt` file.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacker: Option<String>,
    /// Episode index within the (defender, attacker) cell; the trace matches
    /// that episode of a tournament run with the same seed.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<u64>,
    /// Tournament CSV for `matrix`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MatrixMetric>,
    /// Output file name inside the output directory.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

overlay_fields!(ExportArgs { what, defender, attacker, episode, input, metric, output });

fn load_source(s: &str) -> CliResult<Box<dyn PolicySource>> {
    let p = Path::new(s);
    if s.ends_with(".ckpt") || p.is_file() {
        if !p.is_file() {
            return Err(Failure::config(format!("checkpoint {s} does not exist")));
        }
        Ok(Box::new(PolicyCheckpoint::load(p).context(format!("loading {s}"))?))
    } else {
        let spec: HeuristicSpec = s.parse().map_err(Failure::config)?;
        Ok(Box::new(spec))
    }
}

pub fn run(global: &GlobalArgs, args: ExportArgs) -> CliResult<()> {
    let mut r = resolve(global, args)?;
    r.experiment.validate()?;
    let what = r.args.what.ok_or_else(|| Failure::config("export needs `trace` or `matrix`"))?;
    match what {
        What::Trace => {
            let d = r.args.defender.clone().ok_or_else(|| Failure::config("export trace needs --defender"))?;
            let a = r.args.attacker.clone().ok_or_else(|| Failure::config("export trace needs --attacker"))?;
            let episode = *r.args.episode.get_or_insert(0);
            let (ds, as_) = (load_source(&d)?, load_source(&a)?);
            if let Some(c) = [&d, &a].iter().find(|s| s.ends_with(".ckpt")) {
                PolicyCheckpoint::load(Path::new(c.as_str()))?.check_compatible(&r.experiment.game)?;
            }
            let e = &r.experiment;
            let seeds = EpisodeSeeds::derive(derive_seed(cell_seed(e.seed, &ds.id(), &as_.id()), &[episode]));
            let mut dp = ds.build(seeds.defender)?;
            let mut ap = as_.build(seeds.attacker)?;
            let res = run_episode_with_seeds(&e.game, dp.as_mut(), ap.as_mut(), seeds, true)?;
            eprintln!(
                "defender reward {}  attacker reward {}  defender ownership {:.3}",
                res.total_reward[0],
                res.total_reward[1],
                res.mean_ownership(poolflip::Player::Defender)
            );
            let trace = res.trace.expect("trace requested");
            let file = r.args.output.get_or_insert_with(|| "trace.csv".into()).clone();
            let mut out = Outputs::new(&r.out_dir, "export", r.snapshot(), "manifest_export.json".into())?;
            out.write(&file, |w| write_trace_csv(&trace, w).map_err(|e| HarnessError::Config(e.to_string())))?;
            out.finish()?;
        }
        What::Matrix => {
            let input = r.args.input.clone().ok_or_else(|| Failure::config("export matrix needs --input tournament.csv"))?;
            let metric = *r.args.metric.get_or_insert(MatrixMetric::Mean);
            let f = std::fs::File::open(&input)
                .map_err(|e| Failure::config(format!("cannot open {}: {e}", input.display())))?;
            let rows = read_tournament_csv(f)?;
            let table = matrix(&rows, metric)?;
            print!("{}", table.render());
            let file = r.args.output.get_or_insert_with(|| format!("matrix_{}.csv", metric_name(metric))).clone();
            let mut out = Outputs::new(&r.out_dir, "export", r.snapshot(), "manifest_export.json".into())?;
            out.write(&file, |w| write_wide_csv(&table, w))?;
            out.finish()?;
        }
    }
    Ok(())
}

fn metric_name(m: MatrixMetric) -> &'static str {
    match m {
        MatrixMetric::Mean => "mean",
        MatrixMetric::Std => "std",
        MatrixMetric::Ownership => "ownership",
    }
}

fn matrix(rows: &[poolflip::harness::TournamentRow], metric: MatrixMetric) -> CliResult<WideTable> {
    let mut defenders: Vec<String> = Vec::new();
    let mut attackers: Vec<String> = Vec::new();
    let mut cells = HashMap::new();
    for r in rows {
        if !defenders.contains(&r.defender) {
            defenders.push(r.defender.clone());
        }
        if !attackers.contains(&r.attacker) {
            attackers.push(r.attacker.clone());
        }
        let v = match metric {
            MatrixMetric::Mean => r.mean,
            MatrixMetric::Std => r.std,
            MatrixMetric::Ownership => r.ownership,
        };
        cells.insert((r.defender.clone(), r.attacker.clone()), v);
    }
    let names = |ids: &[String]| -> CliResult<Vec<String>> {
        let specs = ids.iter().map(|s| s.parse::<HeuristicSpec>()).collect::<Result<Vec<_>, _>>();
        Ok(specs.map(|s| display_names(&s)).unwrap_or_else(|_| ids.to_vec()))
    };
    let mut table_rows = Vec::new();
    for (d, dn) in defenders.iter().zip(names(&defenders)?) {
        let mut values = Vec::new();
        for a in &attackers {
            let v = cells
                .get(&(d.clone(), a.clone()))
                .ok_or_else(|| Failure::config(format!("tournament table has no cell {d} vs {a}")))?;
            values.push(*v);
        }
        table_rows.push(WideRow::new(dn, values));
    }
    Ok(WideTable { columns: names(&attackers)?, rows: table_rows })
}
