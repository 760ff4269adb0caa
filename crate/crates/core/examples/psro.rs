//! Runs Flip-PSRO and IBR at a reduced budget and prints pool results.
//!
//! `cargo run --release --example psro -- <epochs> <seed> <all|o50|o70|unif|ibr> [train-json] [temperature]`

use std::time::Instant;

use poolflip::learner::TrainConfig;
use poolflip::metagame::{evaluate_against_pool, flip_psro, ibr_train, MemberEval, PolicyPool, PsroConfig, ResponseObjective};
use poolflip::{GameConfig, HeuristicSpec, Workers};

fn show(label: &str, evals: &[MemberEval]) {
    let r: Vec<String> = evals.iter().map(|e| format!("{:6.1}", e.mean_reward())).collect();
    let o: Vec<String> = evals.iter().map(|e| format!("{:5.2}", e.mean_ownership())).collect();
    let avg_r = evals.iter().map(MemberEval::mean_reward).sum::<f64>() / evals.len() as f64;
    let avg_o = evals.iter().map(MemberEval::mean_ownership).sum::<f64>() / evals.len() as f64;
    println!("{label:>8} reward [{}] avg {avg_r:6.2} | own [{}] avg {avg_o:.3}", r.join(" "), o.join(" "));
}

fn main() {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(50);
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(1);
    let what = args.next().unwrap_or_else(|| "all".into());
    let overrides = args.next().unwrap_or_else(|| "{}".into());
    let temperature: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0.25);
    let mut train: TrainConfig = serde_json::from_str(&overrides).unwrap();
    train.total_epochs = epochs;
    if train.entropy_anneal_epochs == 120 {
        train.entropy_anneal_epochs = epochs * 3 / 5;
    }
    let game = GameConfig::paper_default();
    let specs = PolicyPool::default_heuristics();
    let pool = PolicyPool::from_specs(&specs).unwrap();
    let w = Workers::default();
    let base = evaluate_against_pool(&HeuristicSpec::awakening(0.05), &pool, &game, 100, 99, w).unwrap();
    show("awake", &base);
    for (name, obj) in [
        ("o50", ResponseObjective::WinRate { threshold: 0.5 }),
        ("o70", ResponseObjective::WinRate { threshold: 0.7 }),
        ("unif", ResponseObjective::Reward),
    ] {
        if what != "all" && what != name {
            continue;
        }
        let t = Instant::now();
        let mut cfg = PsroConfig::new(name, obj, train.clone(), game.clone(), seed);
        cfg.temperature = temperature;
        let out = flip_psro(cfg, pool.clone(), w).unwrap();
        show(name, &out.final_eval);
        let last = out.sigma_history.last().unwrap();
        println!("         sigma {:?} ({:.1}s)", last.iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>(), t.elapsed().as_secs_f64());
    }
    if what == "all" || what == "ibr" {
        let t = Instant::now();
        let order = vec![
            HeuristicSpec::awakening(0.05),
            HeuristicSpec::burst(8, 3),
            HeuristicSpec::periodic(4),
            HeuristicSpec::periodic_check(4),
            HeuristicSpec::pac(4),
        ];
        let out = ibr_train(&order, epochs / 5, &train, &game, seed, w).unwrap();
        let ev = evaluate_against_pool(&out.checkpoint, &pool, &game, 100, 99, w).unwrap();
        show("ibr", &ev);
        println!("         ({:.1}s)", t.elapsed().as_secs_f64());
    }
}
