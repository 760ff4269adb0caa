//! Trains a defender against one heuristic and prints the learning curve.
//!
//! `cargo run --release --example specialist -- periodic:phase=4 50 1 '{"advantage":"gae"}'`

use std::sync::Arc;
use std::time::Instant;

use poolflip::learner::{train_against, OpponentMix, TrainConfig};
use poolflip::{GameConfig, HeuristicSpec, Player, Workers};

fn main() {
    let mut args = std::env::args().skip(1);
    let spec: HeuristicSpec = args.next().unwrap_or_else(|| "periodic:phase=4".into()).parse().expect("spec");
    let epochs: usize = args.next().map(|s| s.parse().expect("epochs")).unwrap_or(50);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);
    let overrides = args.next().unwrap_or_else(|| "{}".into());
    let mut config: TrainConfig = serde_json::from_str(&overrides).expect("config overrides");
    config.total_epochs = epochs;
    let start = Instant::now();
    let mix = OpponentMix::single(Arc::new(spec));
    let out = train_against(&mix, &config, &GameConfig::paper_default(), Player::Defender, seed, Workers::default(), "specialist")
        .expect("training");
    for e in &out.curve {
        println!(
            "{:>4} reward {:>7.2} own {:.3} vloss {:>8.2} ent {:.3} kl {:.4}",
            e.epoch, e.mean_reward, e.mean_ownership, e.update.loss.value, e.update.loss.entropy, e.update.loss.approx_kl
        );
    }
    println!("{spec}: {:.1}s", start.elapsed().as_secs_f64());
}
