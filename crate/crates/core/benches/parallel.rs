//! Sequential vs rayon-backed execution of the same workloads.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use poolflip::harness::{tournament, ExperimentPreset};
use poolflip::learner::{OpponentMix, TrainConfig, Trainer};
use poolflip::{GameConfig, HeuristicSpec, Player, Workers};

fn modes() -> [(&'static str, Workers); 2] {
    [("sequential", Workers::sequential()), ("parallel", Workers::available())]
}

fn bench_tournament(c: &mut Criterion) {
    let p = ExperimentPreset::by_name("paper-default").unwrap();
    let mut g = c.benchmark_group("tournament_9x9_x20");
    g.sample_size(10);
    for (name, w) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(tournament(&p.defenders, &p.attackers, &p.game, 20, 0, w).unwrap()))
        });
    }
    g.finish();
}

fn bench_epoch(c: &mut Criterion) {
    let game = GameConfig::paper_default();
    let mix = OpponentMix::single(Arc::new(HeuristicSpec::periodic(4)));
    let mut g = c.benchmark_group("ppo_epoch");
    g.sample_size(10);
    for (name, w) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut t = Trainer::new(TrainConfig::default(), game.clone(), Player::Defender, 0, w).unwrap();
                black_box(t.run_epoch(&mix).unwrap().mean_reward)
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_tournament, bench_epoch);
criterion_main!(benches);
