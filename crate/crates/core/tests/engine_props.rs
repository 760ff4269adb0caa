//! Engine invariants checked against a reference model on random play.

use poolflip::engine::{run_episode_with_seeds, ActionCosts, EngineState, EpisodeSeeds};
use poolflip::{make_heuristic, Action, GameConfig, HeuristicSpec, Player};
use proptest::prelude::*;

fn game(horizon: u32, resources: usize, memory: usize, check: f64, flip: f64) -> GameConfig {
    let mut g = GameConfig::symmetric(horizon, resources, ActionCosts { sleep: 0.0, check, flip }, 1.0, memory);
    // asymmetric gains catch player/resource index mix-ups
    for (i, gain) in g.gains.iter_mut().enumerate() {
        gain.defender = 1.0 + i as f64;
        gain.attacker = 0.5 + i as f64;
    }
    g
}

prop_compose! {
    fn scenario()(resources in 1usize..4, memory in 1usize..20, horizon in 1u32..60, check in 0.0..3.0f64, flip in 0.0..3.0f64)
        (actions in prop::collection::vec((0..1 + 2 * resources, 0..1 + 2 * resources), horizon as usize),
         g in Just(game(horizon, resources, memory, check, flip)))
        -> (GameConfig, Vec<[Action; 2]>)
    {
        let r = g.num_resources;
        let acts = actions.into_iter()
            .map(|(d, a)| [Action::decode(d, r).unwrap(), Action::decode(a, r).unwrap()])
            .collect();
        (g, acts)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn steps_follow_the_ownership_and_reward_rules((g, acts) in scenario(), seed in any::<u64>()) {
        let mut s = EngineState::new_game(&g, seed).unwrap();
        let mut owners = vec![g.initial_owner; g.num_resources];
        for pair in &acts {
            let before = [s.knowledge(Player::Defender).clone(), s.knowledge(Player::Attacker).clone()];
            let out = s.resolve_step(&g, *pair).unwrap();
            for p in Player::ALL {
                if let Action::Flip(i) = pair[p.index()] {
                    // only a non-owner's flip moves a resource, and it moves it to them
                    if owners[i] != p && pair[p.opponent().index()] != Action::Flip(i) {
                        owners[i] = p;
                    }
                }
            }
            prop_assert_eq!(&out.owners, &owners);
            for p in Player::ALL {
                let gain: f64 = (0..g.num_resources).filter(|&i| owners[i] == p).map(|i| g.gains[i].get(p)).sum();
                let expected = gain - g.costs.get(p).of(pair[p.index()]);
                prop_assert!((out.rewards[p.index()] - expected).abs() < 1e-12);
                let k = s.knowledge(p);
                if pair[p.index()] == Action::Sleep {
                    // stealth: sleeping reveals nothing
                    let mut b = before[p.index()].clone();
                    b.now += 1;
                    prop_assert_eq!(k, &b);
                }
                let obs = s.observe(p, g.memory_limit);
                prop_assert_eq!(obs.len(), g.obs_dim());
                prop_assert_eq!(obs.iter().filter(|v| **v == 1.0).count(), 2 * g.num_resources);
                prop_assert!(obs.iter().all(|v| *v == 0.0 || *v == 1.0));
            }
        }
        prop_assert!(s.is_finished(&g));
        prop_assert!(s.resolve_step(&g, [Action::Sleep; 2]).is_err());
    }

    #[test]
    fn episode_totals_are_consistent(seed in any::<u64>(), d in 0usize..4, a in 0usize..4) {
        let roster = [
            HeuristicSpec::periodic(4),
            HeuristicSpec::awakening(0.05),
            HeuristicSpec::pac(4),
            HeuristicSpec::retaliating(2),
        ];
        let g = GameConfig::paper_default();
        let seeds = EpisodeSeeds::derive(seed);
        let run = || {
            let mut dp = make_heuristic(roster[d], seeds.defender).unwrap();
            let mut ap = make_heuristic(roster[a], seeds.attacker).unwrap();
            run_episode_with_seeds(&g, &mut dp, &mut ap, seeds, true).unwrap()
        };
        let r = run();
        prop_assert_eq!(&r, &run());
        let trace = r.trace.as_ref().unwrap();
        prop_assert_eq!(trace.len(), g.horizon as usize);
        for p in Player::ALL {
            let sum: f64 = trace.iter().map(|s| s.rewards[p.index()]).sum();
            prop_assert!((sum - r.reward(p)).abs() < 1e-9);
        }
        prop_assert_eq!(r.owned_steps[0][0] + r.owned_steps[1][0], g.horizon);
        prop_assert!((r.mean_ownership(Player::Defender) + r.mean_ownership(Player::Attacker) - 1.0).abs() < 1e-12);
    }
}
