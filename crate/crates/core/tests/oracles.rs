//! Agents checked against independent brute-force oracles: value iteration
//! for the learner, exhaustive expectimax for the search, and hand-counted
//! ghost move distributions.

mod common;

use common::{corridor, expectimax_root, game, mcts_agreement, value_iteration_policy};
use dualsys::agents::mcts::{self, search};
use dualsys::rng;
use dualsys::*;

#[test]
fn learner_matches_value_iteration_on_corridors() {
    for len in 2..=8 {
        for shaping in [0.0, LearnParams::default().food_shaping] {
            let g = corridor(len);
            let params = LearnParams {
                discount: 0.9,
                training_episodes: 500,
                food_shaping: shaping,
                ..LearnParams::default()
            };
            let table = train(&g, &params, 11);
            let optimal = value_iteration_policy(&g, 0.9);
            for (cell, best) in optimal {
                let mut s = g.initial_state();
                s.player = cell;
                let got = s1_decide(&table, &g, &s).unwrap().action;
                assert_eq!(got, best, "len {len} shaping {shaping} at {cell}");
            }
        }
    }
}

#[test]
fn value_iteration_walks_east_on_six_cells() {
    let g = corridor(6);
    let policy = value_iteration_policy(&g, 0.9);
    assert_eq!(policy.len(), 5);
    assert!(policy.iter().all(|(_, a)| *a == Action::East));
}

#[test]
fn search_matches_expectimax() {
    let cfg = MctsConfig {
        simulations: 5000,
        ..MctsConfig::default()
    };
    // Fixtures whose best action is safe. The full set, including a state
    // where every action is likely fatal, is scored by the acceptance run.
    for (name, g) in common::search_fixtures().into_iter().filter(|f| f.0 != "cornered") {
        let s = g.initial_state();
        let agree = mcts_agreement(&g, &s, &cfg, 100);
        assert!(agree >= 0.98, "{name}: agreement {agree:.2}");
    }
}

#[test]
fn never_steps_into_certain_death() {
    // East walks into the ghost. Depth-1 expectimax scores it at the loss
    // value and everything else higher.
    let g = game("%%%%%%\n%.PG %\n%%%%%%");
    let cfg = MctsConfig {
        depth: 1,
        simulations: 20,
        ..MctsConfig::default()
    };
    let values = expectimax_root(&g, &g.initial_state(), &cfg);
    let east = values.iter().find(|v| v.0 == Action::East).unwrap().1;
    assert!(values.iter().all(|v| v.0 == Action::East || v.1 > east));
    for seed in 0..50 {
        let d = s2_decide(&g, &g.initial_state(), &cfg, &mut rng::from_seed(seed)).unwrap();
        assert_ne!(d.action, Action::East, "seed {seed}");
    }
}

#[test]
fn heads_for_nearer_food() {
    let g = game("%%%%%%%\n%.  P.%\n%%%%%%%");
    let cfg = MctsConfig {
        simulations: 200,
        ..MctsConfig::default()
    };
    // Eating now and eating after a pause reach the same depth-2 leaf, so
    // East ties with Stop; fixed action order prefers East.
    let values = expectimax_root(&g, &g.initial_state(), &cfg);
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(values[0], (Action::East, best));
    let east = (0..50)
        .filter(|&s| {
            let (root, _) = search(&g, &g.initial_state(), &cfg, &mut rng::from_seed(s)).unwrap();
            mcts::best_action(&root) == Some(Action::East)
        })
        .count();
    assert!(east >= 48, "east in {east}/50 seeds");
}

fn probs(g: &Game, ghost: Cell, player: Cell) -> Vec<(Action, f64)> {
    g.ghost_distribution_at(ghost, player).into()
}

fn assert_dist(got: &[(Action, f64)], want: &[(Action, f64)]) {
    assert_eq!(got.len(), want.len(), "{got:?}");
    for ((ga, gp), (wa, wp)) in got.iter().zip(want) {
        assert_eq!(ga, wa);
        assert!((gp - wp).abs() < 1e-12, "{ga}: {gp} vs {wp}");
    }
}

#[test]
fn ghost_distribution_corridor() {
    // Ghost at x=2, player due east. Legal {E, W}; only East closes in.
    let g = game("%%%%%%%\n% G P.%\n%%%%%%%");
    let s = g.initial_state();
    let got: Vec<_> = g.ghost_action_distribution(&s, 0).unwrap().into();
    assert_dist(&got, &[(Action::East, 0.8 + 0.2 / 2.0), (Action::West, 0.2 / 2.0)]);
}

#[test]
fn ghost_distribution_junction() {
    // Ghost at (2,2) with exits N, E, W. Player at (3,1): N and E both
    // reach distance 1, W reaches 3.
    let g = game("%%%%%\n% .P%\n% G %\n%%%%%");
    let got = probs(&g, Cell::new(2, 2), Cell::new(3, 1));
    let (m, r) = (0.8 / 2.0 + 0.2 / 3.0, 0.2 / 3.0);
    assert_dist(&got, &[(Action::North, m), (Action::East, m), (Action::West, r)]);
    assert!((m - 0.4667).abs() < 1e-4 && (r - 0.0667).abs() < 1e-4);
}

#[test]
fn ghost_distribution_crossroads() {
    // Four exits, player two cells north: one minimiser.
    let g = game("%%%%%\n%%P%%\n%%.%%\n%.G.%\n%%.%%\n%%%%%");
    let got = probs(&g, Cell::new(2, 3), Cell::new(2, 1));
    assert_dist(
        &got,
        &[
            (Action::North, 0.85),
            (Action::South, 0.05),
            (Action::East, 0.05),
            (Action::West, 0.05),
        ],
    );
}
