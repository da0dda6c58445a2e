//! Oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use dualsys::agents::mcts::{self, evaluate_leaf_towards};
use dualsys::env::FoodGrid;
use dualsys::rng;
use dualsys::*;

pub fn game(text: &str) -> Game {
    Game::new(Layout::parse(text).unwrap(), RewardConstants::default())
}

/// Ghost-free corridor of `len` open cells, player at the west end and a
/// single pellet at the east end.
pub fn corridor(len: usize) -> Game {
    let wall = "%".repeat(len + 2);
    let inner = format!("P{}.", " ".repeat(len - 2));
    game(&format!("{wall}\n%{inner}%\n{wall}"))
}

/// Optimal action in every non-terminal cell of a ghost-free layout with one
/// pellet, found by value iteration on the true reward structure. Ties go
/// to the earlier action in N, S, E, W, Stop order.
pub fn value_iteration_policy(game: &Game, gamma: f64) -> Vec<(Cell, Action)> {
    assert!(game.layout.ghost_starts().is_empty() && game.layout.food_count() == 1);
    let cells: Vec<Cell> = game.layout.open_cells().collect();
    let food = game.layout.food().iter().next().unwrap();
    let goal = game.layout.cell_at(food);
    let r = game.rewards;
    let q = |v: &[f64], c: Cell, a: Action| {
        let next = game.layout.neighbour(c, a).unwrap_or(c);
        if next == goal {
            (r.food_reward + r.win_bonus + r.step_penalty) as f64
        } else {
            r.step_penalty as f64 + gamma * v[game.layout.index(next)]
        }
    };
    let mut v = vec![0.0; game.layout.cell_count()];
    for _ in 0..10_000 {
        let mut delta: f64 = 0.0;
        for &c in cells.iter().filter(|c| **c != goal) {
            let best = game
                .player_actions(c)
                .iter()
                .map(|a| q(&v, c, a))
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[game.layout.index(c)]).abs());
            v[game.layout.index(c)] = best;
        }
        if delta < 1e-12 {
            break;
        }
    }
    cells
        .into_iter()
        .filter(|c| *c != goal)
        .map(|c| {
            let mut best = (Action::Stop, f64::NEG_INFINITY);
            for a in game.player_actions(c).iter() {
                let x = q(&v, c, a);
                if x > best.1 + 1e-9 {
                    best = (a, x);
                }
            }
            (c, best.0)
        })
        .collect()
}

/// Exact depth-limited expectimax. Every joint ghost reply is enumerated
/// with its probability; ghosts react to the player's new cell. Leaves use
/// the search's own evaluation with food targets fixed at the root.
pub fn expectimax(game: &Game, state: &GameState, depth: u32, w: &EvalWeights, targets: &FoodGrid) -> f64 {
    if state.is_terminal() || depth == 0 {
        return evaluate_leaf_towards(game, state, w, targets);
    }
    game.player_actions(state.player)
        .iter()
        .map(|a| action_value(game, state, a, depth, w, targets))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn action_value(game: &Game, state: &GameState, a: Action, depth: u32, w: &EvalWeights, targets: &FoodGrid) -> f64 {
    let dest = game.layout.neighbour(state.player, a).unwrap_or(state.player);
    let per_ghost: Vec<Vec<(Action, f64)>> = state
        .ghosts
        .iter()
        .map(|g| game.ghost_distribution_at(*g, dest).into())
        .collect();
    joint(&per_ghost)
        .into_iter()
        .map(|(moves, p)| {
            let out = game.step_scripted(state.clone(), a, &moves).unwrap();
            p * expectimax(game, &out.next_state, depth - 1, w, targets)
        })
        .sum()
}

fn joint(per_ghost: &[Vec<(Action, f64)>]) -> Vec<(Vec<Action>, f64)> {
    per_ghost.iter().fold(vec![(Vec::new(), 1.0)], |acc, dist| {
        acc.iter()
            .flat_map(|(moves, p)| {
                dist.iter().map(move |&(a, q)| {
                    let mut m = moves.clone();
                    m.push(a);
                    (m, p * q)
                })
            })
            .collect()
    })
}

pub fn expectimax_root(game: &Game, state: &GameState, cfg: &MctsConfig) -> Vec<(Action, f64)> {
    game.player_actions(state.player)
        .iter()
        .map(|a| (a, action_value(game, state, a, cfg.depth, &cfg.weights, &state.food)))
        .collect()
}

/// Fraction of seeds on which the search picks an expectimax-optimal action.
pub fn mcts_agreement(game: &Game, state: &GameState, cfg: &MctsConfig, seeds: u64) -> f64 {
    let values = expectimax_root(game, state, cfg);
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let optimal: Vec<Action> = values
        .iter()
        .filter(|v| v.1 >= best - 1e-6 * best.abs().max(1.0))
        .map(|v| v.0)
        .collect();
    let hits = (0..seeds)
        .filter(|&s| {
            let (root, _) = mcts::search(game, state, cfg, &mut rng::from_seed(s)).unwrap();
            optimal.contains(&mcts::best_action(&root).unwrap())
        })
        .count();
    hits as f64 / seeds as f64
}

/// Small states whose depth-2 trees can be enumerated.
pub fn search_fixtures() -> Vec<(&'static str, Game)> {
    vec![
        ("nearer food east", game("%%%%%%%\n%.  P.%\n%%%%%%%")),
        ("ghost two east", game("%%%%%%%\n%.P G.%\n%%%%%%%")),
        ("cornered", game("%%%%%%%\n%.PG .%\n%%%%%%%")),
        ("ghost below junction", game("%%%%%%%\n%. . .%\n%.%P%.%\n%. G .%\n%%%%%%%")),
        ("ghost diagonal", game("%%%%%%%\n%.   .%\n%.%P%.%\n%.  G.%\n%%%%%%%")),
        ("two ghosts loop", game("%%%%%%%\n%G . .%\n%.%P%.%\n%. . G%\n%%%%%%%")),
        ("default start", Game::new(Layout::default_layout(), RewardConstants::default())),
    ]
}
