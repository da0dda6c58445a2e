//! Bounded-depth Monte-Carlo Tree Search.
//!
//! Decision nodes hold a concrete [`GameState`]; each legal player action
//! is a chance node whose children are the distinct ghost outcomes sampled
//! so far. Search depth counts player plies, with every ply followed by the
//! ghosts' stochastic reply. Leaves are scored by [`evaluate_leaf`] rather
//! than by rollouts.

use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use super::Decision;
use crate::env::{closest_ghost_distance, Action, EnvError, FoodGrid, Game, GameState, Mover, Status};

/// Default value of a lost state. Far below any reachable ongoing value.
pub const LOSS_VALUE: f64 = -1.0e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalWeights {
    pub score: f64,
    pub food: f64,
    pub ghost: f64,
    /// Ghost distances beyond this many cells are not rewarded further.
    pub ghost_cap: usize,
    /// Penalty per cell of maze distance to the nearest food.
    pub food_distance: f64,
    /// Value of any lost state.
    pub loss: f64,
}

impl Default for EvalWeights {
    fn default() -> Self {
        Self {
            score: 1.0,
            food: 4.0,
            ghost: 1.5,
            ghost_cap: 3,
            food_distance: 2.0,
            loss: LOSS_VALUE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MctsConfig {
    /// Player plies searched below the root.
    pub depth: u32,
    pub simulations: u32,
    pub exploration_c: f64,
    pub weights: EvalWeights,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            simulations: 80,
            exploration_c: 1.4,
            weights: EvalWeights::default(),
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.depth < 1 {
            return Err("mcts depth must be at least 1".into());
        }
        if self.simulations < 1 {
            return Err("mcts simulations must be at least 1".into());
        }
        if !(self.exploration_c >= 0.0) {
            return Err("mcts exploration constant must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MctsError {
    #[error("node has no children")]
    NoChildren,
    #[error("node has not been visited")]
    Unvisited,
}

/// Heuristic state value: weighted score, minus remaining food, plus capped
/// distance to the closest ghost, minus maze distance to the nearest food.
pub fn evaluate_leaf(game: &Game, state: &GameState, weights: &EvalWeights) -> f64 {
    evaluate_leaf_towards(game, state, weights, &state.food)
}

/// [`evaluate_leaf`] with the food-distance term measured to `targets`
/// instead of the state's own food. The search passes the food present at
/// its root, so eating a pellet never looks worse than standing next to it.
pub fn evaluate_leaf_towards(
    game: &Game,
    state: &GameState,
    weights: &EvalWeights,
    targets: &FoodGrid,
) -> f64 {
    match state.status {
        Status::Lost => weights.loss,
        Status::Won => weights.score * state.score as f64 + game.rewards.win_bonus as f64,
        Status::Ongoing => {
            let ghost = closest_ghost_distance(state)
                .unwrap_or(weights.ghost_cap)
            .min(weights.ghost_cap);
            let food_dist = game
                .layout
                .nearest_food_distance(state.player, targets)
                .unwrap_or(0);
            weights.score * state.score as f64 - weights.food * state.food_remaining as f64
                + weights.ghost * ghost as f64
                - weights.food_distance * food_dist as f64
        }
    }
}

/// A player action under a decision node, with the ghost outcomes seen
/// after taking it.
#[derive(Debug, Clone)]
pub struct ChanceNode {
    pub action: Action,
    pub visit_count: u64,
    pub total_value: f64,
    pub outcomes: Vec<SearchNode>,
}

impl ChanceNode {
    pub fn mean_value(&self) -> f64 {
        if self.visit_count == 0 {
            0.0
        } else {
            self.total_value / self.visit_count as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub state: GameState,
    pub visit_count: u64,
    pub total_value: f64,
    /// One entry per legal action, in fixed action order. Empty until the
    /// node is first expanded.
    pub children: Vec<ChanceNode>,
    pub depth_remaining: u32,
}

impl SearchNode {
    pub fn mean_value(&self) -> f64 {
        if self.visit_count == 0 {
            0.0
        } else {
            self.total_value / self.visit_count as f64
        }
    }

    pub fn new(state: GameState, depth_remaining: u32) -> Self {
        Self {
            state,
            visit_count: 0,
            total_value: 0.0,
            children: Vec::new(),
            depth_remaining,
        }
    }

    fn expand(&mut self, game: &Game) {
        if self.children.is_empty() {
            self.children = game
                .player_actions(self.state.player)
                .iter()
                .map(|action| ChanceNode {
                    action,
                    visit_count: 0,
                    total_value: 0.0,
                    outcomes: Vec::new(),
                })
                .collect();
        }
    }

    fn outcome_mut(&mut self, child: usize, state: &GameState) -> Option<&mut SearchNode> {
        self.children[child]
            .outcomes
            .iter_mut()
            .find(|n| same_outcome(&n.state, state))
    }
}

// Player position and food are fixed by the action; only the ghosts and
// the resulting status vary between samples.
fn same_outcome(a: &GameState, b: &GameState) -> bool {
    a.status == b.status && a.ghosts == b.ghosts
}

fn ucb1_index(node: &SearchNode, c: f64) -> Result<usize, MctsError> {
    if node.children.is_empty() {
        return Err(MctsError::NoChildren);
    }
    if let Some(i) = node.children.iter().position(|ch| ch.visit_count == 0) {
        return Ok(i);
    }
    if node.visit_count == 0 {
        return Err(MctsError::Unvisited);
    }
    let ln_parent = (node.visit_count as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, ch) in node.children.iter().enumerate() {
        let score = ch.mean_value() + c * (ln_parent / ch.visit_count as f64).sqrt();
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

/// UCB1 over the node's actions. Unvisited actions are tried first, in
/// fixed action order.
pub fn ucb1_select(node: &SearchNode, c: f64) -> Result<Action, MctsError> {
    ucb1_index(node, c).map(|i| node.children[i].action)
}

struct Search<'a, R: ?Sized> {
    game: &'a Game,
    config: &'a MctsConfig,
    rng: &'a mut R,
    targets: FoodGrid,
    steps: u64,
}

impl<R: Rng + ?Sized> Search<'_, R> {
    fn leaf(&self, node: &mut SearchNode) -> f64 {
        let v = evaluate_leaf_towards(self.game, &node.state, &self.config.weights, &self.targets);
        node.visit_count += 1;
        node.total_value += v;
        v
    }

    /// One select/expand/sample/evaluate/backup pass. Returns the node's
    /// value estimate after the backup.
    fn simulate(&mut self, node: &mut SearchNode) -> f64 {
        if node.state.is_terminal() || node.depth_remaining == 0 {
            return self.leaf(node);
        }
        node.expand(self.game);
        let child = ucb1_index(node, self.config.exploration_c).expect("expanded, ongoing node");
        let action = node.children[child].action;
        let out = self
            .game
            .step(node.state.clone(), action, self.rng)
            .expect("legal action on ongoing state");
        self.steps += 1;

        match node.outcome_mut(child, &out.next_state) {
            Some(next) => {
                self.simulate(next);
            }
            None => {
                let mut next = SearchNode::new(out.next_state, node.depth_remaining - 1);
                self.leaf(&mut next);
                node.children[child].outcomes.push(next);
            }
        }
        let ch = &mut node.children[child];
        ch.visit_count += 1;
        ch.total_value = ch.outcomes.iter().map(|o| o.visit_count as f64 * o.mean_value()).sum();
        node.visit_count += 1;
        // A max over a partly tried action set is biased low, so the static
        // value stands until every action has been tried once.
        let value = if node.children.iter().all(|c| c.visit_count > 0) {
            node.children
                .iter()
                .map(ChanceNode::mean_value)
                .fold(f64::NEG_INFINITY, f64::max)
        } else {
            evaluate_leaf_towards(self.game, &node.state, &self.config.weights, &self.targets)
        };
        node.total_value = value * node.visit_count as f64;
        value
    }
}

/// Builds the search tree for `state`. Returns the root and the number of
/// environment steps simulated.
pub fn search<R: Rng + ?Sized>(
    game: &Game,
    state: &GameState,
    config: &MctsConfig,
    rng: &mut R,
) -> Result<(SearchNode, u64), EnvError> {
    if state.is_terminal() {
        return Err(EnvError::TerminalState);
    }
    let mut root = SearchNode::new(state.clone(), config.depth);
    let mut search = Search {
        game,
        config,
        rng,
        targets: state.food.clone(),
        steps: 0,
    };
    for _ in 0..config.simulations {
        search.simulate(&mut root);
    }
    Ok((root, search.steps))
}

/// Most-visited root action; ties go to the higher mean value, then to the
/// earlier action in fixed order.
pub fn best_action(root: &SearchNode) -> Option<Action> {
    let mut best: Option<&ChanceNode> = None;
    for ch in &root.children {
        let better = match best {
            None => true,
            Some(b) => {
                ch.visit_count > b.visit_count
                    || (ch.visit_count == b.visit_count && ch.mean_value() > b.mean_value())
            }
        };
        if better {
            best = Some(ch);
        }
    }
    best.map(|ch| ch.action)
}

pub fn s2_decide<R: Rng + ?Sized>(
    game: &Game,
    state: &GameState,
    config: &MctsConfig,
    rng: &mut R,
) -> Result<Decision, EnvError> {
    let start = Instant::now();
    let legal = game.legal_actions(state, Mover::Player)?;
    if legal.len() == 1 {
        return Ok(Decision {
            action: legal.iter().next().expect("non-empty"),
            compute_units: 1,
            wall_time: start.elapsed(),
        });
    }
    let (root, steps) = search(game, state, config, rng)?;
    Ok(Decision {
        action: best_action(&root).expect("root has children"),
        compute_units: steps.max(1),
        wall_time: start.elapsed(),
    })
}
