//! Tabular Q-learning over an abstracted state key.
//!
//! Raw game states cannot be tabulated (the food grid alone has 2^65
//! configurations), so states are reduced to a [`FeatureKey`]: where the
//! nearest ghost is, which way the nearest food lies, the walls around the
//! player and a coarse food-remaining bucket. Inference is a handful of
//! table lookups and never simulates the game.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use super::Decision;
use crate::env::{manhattan, Action, ActionSet, Cell, EnvError, FoodGrid, Game, GameState, Mover};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FoodLevel {
    High,
    Mid,
    Low,
}

impl FoodLevel {
    fn of(remaining: usize, initial: usize) -> Self {
        if 3 * remaining > 2 * initial {
            FoodLevel::High
        } else if 3 * remaining > initial {
            FoodLevel::Mid
        } else {
            FoodLevel::Low
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            FoodLevel::High => "high",
            FoodLevel::Mid => "mid",
            FoodLevel::Low => "low",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "high" => Some(FoodLevel::High),
            "mid" => Some(FoodLevel::Mid),
            "low" => Some(FoodLevel::Low),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureKey {
    /// Sign of (ghost.x - player.x) for the closest ghost.
    pub ghost_dx: i8,
    /// Sign of (ghost.y - player.y) for the closest ghost.
    pub ghost_dy: i8,
    /// Manhattan distance to the closest ghost, saturated at 3. Layouts
    /// without ghosts read as 3. At distance 3 the direction fields are 0.
    pub ghost_dist: u8,
    /// First move on a shortest maze path to the nearest food.
    pub food_dir: Action,
    /// Wall bits around the player: N=1, S=2, E=4, W=8.
    pub walls: u8,
    pub food_level: FoodLevel,
}

/// Ghosts at this Manhattan distance or more read as direction (0, 0).
const FAR_GHOST: usize = 3;

pub fn extract_key(game: &Game, state: &GameState) -> Result<FeatureKey, EnvError> {
    if state.is_terminal() {
        return Err(EnvError::TerminalState);
    }
    let player = state.player;
    let closest = state
        .ghosts
        .iter()
        .min_by_key(|g| manhattan(player, **g))
        .copied();
    let (ghost_dx, ghost_dy, ghost_dist) = match closest {
        // Direction only matters once a ghost is close; keeping it for far
        // ghosts splits the table into many rarely-visited keys.
        Some(g) if manhattan(player, g) < FAR_GHOST => (
            g.x.cmp(&player.x) as i8,
            g.y.cmp(&player.y) as i8,
            manhattan(player, g) as u8,
        ),
        _ => (0, 0, FAR_GHOST as u8),
    };
    let walls = Action::MOVES
        .into_iter()
        .enumerate()
        .filter(|(_, a)| game.layout.neighbour(player, *a).is_none())
        .fold(0u8, |bits, (i, _)| bits | 1 << i);
    Ok(FeatureKey {
        ghost_dx,
        ghost_dy,
        ghost_dist,
        food_dir: nearest_food_direction(game, state),
        walls,
        food_level: FoodLevel::of(state.food_remaining, game.layout.food_count()),
    })
}

/// BFS from the player; neighbours are expanded in N, S, E, W order so the
/// first-found shortest path wins ties.
fn nearest_food_direction(game: &Game, state: &GameState) -> Action {
    let layout = &game.layout;
    let mut first_move: Vec<Option<Action>> = vec![None; layout.cell_count()];
    let mut seen = vec![false; layout.cell_count()];
    let mut queue = std::collections::VecDeque::new();
    seen[layout.index(state.player)] = true;
    for a in Action::MOVES {
        if let Some(next) = layout.neighbour(state.player, a) {
            let i = layout.index(next);
            if !seen[i] {
                seen[i] = true;
                first_move[i] = Some(a);
                queue.push_back(next);
            }
        }
    }
    while let Some(cell) = queue.pop_front() {
        let i = layout.index(cell);
        if state.food.get(i) {
            return first_move[i].unwrap_or(Action::Stop);
        }
        for next in layout.open_neighbours(cell) {
            let ni = layout.index(next);
            if !seen[ni] {
                seen[ni] = true;
                first_move[ni] = first_move[i];
                queue.push_back(next);
            }
        }
    }
    Action::Stop
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub training_episodes: u32,
    /// Safety cap on a single training episode.
    pub max_episode_steps: u32,
    /// Training-only bonus: +w when a move shortens the maze distance to the
    /// nearest food, -w when it lengthens it. Zero trains on the raw
    /// environment reward.
    pub food_shaping: f64,
    /// Start each episode with a random fraction of the food already eaten,
    /// so late-game keys get visited as often as early ones.
    pub exploring_starts: bool,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            discount: 0.5,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            training_episodes: 1000,
            max_episode_steps: 10_000,
            food_shaping: 3.0,
            exploring_starts: true,
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err("learning_rate must lie in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err("discount must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err("epsilon must lie in [0, 1]".into());
        }
        if !(self.food_shaping.is_finite() && self.food_shaping >= 0.0) {
            return Err("food_shaping must be finite and non-negative".into());
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` on the first episode to
    /// `epsilon_end` on the last.
    pub fn epsilon(&self, episode: u32) -> f64 {
        if self.training_episodes <= 1 {
            return self.epsilon_start;
        }
        let t = f64::from(episode) / f64::from(self.training_episodes - 1);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QEntry {
    pub value: f64,
    pub visits: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QTable {
    entries: BTreeMap<(FeatureKey, Action), QEntry>,
}

#[derive(Debug, Error, PartialEq)]
pub enum QTableError {
    #[error("missing or malformed header")]
    BadHeader,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub const QTABLE_HEADER: &str =
    "ghost_dx,ghost_dy,ghost_dist,food_dir,wall_n,wall_s,wall_e,wall_w,food_level,action,value,visits";

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Missing entries read as zero.
    pub fn value(&self, key: &FeatureKey, action: Action) -> f64 {
        self.entries
            .get(&(*key, action))
            .map_or(0.0, |e| e.value)
    }

    pub fn visits(&self, key: &FeatureKey, action: Action) -> u64 {
        self.entries.get(&(*key, action)).map_or(0, |e| e.visits)
    }

    pub fn set(&mut self, key: FeatureKey, action: Action, value: f64) {
        self.entries.entry((key, action)).or_default().value = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(FeatureKey, Action), &QEntry)> {
        self.entries.iter()
    }

    /// Multiplies every value by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for e in self.entries.values_mut() {
            e.value *= factor;
        }
    }

    /// Highest-valued action in `legal`; ties go to the earliest action in
    /// North, South, East, West, Stop order.
    pub fn greedy(&self, key: &FeatureKey, legal: ActionSet) -> Option<Action> {
        let mut best: Option<(Action, f64)> = None;
        for a in legal.iter() {
            let v = self.value(key, a);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| a)
    }

    /// One-step Q-learning backup. `next` is `None` for terminal successors.
    pub fn update(
        &mut self,
        key: FeatureKey,
        action: Action,
        reward: f64,
        next: Option<(&FeatureKey, ActionSet)>,
        params: &LearnParams,
    ) {
        let future = next
            .map(|(k, legal)| {
                legal
                    .iter()
                    .map(|a| self.value(k, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .filter(|v| v.is_finite())
            .unwrap_or(0.0);
        let entry = self.entries.entry((key, action)).or_default();
        let alpha = params.learning_rate;
        entry.value = (1.0 - alpha) * entry.value + alpha * (reward + params.discount * future);
        entry.visits += 1;
    }

    pub fn save(&self) -> String {
        let mut out = String::with_capacity(64 * (self.entries.len() + 1));
        out.push_str(QTABLE_HEADER);
        out.push('\n');
        for ((k, a), e) in &self.entries {
            let bit = |i: u8| k.walls >> i & 1;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                k.ghost_dx,
                k.ghost_dy,
                k.ghost_dist,
                k.food_dir,
                bit(0),
                bit(1),
                bit(2),
                bit(3),
                k.food_level.as_str(),
                a,
                e.value,
                e.visits
            ));
        }
        out
    }

    pub fn load(text: &str) -> Result<Self, QTableError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == QTABLE_HEADER => {}
            _ => return Err(QTableError::BadHeader),
        }
        let mut table = QTable::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| QTableError::Parse {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 12 {
                return Err(err(format!("expected 12 fields, found {}", fields.len())));
            }
            let sign = |s: &str| -> Result<i8, QTableError> {
                match s.parse::<i8>() {
                    Ok(v) if (-1..=1).contains(&v) => Ok(v),
                    _ => Err(err(format!("bad sign {s:?}"))),
                }
            };
            let bit = |s: &str| -> Result<u8, QTableError> {
                match s {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    _ => Err(err(format!("bad wall flag {s:?}"))),
                }
            };
            let ghost_dist = match fields[2].parse::<u8>() {
                Ok(d) if d <= 3 => d,
                _ => return Err(err(format!("bad distance bucket {:?}", fields[2]))),
            };
            let key = FeatureKey {
                ghost_dx: sign(fields[0])?,
                ghost_dy: sign(fields[1])?,
                ghost_dist,
                food_dir: fields[3].parse().map_err(err)?,
                walls: bit(fields[4])? | bit(fields[5])? << 1 | bit(fields[6])? << 2 | bit(fields[7])? << 3,
                food_level: FoodLevel::parse(fields[8])
                    .ok_or_else(|| err(format!("bad food level {:?}", fields[8])))?,
            };
            let action: Action = fields[9].parse().map_err(err)?;
            let value: f64 = fields[10]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(format!("bad value {:?}", fields[10])))?;
            let visits: u64 = fields[11]
                .parse()
                .map_err(|_| err(format!("bad visit count {:?}", fields[11])))?;
            if table
                .entries
                .insert((key, action), QEntry { value, visits })
                .is_some()
            {
                return Err(err("duplicate entry".into()));
            }
        }
        Ok(table)
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ghost({},{},{}) food {} walls {:04b} {}",
            self.ghost_dx,
            self.ghost_dy,
            self.ghost_dist,
            self.food_dir,
            self.walls,
            self.food_level.as_str()
        )
    }
}

/// Runs `params.training_episodes` epsilon-greedy episodes from the layout's
/// start state, backing up every transition. Deterministic in `seed`.
pub fn train(game: &Game, params: &LearnParams, seed: u64) -> QTable {
    let mut table = QTable::new();
    for episode in 0..params.training_episodes {
        let episode_seed = rng::derive(seed, u64::from(episode));
        let mut explore = rng::stream(episode_seed, Stream::Exploration);
        let mut ghosts = rng::stream(episode_seed, Stream::Ghosts);
        let epsilon = params.epsilon(episode);

        let mut state = game.initial_state();
        if params.exploring_starts {
            thin_food(&mut state, &mut explore);
        }
        let mut steps = 0;
        while !state.is_terminal() && steps < params.max_episode_steps {
            let key = extract_key(game, &state).expect("ongoing state");
            let legal = game.player_actions(state.player);
            let action = if explore.gen::<f64>() < epsilon {
                let pick = explore.gen_range(0..legal.len());
                legal.iter().nth(pick).expect("index within legal set")
            } else {
                table.greedy(&key, legal).expect("player always has Stop")
            };
            let before = food_distance(game, state.player, &state.food);
            let food = state.food.clone();
            let out = game
                .step(state, action, &mut ghosts)
                .expect("legal action on ongoing state");
            let next_key = extract_key(game, &out.next_state).ok();
            let next_legal = game.player_actions(out.next_state.player);
            let after = food_distance(game, out.next_state.player, &food);
            let shaping = params.food_shaping * (before - after).signum();
            table.update(
                key,
                action,
                out.reward as f64 + shaping,
                next_key.as_ref().map(|k| (k, next_legal)),
                params,
            );
            state = out.next_state;
            steps += 1;
        }
    }
    table
}

/// Keeps each pellet with a probability drawn once per episode, never
/// clearing the board.
fn thin_food(state: &mut GameState, rng: &mut impl Rng) {
    let keep: f64 = rng.gen();
    let cells: Vec<usize> = state.food.iter().collect();
    for i in cells {
        if rng.gen::<f64>() > keep && state.food_remaining > 1 {
            state.food.set(i, false);
            state.food_remaining -= 1;
        }
    }
}

fn food_distance(game: &Game, from: Cell, food: &FoodGrid) -> f64 {
    game.layout.nearest_food_distance(from, food).unwrap_or(0) as f64
}

/// Greedy lookup. Costs one unit per legal action scored.
pub fn s1_decide(table: &QTable, game: &Game, state: &GameState) -> Result<Decision, EnvError> {
    let start = Instant::now();
    let key = extract_key(game, state)?;
    let legal = game.legal_actions(state, Mover::Player)?;
    let action = table.greedy(&key, legal).expect("player always has Stop");
    Ok(Decision {
        action,
        compute_units: legal.len() as u64,
        wall_time: start.elapsed(),
    })
}
