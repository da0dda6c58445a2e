//! The game world: maze, state, legal moves, ghost behaviour and the
//! transition function.
//!
//! A [`Game`] bundles an immutable [`Layout`] with its [`RewardConstants`].
//! [`Game::step`] consumes a [`GameState`] and returns the successor together
//! with the reward earned on that move. Ghost randomness is drawn from the
//! caller's random stream only, so identical (layout, actions, seed) inputs
//! replay identically.

mod layout;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

pub use layout::{FoodGrid, Layout, LayoutError, DEFAULT_LAYOUT};

/// Probability that a ghost takes a distance-minimising move.
pub const GHOST_GREEDY_PROB: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

pub fn manhattan(a: Cell, b: Cell) -> usize {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

/// Moves available to the player and the ghosts. Row 0 is the top of the
/// maze, so `North` decreases `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    North,
    South,
    East,
    West,
    Stop,
}

impl Action {
    /// All actions in the fixed tie-breaking order.
    pub const ALL: [Action; 5] = [
        Action::North,
        Action::South,
        Action::East,
        Action::West,
        Action::Stop,
    ];
    pub const MOVES: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::North => (0, -1),
            Action::South => (0, 1),
            Action::East => (1, 0),
            Action::West => (-1, 0),
            Action::Stop => (0, 0),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::North => "North",
            Action::South => "South",
            Action::East => "East",
            Action::West => "West",
            Action::Stop => "Stop",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown action {s:?}"))
    }
}

/// A set of actions, iterated in the fixed [`Action::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    pub fn insert(&mut self, action: Action) {
        self.0 |= 1 << action.index();
    }

    pub fn contains(self, action: Action) -> bool {
        self.0 >> action.index() & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut set = ActionSet::default();
        for a in iter {
            set.insert(a);
        }
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mover {
    Player,
    Ghost(usize),
}

/// Score units awarded by the transition function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewardConstants {
    pub food_reward: i64,
    /// Charged on every player move, including `Stop`.
    pub step_penalty: i64,
    pub win_bonus: i64,
    pub death_penalty: i64,
}

impl Default for RewardConstants {
    fn default() -> Self {
        Self {
            food_reward: 10,
            step_penalty: -1,
            win_bonus: 500,
            death_penalty: -500,
        }
    }
}

impl RewardConstants {
    pub fn validate(&self) -> Result<(), String> {
        if self.food_reward <= 0 {
            return Err("food_reward must be positive".into());
        }
        if self.step_penalty >= 0 {
            return Err("step_penalty must be negative".into());
        }
        if self.win_bonus <= 0 {
            return Err("win_bonus must be positive".into());
        }
        if self.death_penalty >= 0 {
            return Err("death_penalty must be negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Ongoing,
    Won,
    Lost,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Ongoing
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    pub player: Cell,
    pub ghosts: Vec<Cell>,
    pub food: FoodGrid,
    pub food_remaining: usize,
    pub step_count: u32,
    pub score: i64,
    pub status: Status,
}

impl GameState {
    pub fn is_terminal(&self) -> bool {
        self.status.is_terminal()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub next_state: GameState,
    pub reward: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("the game is already over")]
    TerminalState,
    #[error("illegal action {action} for {mover:?}")]
    IllegalAction { action: Action, mover: Mover },
    #[error("ghost index {0} out of range")]
    NoSuchGhost(usize),
    #[error("the layout has no ghosts")]
    NoGhosts,
}

/// Move distribution of a single ghost, in [`Action::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostMoves {
    entries: [(Action, f64); 5],
    len: usize,
}

impl GhostMoves {
    pub fn as_slice(&self) -> &[(Action, f64)] {
        &self.entries[..self.len]
    }

    pub fn probability(&self, action: Action) -> f64 {
        self.as_slice()
            .iter()
            .find(|(a, _)| *a == action)
            .map_or(0.0, |(_, p)| *p)
    }

    /// Inverse-CDF draw using one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(action, p) in self.as_slice() {
            acc += p;
            if u < acc {
                return action;
            }
        }
        self.entries[self.len - 1].0
    }
}

impl From<GhostMoves> for Vec<(Action, f64)> {
    fn from(moves: GhostMoves) -> Self {
        moves.as_slice().to_vec()
    }
}

/// A layout together with its scoring rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game {
    pub layout: Layout,
    pub rewards: RewardConstants,
}

impl Game {
    pub fn new(layout: Layout, rewards: RewardConstants) -> Self {
        Self { layout, rewards }
    }

    pub fn initial_state(&self) -> GameState {
        let layout = &self.layout;
        let food_remaining = layout.food_count();
        GameState {
            player: layout.player_start(),
            ghosts: layout.ghost_starts().to_vec(),
            food: layout.food().clone(),
            food_remaining,
            step_count: 0,
            score: 0,
            status: if food_remaining == 0 {
                Status::Won
            } else {
                Status::Ongoing
            },
        }
    }

    fn moves_from(&self, cell: Cell) -> ActionSet {
        Action::MOVES
            .into_iter()
            .filter(|a| self.layout.neighbour(cell, *a).is_some())
            .collect()
    }

    fn ghost_moves_from(&self, cell: Cell) -> ActionSet {
        let mut set = self.moves_from(cell);
        if set.is_empty() {
            set.insert(Action::Stop);
        }
        set
    }

    pub fn legal_actions(&self, state: &GameState, who: Mover) -> Result<ActionSet, EnvError> {
        if state.is_terminal() {
            return Err(EnvError::TerminalState);
        }
        match who {
            Mover::Player => Ok(self.player_actions(state.player)),
            Mover::Ghost(i) => {
                let ghost = *state.ghosts.get(i).ok_or(EnvError::NoSuchGhost(i))?;
                Ok(self.ghost_moves_from(ghost))
            }
        }
    }

    /// Player moves from `cell`; `Stop` is always included.
    pub fn player_actions(&self, cell: Cell) -> ActionSet {
        let mut set = self.moves_from(cell);
        set.insert(Action::Stop);
        set
    }

    pub fn ghost_action_distribution(
        &self,
        state: &GameState,
        ghost: usize,
    ) -> Result<GhostMoves, EnvError> {
        if state.is_terminal() {
            return Err(EnvError::TerminalState);
        }
        let cell = *state.ghosts.get(ghost).ok_or(EnvError::NoSuchGhost(ghost))?;
        Ok(self.ghost_distribution_at(cell, state.player))
    }

    /// Mixture of a greedy policy (uniform over Manhattan-distance minimisers)
    /// with weight 0.8 and a uniform-random policy over all legal moves with
    /// weight 0.2.
    pub fn ghost_distribution_at(&self, ghost: Cell, player: Cell) -> GhostMoves {
        let legal = self.ghost_moves_from(ghost);
        let mut dists = [usize::MAX; 5];
        let mut best = usize::MAX;
        for a in legal.iter() {
            let dest = self.layout.neighbour(ghost, a).unwrap_or(ghost);
            let d = manhattan(dest, player);
            dists[a.index()] = d;
            best = best.min(d);
        }
        let n_legal = legal.len() as f64;
        let n_best = legal.iter().filter(|a| dists[a.index()] == best).count() as f64;
        let random_share = (1.0 - GHOST_GREEDY_PROB) / n_legal;
        let greedy_share = GHOST_GREEDY_PROB / n_best;

        let mut entries = [(Action::Stop, 0.0); 5];
        let mut len = 0;
        for a in legal.iter() {
            let p = if dists[a.index()] == best {
                greedy_share + random_share
            } else {
                random_share
            };
            entries[len] = (a, p);
            len += 1;
        }
        GhostMoves { entries, len }
    }

    pub fn closest_ghost_distance(&self, state: &GameState) -> Result<usize, EnvError> {
        closest_ghost_distance(state)
    }

    /// The transition function. Ghost moves are sampled from `rng`, one
    /// uniform draw per ghost that gets to move.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: GameState,
        action: Action,
        rng: &mut R,
    ) -> Result<StepOutcome, EnvError> {
        self.advance(state, action, |moves, _| Ok(moves.sample(rng)))
    }

    /// Like [`Game::step`] with ghost moves supplied by the caller, one per
    /// ghost. Used for exact enumeration of chance outcomes.
    pub fn step_scripted(
        &self,
        state: GameState,
        action: Action,
        ghost_actions: &[Action],
    ) -> Result<StepOutcome, EnvError> {
        self.advance(state, action, |moves, i| {
            let a = *ghost_actions.get(i).ok_or(EnvError::NoSuchGhost(i))?;
            if moves.probability(a) > 0.0 {
                Ok(a)
            } else {
                Err(EnvError::IllegalAction {
                    action: a,
                    mover: Mover::Ghost(i),
                })
            }
        })
    }

    fn advance<F>(
        &self,
        mut state: GameState,
        action: Action,
        mut ghost_policy: F,
    ) -> Result<StepOutcome, EnvError>
    where
        F: FnMut(&GhostMoves, usize) -> Result<Action, EnvError>,
    {
        if state.is_terminal() {
            return Err(EnvError::TerminalState);
        }
        let rewards = self.rewards;
        let previous = state.player;
        let Some(dest) = self.layout.neighbour(previous, action).or(
            // Stop is the only action that keeps the player in place.
            (action == Action::Stop).then_some(previous),
        ) else {
            return Err(EnvError::IllegalAction {
                action,
                mover: Mover::Player,
            });
        };
        state.player = dest;
        let mut reward = 0;

        if state.ghosts.contains(&dest) {
            state.status = Status::Lost;
            reward += rewards.death_penalty;
        } else {
            let idx = self.layout.index(dest);
            if state.food.get(idx) {
                state.food.set(idx, false);
                state.food_remaining -= 1;
                reward += rewards.food_reward;
            }
            if state.food_remaining == 0 {
                state.status = Status::Won;
                reward += rewards.win_bonus;
            } else {
                for i in 0..state.ghosts.len() {
                    let from = state.ghosts[i];
                    let moves = self.ghost_distribution_at(from, dest);
                    let a = ghost_policy(&moves, i)?;
                    let to = self.layout.neighbour(from, a).unwrap_or(from);
                    state.ghosts[i] = to;
                    let swapped = from == dest && to == previous;
                    if to == dest || swapped {
                        state.status = Status::Lost;
                        reward += rewards.death_penalty;
                        break;
                    }
                }
            }
        }

        reward += rewards.step_penalty;
        state.step_count += 1;
        state.score += reward;
        Ok(StepOutcome {
            next_state: state,
            reward,
        })
    }
}

pub fn closest_ghost_distance(state: &GameState) -> Result<usize, EnvError> {
    state
        .ghosts
        .iter()
        .map(|g| manhattan(state.player, *g))
        .min()
        .ok_or(EnvError::NoGhosts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn game(text: &str) -> Game {
        Game::new(Layout::parse(text).unwrap(), RewardConstants::default())
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan(Cell::new(0, 0), Cell::new(0, 0)), 0);
        assert_eq!(manhattan(Cell::new(0, 0), Cell::new(2, 3)), 5);
        assert_eq!(manhattan(Cell::new(4, 1), Cell::new(1, 5)), 7);
    }

    #[test]
    fn initial_state_fields() {
        let g = Game::new(Layout::default_layout(), RewardConstants::default());
        let s = g.initial_state();
        assert_eq!(s.food_remaining, 65);
        assert_eq!(s.step_count, 0);
        assert_eq!(s.score, 0);
        assert_eq!(s.status, Status::Ongoing);

        let empty = game("%%%\n%P%\n%%%");
        assert_eq!(empty.initial_state().status, Status::Won);
    }

    #[test]
    fn legal_action_sets() {
        let room = game("%%%%\n%P.%\n%%%%");
        let mut s = room.initial_state();
        s.player = Cell::new(1, 1);
        assert_eq!(
            room.legal_actions(&s, Mover::Player).unwrap(),
            [Action::East, Action::Stop].into_iter().collect()
        );

        let enclosed = game("%%%\n%P%\n%%%");
        let mut s = enclosed.initial_state();
        s.status = Status::Ongoing;
        s.food_remaining = 1;
        assert_eq!(
            enclosed
                .legal_actions(&s, Mover::Player)
                .unwrap()
                .iter()
                .collect::<Vec<_>>(),
            vec![Action::Stop]
        );

        let corridor = game("%%%%%%%\n%P.G..%\n%%%%%%%");
        let mut s = corridor.initial_state();
        s.player = Cell::new(2, 1);
        let player: Vec<_> = corridor.legal_actions(&s, Mover::Player).unwrap().iter().collect();
        assert_eq!(player, vec![Action::East, Action::West, Action::Stop]);
        let ghost: Vec<_> = corridor.legal_actions(&s, Mover::Ghost(0)).unwrap().iter().collect();
        assert_eq!(ghost, vec![Action::East, Action::West]);
    }

    #[test]
    fn single_move_ghost() {
        let g = game("%%%%%%\n%G..P%\n%%%%%%");
        let s = g.initial_state();
        let d = g.ghost_action_distribution(&s, 0).unwrap();
        assert_eq!(d.as_slice(), &[(Action::East, 1.0)]);

        // a ghost with nowhere to go stays put
        let room = game("%%%\n%P%\n%%%");
        let mut s = room.initial_state();
        s.status = Status::Ongoing;
        s.food_remaining = 1;
        s.ghosts = vec![Cell::new(1, 1)];
        let d = room.ghost_action_distribution(&s, 0).unwrap();
        assert_eq!(d.as_slice(), &[(Action::Stop, 1.0)]);
    }

    #[test]
    fn terminal_rejections() {
        let g = game("%%%%\n%P.%\n%%%%");
        let s = g.initial_state();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let won = g.step(s, Action::East, &mut rng).unwrap().next_state;
        assert_eq!(won.status, Status::Won);
        assert_eq!(g.legal_actions(&won, Mover::Player), Err(EnvError::TerminalState));
        assert_eq!(
            g.step(won.clone(), Action::Stop, &mut rng),
            Err(EnvError::TerminalState)
        );
        assert!(g.ghost_action_distribution(&won, 0).is_err());
    }

    #[test]
    fn illegal_player_move() {
        let g = game("%%%%\n%P.%\n%%%%");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            g.step(g.initial_state(), Action::North, &mut rng),
            Err(EnvError::IllegalAction { action: Action::North, .. })
        ));
    }

    #[test]
    fn reward_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // food, ghost far away in a separate pocket
        let g = game("%%%%%%%%%%\n%P..%   G%\n%% %%%% %%\n%        %\n%%%%%%%%%%");
        let out = g.step(g.initial_state(), Action::East, &mut rng).unwrap();
        assert_eq!(out.reward, 9);
        assert_eq!(out.next_state.status, Status::Ongoing);

        let g = game("%%%%%\n%P.G%\n%%%%%");
        let s = g.initial_state();
        let out = g.step(s, Action::East, &mut rng).unwrap();
        assert_eq!(out.reward, 509);
        assert_eq!(out.next_state.status, Status::Won);

        let g = game("%%%%%%\n%PG..%\n%%%%%%");
        let out = g.step(g.initial_state(), Action::East, &mut rng).unwrap();
        assert_eq!(out.reward, -501);
        assert_eq!(out.next_state.status, Status::Lost);
        assert_eq!(out.next_state.score, -501);
        assert_eq!(out.next_state.food_remaining, 2);
    }

    #[test]
    fn swap_counts_as_collision() {
        let g = game("%%%%%%%\n%.PG..%\n%%%%%%%");
        let s = g.initial_state();
        // Player steps west to (1,1), ghost scripted onto (2,1): the ghost
        // lands on the cell the player left, which is not a swap.
        let out = g.step_scripted(s.clone(), Action::West, &[Action::West]).unwrap();
        assert_eq!(out.next_state.status, Status::Ongoing);
        // Player stops, ghost walks onto it.
        let out = g.step_scripted(s, Action::Stop, &[Action::West]).unwrap();
        assert_eq!(out.next_state.status, Status::Lost);
    }

    #[test]
    fn closest_ghost() {
        let g = game("%%%%%%%%%%\n%P  G   G%\n%%%%%%%%%%");
        let mut s = g.initial_state();
        assert_eq!(closest_ghost_distance(&s), Ok(3));
        s.ghosts = vec![Cell::new(1, 1)];
        assert_eq!(closest_ghost_distance(&s), Ok(0));
        s.ghosts.clear();
        assert_eq!(closest_ghost_distance(&s), Err(EnvError::NoGhosts));
    }

    #[test]
    fn action_parse() {
        assert_eq!("east".parse::<Action>(), Ok(Action::East));
        assert!("up".parse::<Action>().is_err());
    }
}
