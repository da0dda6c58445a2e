//! A grid-world pursuit game played by a two-system agent.
//!
//! System 1 is a greedy lookup into a learned Q-table: cheap, not very
//! good. System 2 is a depth-limited Monte-Carlo tree search: expensive,
//! more reliable. Before every move a System-0 switching policy decides
//! which of the two acts. The [`harness`] runs seeded campaigns and reports
//! win rate, score and compute for any policy.

pub mod agents;
pub mod env;
pub mod harness;
pub mod rng;
pub mod stats;
pub mod system0;

pub use agents::mcts::{evaluate_leaf, s2_decide, ucb1_select, EvalWeights, MctsConfig};
pub use agents::qlearn::{extract_key, s1_decide, train, FeatureKey, LearnParams, QTable};
pub use agents::Decision;
pub use env::{
    closest_ghost_distance, manhattan, Action, Cell, Game, GameState, Layout, RewardConstants,
    Status,
};
pub use harness::{run_benchmark, run_episode, AgentSpec, BenchmarkSummary, EpisodeResult};
pub use stats::{build_preference, DeathMap, PreferenceMap};
pub use system0::{SwitchPolicy, SystemChoice};
