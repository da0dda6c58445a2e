//! The two decision systems. [`qlearn`] is the fast learned lookup,
//! [`mcts`] the slow bounded-depth tree search.

pub mod mcts;
pub mod qlearn;

use std::time::Duration;

use crate::env::Action;

/// An action together with what it cost to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: Action,
    /// Elementary evaluations performed: legal actions scored for the
    /// lookup agent, simulated environment steps for the search agent.
    pub compute_units: u64,
    pub wall_time: Duration,
}
