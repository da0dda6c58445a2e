//! Seeded episodes, benchmark campaigns and parameter sweeps.
//!
//! Episode `i` of a campaign always runs under `rng::derive(base_seed, i)`,
//! and within an episode the ghosts, the tree search and the switching
//! policy each draw from their own stream. Results therefore do not depend
//! on worker count or scheduling order.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::agents::mcts::{s2_decide, MctsConfig};
use crate::agents::qlearn::{s1_decide, QTable};
use crate::env::{Action, Cell, EnvError, Game, Status};
use crate::rng::{self, Stream};
use crate::stats::{DeathMap, StatsError};
use crate::system0::{overhead_units, SwitchError, SwitchPolicy, SystemChoice};

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub policy: SwitchPolicy,
    pub qtable: Arc<QTable>,
    pub mcts: MctsConfig,
    /// Episodes still running after this many moves end as losses.
    pub max_steps: u32,
}

pub const DEFAULT_MAX_STEPS: u32 = 1000;

impl AgentSpec {
    pub fn new(policy: SwitchPolicy, qtable: Arc<QTable>, mcts: MctsConfig) -> Self {
        Self {
            policy,
            qtable,
            mcts,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_policy(&self, policy: SwitchPolicy) -> Self {
        Self {
            policy,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("no results to export")]
    EmptyResults,
    #[error("sweep needs at least one parameter value")]
    EmptySweep,
    #[error("unknown sweep family {0:?}")]
    UnknownFamily(String),
    #[error("invalid sweep value {value} for {family}: {reason}")]
    BadSweepValue {
        family: SweepFamily,
        value: f64,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub seed: u64,
    pub won: bool,
    pub final_score: i64,
    pub steps: u32,
    pub wall_time: Duration,
    /// Decision costs of the systems used plus System-0 overhead.
    pub compute_units: u64,
    pub s1_moves: u32,
    pub s2_moves: u32,
    /// Where the player was caught; `None` for wins and truncated episodes.
    pub death_cell: Option<Cell>,
}

impl EpisodeResult {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &EpisodeResult) -> bool {
        EpisodeResult {
            wall_time: Duration::ZERO,
            ..self.clone()
        } == EpisodeResult {
            wall_time: Duration::ZERO,
            ..other.clone()
        }
    }
}

/// One move of an episode as routed by System 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveRecord {
    pub system: SystemChoice,
    /// The action the chosen system proposed.
    pub proposed: Action,
    /// The action handed to the environment.
    pub executed: Action,
    pub decision_units: u64,
    pub overhead_units: u64,
    pub reward: i64,
    pub food_remaining: usize,
    pub status: Status,
}

pub fn run_episode(game: &Game, spec: &AgentSpec, seed: u64) -> Result<EpisodeResult, HarnessError> {
    run_inner(game, spec, seed, None)
}

/// Like [`run_episode`] but also returns every move.
pub fn run_episode_traced(
    game: &Game,
    spec: &AgentSpec,
    seed: u64,
) -> Result<(EpisodeResult, Vec<MoveRecord>), HarnessError> {
    let mut trace = Vec::new();
    let result = run_inner(game, spec, seed, Some(&mut trace))?;
    Ok((result, trace))
}

fn run_inner(
    game: &Game,
    spec: &AgentSpec,
    seed: u64,
    mut trace: Option<&mut Vec<MoveRecord>>,
) -> Result<EpisodeResult, HarnessError> {
    if spec.max_steps == 0 {
        return Err(HarnessError::ZeroCount("max_steps"));
    }
    let start = Instant::now();
    let mut ghosts = rng::stream(seed, Stream::Ghosts);
    let mut search = rng::stream(seed, Stream::Search);
    let mut switch = rng::stream(seed, Stream::Switch);
    let overhead = overhead_units(&spec.policy);

    let mut state = game.initial_state();
    let mut compute_units = 0;
    let (mut s1_moves, mut s2_moves) = (0, 0);
    while !state.is_terminal() && state.step_count < spec.max_steps {
        let system = spec.policy.choose(&state, &game.layout, &mut switch)?;
        let decision = match system {
            SystemChoice::S1 => {
                s1_moves += 1;
                s1_decide(&spec.qtable, game, &state)?
            }
            SystemChoice::S2 => {
                s2_moves += 1;
                s2_decide(game, &state, &spec.mcts, &mut search)?
            }
        };
        compute_units += decision.compute_units + overhead;
        let out = game.step(state, decision.action, &mut ghosts)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(MoveRecord {
                system,
                proposed: decision.action,
                executed: decision.action,
                decision_units: decision.compute_units,
                overhead_units: overhead,
                reward: out.reward,
                food_remaining: out.next_state.food_remaining,
                status: out.next_state.status,
            });
        }
        state = out.next_state;
    }

    let won = state.status == Status::Won;
    Ok(EpisodeResult {
        seed,
        won,
        final_score: state.score,
        steps: state.step_count,
        wall_time: start.elapsed(),
        compute_units,
        s1_moves,
        s2_moves,
        death_cell: (state.status == Status::Lost).then_some(state.player),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSummary {
    pub n_games: usize,
    pub wins: usize,
    pub win_rate: f64,
    pub mean_score: f64,
    /// Seconds.
    pub mean_wall_time: f64,
    pub mean_compute_units: f64,
    /// Fraction of all moves decided by System 1.
    pub s1_usage_fraction: f64,
}

impl BenchmarkSummary {
    pub fn from_results(results: &[EpisodeResult]) -> Result<Self, HarnessError> {
        if results.is_empty() {
            return Err(HarnessError::EmptyResults);
        }
        let n = results.len();
        let wins = results.iter().filter(|r| r.won).count();
        let mean = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n as f64;
        let s1: u64 = results.iter().map(|r| u64::from(r.s1_moves)).sum();
        let steps: u64 = results.iter().map(|r| u64::from(r.steps)).sum();
        Ok(Self {
            n_games: n,
            wins,
            win_rate: wins as f64 / n as f64,
            mean_score: mean(&|r| r.final_score as f64),
            mean_wall_time: mean(&|r| r.wall_time.as_secs_f64()),
            mean_compute_units: mean(&|r| r.compute_units as f64),
            s1_usage_fraction: if steps == 0 {
                0.0
            } else {
                s1 as f64 / steps as f64
            },
        })
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &BenchmarkSummary) -> bool {
        BenchmarkSummary {
            mean_wall_time: 0.0,
            ..self.clone()
        } == BenchmarkSummary {
            mean_wall_time: 0.0,
            ..other.clone()
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, HarnessError> {
    if workers == 0 {
        return Err(HarnessError::ZeroCount("workers"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))
}

/// Runs `n_games` episodes on `workers` threads. Episode `i` uses seed
/// `rng::derive(base_seed, i)`; results come back in episode order.
pub fn run_benchmark(
    game: &Game,
    spec: &AgentSpec,
    n_games: usize,
    base_seed: u64,
    workers: usize,
) -> Result<(BenchmarkSummary, Vec<EpisodeResult>), HarnessError> {
    if n_games == 0 {
        return Err(HarnessError::ZeroCount("n_games"));
    }
    let results = pool(workers)?.install(|| {
        (0..n_games as u64)
            .into_par_iter()
            .map(|i| run_episode(game, spec, rng::derive(base_seed, i)))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok((BenchmarkSummary::from_results(&results)?, results))
}

/// Death statistics of a single-system agent over `n_games` episodes.
/// Workers accumulate private maps that are merged at the end.
pub fn collect_deaths(
    game: &Game,
    spec: &AgentSpec,
    system: SystemChoice,
    n_games: usize,
    base_seed: u64,
    workers: usize,
) -> Result<(DeathMap, Vec<EpisodeResult>), HarnessError> {
    let policy = match system {
        SystemChoice::S1 => SwitchPolicy::AlwaysS1,
        SystemChoice::S2 => SwitchPolicy::AlwaysS2,
    };
    let spec = spec.with_policy(policy);
    let (_, results) = run_benchmark(game, &spec, n_games, base_seed, workers)?;
    let empty = || DeathMap::new(&game.layout, system);
    let map = pool(workers)?.install(|| {
        results
            .par_chunks(64)
            .map(|chunk| {
                let mut m = empty();
                for r in chunk {
                    m.observe(r.death_cell)?;
                }
                Ok::<_, StatsError>(m)
            })
            .try_reduce(empty, |mut a, b| {
                a.merge(&b)?;
                Ok(a)
            })
    })?;
    Ok((map, results))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepFamily {
    RandomP,
    ProxS1Radius,
    ProxS2Radius,
    /// Food threshold F, with the escape radius held fixed.
    FoodThreshold { radius: usize },
}

impl SweepFamily {
    pub fn policy(&self, value: f64) -> Result<SwitchPolicy, HarnessError> {
        let bad = |reason: &str| HarnessError::BadSweepValue {
            family: *self,
            value,
            reason: reason.into(),
        };
        let radius = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(bad("radius must be a positive integer"))
            }
        };
        let policy = match *self {
            SweepFamily::RandomP => SwitchPolicy::Random { p: value },
            SweepFamily::ProxS1Radius => SwitchPolicy::ProximityEscapeS1 { radius: radius()? },
            SweepFamily::ProxS2Radius => SwitchPolicy::ProximityEscapeS2 { radius: radius()? },
            SweepFamily::FoodThreshold { radius } => SwitchPolicy::FoodThreshold {
                threshold: value,
                radius,
            },
        };
        policy.validate().map_err(|e| bad(&e.to_string()))?;
        Ok(policy)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepFamily::RandomP => "random-p",
            SweepFamily::ProxS1Radius => "prox-s1-r",
            SweepFamily::ProxS2Radius => "prox-s2-r",
            SweepFamily::FoodThreshold { .. } => "food-F",
        }
    }
}

impl fmt::Display for SweepFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepFamily {
    type Err = HarnessError;

    /// `food-F` uses escape radius 2 unless written `food-F:r=R`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random-p" => Ok(SweepFamily::RandomP),
            "prox-s1-r" => Ok(SweepFamily::ProxS1Radius),
            "prox-s2-r" => Ok(SweepFamily::ProxS2Radius),
            "food-F" => Ok(SweepFamily::FoodThreshold { radius: 2 }),
            other => other
                .strip_prefix("food-F:r=")
                .and_then(|r| r.parse().ok())
                .filter(|r| *r >= 1)
                .map(|radius| SweepFamily::FoodThreshold { radius })
                .ok_or_else(|| HarnessError::UnknownFamily(s.to_string())),
        }
    }
}

/// One benchmark per value, all sharing `base_seed` so rows are paired.
pub fn sweep(
    game: &Game,
    spec: &AgentSpec,
    family: SweepFamily,
    values: &[f64],
    n_games: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<(f64, BenchmarkSummary)>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    let policies = values
        .iter()
        .map(|&v| family.policy(v))
        .collect::<Result<Vec<_>, _>>()?;
    values
        .iter()
        .zip(policies)
        .map(|(&v, policy)| {
            let (summary, _) =
                run_benchmark(game, &spec.with_policy(policy), n_games, base_seed, workers)?;
            Ok((v, summary))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Summary,
    SortedScores,
    SortedTimes,
}

pub const SUMMARY_HEADER: &str = "system,win_rate,avg_time,avg_score,avg_compute,s1_fraction";
pub const SCORES_HEADER: &str = "rank,score";
pub const TIMES_HEADER: &str = "rank,time";
pub const SWEEP_HEADER: &str = "param,win_rate,avg_time,avg_score,avg_compute";

pub fn summary_row(label: &str, s: &BenchmarkSummary) -> String {
    format!(
        "{},{:.4},{:.4},{:.4},{:.4},{:.4}",
        label, s.win_rate, s.mean_wall_time, s.mean_score, s.mean_compute_units, s.s1_usage_fraction
    )
}

/// CSV text for one result set. Ranks start at 1; sorted curves are
/// ascending. Times are seconds; every float has four decimals.
pub fn export_results(
    label: &str,
    results: &[EpisodeResult],
    kind: ExportKind,
) -> Result<String, HarnessError> {
    if results.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut out = String::new();
    match kind {
        ExportKind::Summary => {
            let s = BenchmarkSummary::from_results(results)?;
            out.push_str(SUMMARY_HEADER);
            out.push('\n');
            out.push_str(&summary_row(label, &s));
            out.push('\n');
        }
        ExportKind::SortedScores => {
            let mut scores: Vec<i64> = results.iter().map(|r| r.final_score).collect();
            scores.sort_unstable();
            out.push_str(SCORES_HEADER);
            out.push('\n');
            for (i, s) in scores.iter().enumerate() {
                out.push_str(&format!("{},{}\n", i + 1, s));
            }
        }
        ExportKind::SortedTimes => {
            let mut times: Vec<Duration> = results.iter().map(|r| r.wall_time).collect();
            times.sort_unstable();
            out.push_str(TIMES_HEADER);
            out.push('\n');
            for (i, t) in times.iter().enumerate() {
                out.push_str(&format!("{},{:.4}\n", i + 1, t.as_secs_f64()));
            }
        }
    }
    Ok(out)
}

pub fn export_sweep(rows: &[(f64, BenchmarkSummary)]) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for (param, s) in rows {
        out.push_str(&format!(
            "{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            param, s.win_rate, s.mean_wall_time, s.mean_score, s.mean_compute_units
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Layout, RewardConstants};

    fn result(score: i64, won: bool, millis: u64) -> EpisodeResult {
        EpisodeResult {
            seed: 0,
            won,
            final_score: score,
            steps: 10,
            wall_time: Duration::from_millis(millis),
            compute_units: 20,
            s1_moves: 4,
            s2_moves: 6,
            death_cell: (!won).then_some(Cell::new(1, 1)),
        }
    }

    #[test]
    fn sorted_scores() {
        let rs = [result(5, true, 3), result(-1, false, 1), result(9, true, 2)];
        let csv = export_results("x", &rs, ExportKind::SortedScores).unwrap();
        assert_eq!(csv, "rank,score\n1,-1\n2,5\n3,9\n");
        let csv = export_results("x", &rs, ExportKind::SortedTimes).unwrap();
        assert_eq!(csv, "rank,time\n1,0.0010\n2,0.0020\n3,0.0030\n");
    }

    #[test]
    fn summary_format() {
        let rs = [
            result(1, true, 1),
            result(2, false, 1),
            result(3, false, 1),
            result(4, false, 1),
        ];
        let csv = export_results("always-s1", &rs, ExportKind::Summary).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(SUMMARY_HEADER));
        assert!(SUMMARY_HEADER.starts_with("system,win_rate,avg_time"));
        assert_eq!(
            lines.next(),
            Some("always-s1,0.2500,0.0010,2.5000,20.0000,0.4000")
        );
        assert!(matches!(
            export_results("x", &[], ExportKind::Summary),
            Err(HarnessError::EmptyResults)
        ));
    }

    #[test]
    fn singleton_summary() {
        let r = result(42, true, 5);
        let s = BenchmarkSummary::from_results(std::slice::from_ref(&r)).unwrap();
        assert_eq!(s.n_games, 1);
        assert_eq!(s.win_rate, 1.0);
        assert_eq!(s.mean_score, 42.0);
        assert_eq!(s.mean_compute_units, 20.0);
        assert_eq!(s.mean_wall_time, 0.005);
    }

    #[test]
    fn zero_food_episode() {
        let game = Game::new(Layout::parse("%%%\n%P%\n%%%").unwrap(), RewardConstants::default());
        let spec = AgentSpec::new(
            SwitchPolicy::AlwaysS2,
            Arc::new(QTable::new()),
            MctsConfig::default(),
        );
        let r = run_episode(&game, &spec, 1).unwrap();
        assert!(r.won);
        assert_eq!(r.steps, 0);
        assert_eq!(r.death_cell, None);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("random-p".parse::<SweepFamily>().unwrap(), SweepFamily::RandomP);
        assert_eq!(
            "food-F:r=3".parse::<SweepFamily>().unwrap(),
            SweepFamily::FoodThreshold { radius: 3 }
        );
        assert!("nope".parse::<SweepFamily>().is_err());
        assert!(SweepFamily::ProxS2Radius.policy(1.5).is_err());
        assert!(SweepFamily::RandomP.policy(1.5).is_err());
    }

    #[test]
    fn zero_counts_rejected() {
        let game = Game::new(Layout::default_layout(), RewardConstants::default());
        let spec = AgentSpec::new(SwitchPolicy::AlwaysS1, Arc::new(QTable::new()), MctsConfig::default());
        assert!(matches!(
            run_benchmark(&game, &spec, 0, 1, 1),
            Err(HarnessError::ZeroCount("n_games"))
        ));
        assert!(matches!(
            run_benchmark(&game, &spec, 1, 1, 0),
            Err(HarnessError::ZeroCount("workers"))
        ));
    }
}
