//! Flat `key = value` run configuration. Blank lines and `#` comments are
//! ignored; unknown keys and repeated keys are errors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dualsys::{LearnParams, MctsConfig, RewardConstants, SwitchPolicy};
use thiserror::Error;

/// Anything wrong with the configuration itself, as opposed to a failure
/// while running it. The binary exits with code 2 for these.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {reason}")]
    Syntax { path: PathBuf, line: usize, reason: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {0:?} given twice")]
    DuplicateKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Every key, in the order the canonical echo writes them.
pub const KEYS: &[&str] = &[
    "layout",
    "qtable",
    "policy",
    "games",
    "seed",
    "workers",
    "out",
    "max_steps",
    "reward.food",
    "reward.step",
    "reward.win",
    "reward.death",
    "learn.learning_rate",
    "learn.discount",
    "learn.epsilon_start",
    "learn.epsilon_end",
    "learn.episodes",
    "learn.max_episode_steps",
    "learn.food_shaping",
    "learn.exploring_starts",
    "mcts.depth",
    "mcts.simulations",
    "mcts.exploration_c",
    "eval.score",
    "eval.food",
    "eval.ghost",
    "eval.ghost_cap",
    "eval.food_distance",
    "eval.loss",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// `None` means the built-in default layout.
    pub layout: Option<PathBuf>,
    /// Defaults to `qtable.txt` inside the output directory.
    pub qtable: Option<PathBuf>,
    pub policy: String,
    pub games: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub max_steps: u32,
    pub rewards: RewardConstants,
    pub learn: LearnParams,
    pub mcts: MctsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            layout: None,
            qtable: None,
            policy: "always-s2".into(),
            games: 300,
            seed: 7,
            workers: 1,
            out: PathBuf::from("out"),
            max_steps: dualsys::harness::DEFAULT_MAX_STEPS,
            rewards: RewardConstants::default(),
            learn: LearnParams::default(),
            mcts: MctsConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_text(&text, path)
    }

    pub fn parse_text(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "expected key = value".into(),
            })?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(ConfigError::DuplicateKey(key.into()));
            }
            seen.push(key);
            cfg.set(key, value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let w = &mut self.mcts.weights;
        match key {
            "layout" => self.layout = (v != "default").then(|| PathBuf::from(v)),
            "qtable" => self.qtable = Some(PathBuf::from(v)),
            "policy" => self.policy = v.into(),
            "games" => self.games = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "max_steps" => self.max_steps = parse(key, v)?,
            "reward.food" => self.rewards.food_reward = parse(key, v)?,
            "reward.step" => self.rewards.step_penalty = parse(key, v)?,
            "reward.win" => self.rewards.win_bonus = parse(key, v)?,
            "reward.death" => self.rewards.death_penalty = parse(key, v)?,
            "learn.learning_rate" => self.learn.learning_rate = parse(key, v)?,
            "learn.discount" => self.learn.discount = parse(key, v)?,
            "learn.epsilon_start" => self.learn.epsilon_start = parse(key, v)?,
            "learn.epsilon_end" => self.learn.epsilon_end = parse(key, v)?,
            "learn.episodes" => self.learn.training_episodes = parse(key, v)?,
            "learn.max_episode_steps" => self.learn.max_episode_steps = parse(key, v)?,
            "learn.food_shaping" => self.learn.food_shaping = parse(key, v)?,
            "learn.exploring_starts" => self.learn.exploring_starts = parse(key, v)?,
            "mcts.depth" => self.mcts.depth = parse(key, v)?,
            "mcts.simulations" => self.mcts.simulations = parse(key, v)?,
            "mcts.exploration_c" => self.mcts.exploration_c = parse(key, v)?,
            "eval.score" => w.score = parse(key, v)?,
            "eval.food" => w.food = parse(key, v)?,
            "eval.ghost" => w.ghost = parse(key, v)?,
            "eval.ghost_cap" => w.ghost_cap = parse(key, v)?,
            "eval.food_distance" => w.food_distance = parse(key, v)?,
            "eval.loss" => w.loss = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = ConfigError::Invalid;
        self.rewards.validate().map_err(invalid)?;
        self.learn.validate().map_err(invalid)?;
        self.mcts.validate().map_err(invalid)?;
        if self.games == 0 {
            return Err(invalid("games must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(invalid("workers must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps must be at least 1".into()));
        }
        if let Some(p) = &self.layout {
            if !p.is_file() {
                return Err(invalid(format!("layout file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn qtable_path(&self) -> PathBuf {
        self.qtable.clone().unwrap_or_else(|| self.out.join("qtable.txt"))
    }

    /// Parses and validates the policy string; `locdiff` maps are read here.
    pub fn switch_policy(&self) -> Result<SwitchPolicy, ConfigError> {
        SwitchPolicy::parse(&self.policy, None).map_err(|e| ConfigError::BadValue {
            key: "policy".into(),
            value: self.policy.clone(),
            reason: e.to_string(),
        })
    }

    fn value(&self, key: &str) -> String {
        let w = &self.mcts.weights;
        let path = |p: &Option<PathBuf>, none: &str| {
            p.as_ref().map_or_else(|| none.to_string(), |p| p.display().to_string())
        };
        match key {
            "layout" => path(&self.layout, "default"),
            "qtable" => self.qtable_path().display().to_string(),
            "policy" => self.policy.clone(),
            "games" => self.games.to_string(),
            "seed" => self.seed.to_string(),
            "workers" => self.workers.to_string(),
            "out" => self.out.display().to_string(),
            "max_steps" => self.max_steps.to_string(),
            "reward.food" => self.rewards.food_reward.to_string(),
            "reward.step" => self.rewards.step_penalty.to_string(),
            "reward.win" => self.rewards.win_bonus.to_string(),
            "reward.death" => self.rewards.death_penalty.to_string(),
            "learn.learning_rate" => self.learn.learning_rate.to_string(),
            "learn.discount" => self.learn.discount.to_string(),
            "learn.epsilon_start" => self.learn.epsilon_start.to_string(),
            "learn.epsilon_end" => self.learn.epsilon_end.to_string(),
            "learn.episodes" => self.learn.training_episodes.to_string(),
            "learn.max_episode_steps" => self.learn.max_episode_steps.to_string(),
            "learn.food_shaping" => self.learn.food_shaping.to_string(),
            "learn.exploring_starts" => self.learn.exploring_starts.to_string(),
            "mcts.depth" => self.mcts.depth.to_string(),
            "mcts.simulations" => self.mcts.simulations.to_string(),
            "mcts.exploration_c" => self.mcts.exploration_c.to_string(),
            "eval.score" => w.score.to_string(),
            "eval.food" => w.food.to_string(),
            "eval.ghost" => w.ghost.to_string(),
            "eval.ghost_cap" => w.ghost_cap.to_string(),
            "eval.food_distance" => w.food_distance.to_string(),
            "eval.loss" => w.loss.to_string(),
            _ => unreachable!("key list and accessor disagree on {key}"),
        }
    }

    /// Every key with its effective value. Parsing this text gives back the
    /// same configuration.
    pub fn canonical(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.value(k))).collect()
    }
}
