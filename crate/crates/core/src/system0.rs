//! The meta-controller. Before every move it picks which system decides,
//! using only cheap arithmetic on the current state. It never proposes an
//! action itself.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::env::{closest_ghost_distance, EnvError, GameState, Layout};
use crate::stats::{PreferenceMap, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SystemChoice {
    S1,
    S2,
}

impl SystemChoice {
    pub fn number(self) -> u8 {
        match self {
            SystemChoice::S1 => 1,
            SystemChoice::S2 => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(SystemChoice::S1),
            2 => Some(SystemChoice::S2),
            _ => None,
        }
    }
}

impl fmt::Display for SystemChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.number())
    }
}

impl FromStr for SystemChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "1" => Ok(SystemChoice::S1),
            "s2" | "2" => Ok(SystemChoice::S2),
            _ => Err(format!("unknown system {s:?}")),
        }
    }
}

/// Switching rule. `radius` is the proximity radius r: a ghost counts as
/// near when the closest-ghost Manhattan distance d satisfies d < r.
#[derive(Debug, Clone, PartialEq)]
pub enum SwitchPolicy {
    AlwaysS1,
    AlwaysS2,
    /// System 1 with probability `p`, otherwise System 2.
    Random { p: f64 },
    /// Near ghost: System 1, otherwise System 2.
    ProximityEscapeS1 { radius: usize },
    /// Near ghost: System 2, otherwise System 1.
    ProximityEscapeS2 { radius: usize },
    /// Near ghost: System 2. Otherwise System 2 while the food fraction is
    /// above `threshold`, System 1 after.
    FoodThreshold { threshold: f64, radius: usize },
    /// As [`SwitchPolicy::FoodThreshold`] with the food clause swapped.
    FoodThresholdInverted { threshold: f64, radius: usize },
    /// Near ghost: whichever system dies less often on the player's cell.
    /// Otherwise System 1.
    LocationDifficulty {
        radius: usize,
        prefs: Arc<PreferenceMap>,
        source: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("bad policy spec {spec:?}: {reason}")]
    Syntax { spec: String, reason: String },
    #[error("invalid policy parameter: {0}")]
    Invalid(String),
    #[error("cannot load preference map {path}: {source}")]
    Map {
        path: PathBuf,
        #[source]
        source: StatsError,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SwitchError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("layout has no initial food")]
    ZeroInitialFood,
}

/// Overhead charged for one System-0 decision. The fixed policies make no
/// decision and cost nothing.
pub fn overhead_units(policy: &SwitchPolicy) -> u64 {
    match policy {
        SwitchPolicy::AlwaysS1 | SwitchPolicy::AlwaysS2 => 0,
        _ => 1,
    }
}

pub fn food_fraction(state: &GameState, layout: &Layout) -> Result<f64, SwitchError> {
    let initial = layout.food_count();
    if initial == 0 {
        return Err(SwitchError::ZeroInitialFood);
    }
    Ok(state.food_remaining as f64 / initial as f64)
}

impl SwitchPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let radius_ok = |r: usize| {
            if r >= 1 {
                Ok(())
            } else {
                Err(PolicyError::Invalid("radius must be at least 1".into()))
            }
        };
        let threshold_ok = |f: f64| {
            if f > 0.0 && f < 1.0 {
                Ok(())
            } else {
                Err(PolicyError::Invalid("food threshold must lie in (0, 1)".into()))
            }
        };
        match self {
            SwitchPolicy::AlwaysS1 | SwitchPolicy::AlwaysS2 => Ok(()),
            SwitchPolicy::Random { p } => {
                if (0.0..=1.0).contains(p) {
                    Ok(())
                } else {
                    Err(PolicyError::Invalid("p must lie in [0, 1]".into()))
                }
            }
            SwitchPolicy::ProximityEscapeS1 { radius }
            | SwitchPolicy::ProximityEscapeS2 { radius }
            | SwitchPolicy::LocationDifficulty { radius, .. } => radius_ok(*radius),
            SwitchPolicy::FoodThreshold { threshold, radius }
            | SwitchPolicy::FoodThresholdInverted { threshold, radius } => {
                radius_ok(*radius)?;
                threshold_ok(*threshold)
            }
        }
    }

    /// Picks the system for this move. Only `Random` draws from `rng`, and
    /// it draws exactly once per call.
    pub fn choose<R: Rng + ?Sized>(
        &self,
        state: &GameState,
        layout: &Layout,
        rng: &mut R,
    ) -> Result<SystemChoice, SwitchError> {
        use SystemChoice::{S1, S2};
        if state.is_terminal() {
            return Err(EnvError::TerminalState.into());
        }
        let near = |r: usize| closest_ghost_distance(state).is_ok_and(|d| d < r);
        Ok(match self {
            SwitchPolicy::AlwaysS1 => S1,
            SwitchPolicy::AlwaysS2 => S2,
            SwitchPolicy::Random { p } => {
                if rng.gen::<f64>() < *p {
                    S1
                } else {
                    S2
                }
            }
            SwitchPolicy::ProximityEscapeS1 { radius } => {
                if near(*radius) {
                    S1
                } else {
                    S2
                }
            }
            SwitchPolicy::ProximityEscapeS2 { radius } => {
                if near(*radius) {
                    S2
                } else {
                    S1
                }
            }
            SwitchPolicy::FoodThreshold { threshold, radius } => {
                if near(*radius) || food_fraction(state, layout)? > *threshold {
                    S2
                } else {
                    S1
                }
            }
            SwitchPolicy::FoodThresholdInverted { threshold, radius } => {
                if near(*radius) || food_fraction(state, layout)? <= *threshold {
                    S2
                } else {
                    S1
                }
            }
            SwitchPolicy::LocationDifficulty { radius, prefs, .. } => {
                if near(*radius) {
                    prefs.get(state.player).unwrap_or(S2)
                } else {
                    S1
                }
            }
        })
    }

    /// Parses the policy grammar
    /// `always-s1 | always-s2 | random:p=P | prox-s1:r=R | prox-s2:r=R |
    /// food:F=F,r=R | food-inv:F=F,r=R | locdiff:r=R,map=PATH`.
    /// A `locdiff` map path is resolved against `base_dir` when relative.
    pub fn parse(spec: &str, base_dir: Option<&Path>) -> Result<Self, PolicyError> {
        let syntax = |reason: &str| PolicyError::Syntax {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let spec_trim = spec.trim();
        let (name, args) = spec_trim.split_once(':').unwrap_or((spec_trim, ""));
        let mut params: Vec<(&str, &str)> = Vec::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| syntax("parameters must be key=value"))?;
            params.push((k.trim(), v.trim()));
        }
        let get = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let allowed = |keys: &[&str]| -> Result<(), PolicyError> {
            match params.iter().find(|(k, _)| !keys.contains(k)) {
                Some((k, _)) => Err(syntax(&format!("unexpected parameter {k:?}"))),
                None => Ok(()),
            }
        };
        let num = |key: &str| -> Result<f64, PolicyError> {
            get(key)
                .ok_or_else(|| syntax(&format!("missing parameter {key}")))?
                .parse::<f64>()
                .map_err(|_| syntax(&format!("{key} is not a number")))
        };
        let radius = |default: Option<usize>| -> Result<usize, PolicyError> {
            match get("r") {
                Some(v) => v.parse().map_err(|_| syntax("r is not a non-negative integer")),
                None => default.ok_or_else(|| syntax("missing parameter r")),
            }
        };

        let policy = match name {
            "always-s1" => {
                allowed(&[])?;
                SwitchPolicy::AlwaysS1
            }
            "always-s2" => {
                allowed(&[])?;
                SwitchPolicy::AlwaysS2
            }
            "random" => {
                allowed(&["p"])?;
                SwitchPolicy::Random { p: num("p")? }
            }
            "prox-s1" => {
                allowed(&["r"])?;
                SwitchPolicy::ProximityEscapeS1 {
                    radius: radius(None)?,
                }
            }
            "prox-s2" => {
                allowed(&["r"])?;
                SwitchPolicy::ProximityEscapeS2 {
                    radius: radius(None)?,
                }
            }
            "food" | "food-inv" => {
                allowed(&["F", "r"])?;
                let threshold = num("F")?;
                let radius = radius(Some(2))?;
                if name == "food" {
                    SwitchPolicy::FoodThreshold { threshold, radius }
                } else {
                    SwitchPolicy::FoodThresholdInverted { threshold, radius }
                }
            }
            "locdiff" => {
                allowed(&["r", "map"])?;
                let rel = PathBuf::from(get("map").ok_or_else(|| syntax("missing parameter map"))?);
                let path = match base_dir {
                    Some(dir) if rel.is_relative() => dir.join(&rel),
                    _ => rel,
                };
                let text = std::fs::read_to_string(&path).map_err(|source| PolicyError::Io {
                    path: path.clone(),
                    source,
                })?;
                let prefs = PreferenceMap::load(&text).map_err(|source| PolicyError::Map {
                    path: path.clone(),
                    source,
                })?;
                SwitchPolicy::LocationDifficulty {
                    radius: radius(None)?,
                    prefs: Arc::new(prefs),
                    source: Some(path),
                }
            }
            _ => return Err(syntax("unknown policy name")),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl fmt::Display for SwitchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchPolicy::AlwaysS1 => write!(f, "always-s1"),
            SwitchPolicy::AlwaysS2 => write!(f, "always-s2"),
            SwitchPolicy::Random { p } => write!(f, "random:p={p}"),
            SwitchPolicy::ProximityEscapeS1 { radius } => write!(f, "prox-s1:r={radius}"),
            SwitchPolicy::ProximityEscapeS2 { radius } => write!(f, "prox-s2:r={radius}"),
            SwitchPolicy::FoodThreshold { threshold, radius } => {
                write!(f, "food:F={threshold},r={radius}")
            }
            SwitchPolicy::FoodThresholdInverted { threshold, radius } => {
                write!(f, "food-inv:F={threshold},r={radius}")
            }
            SwitchPolicy::LocationDifficulty { radius, source, .. } => match source {
                Some(path) => write!(f, "locdiff:r={radius},map={}", path.display()),
                None => write!(f, "locdiff:r={radius}"),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Cell, Game, RewardConstants};
    use crate::rng;

    fn state_with(distance: usize, food: usize) -> (Game, GameState) {
        let g = Game::new(
            Layout::parse("%%%%%%%%%%%%%%\n%P.........G %\n%%%%%%%%%%%%%%").unwrap(),
            RewardConstants::default(),
        );
        let mut s = g.initial_state();
        s.player = Cell::new(1, 1);
        s.ghosts = vec![Cell::new(1 + distance, 1)];
        s.food_remaining = food;
        (g, s)
    }

    fn choose(policy: &SwitchPolicy, distance: usize, food: usize) -> SystemChoice {
        let (g, s) = state_with(distance, food);
        policy.choose(&s, &g.layout, &mut rng::from_seed(0)).unwrap()
    }

    #[test]
    fn proximity_rules() {
        let p2 = SwitchPolicy::ProximityEscapeS2 { radius: 2 };
        assert_eq!(choose(&p2, 1, 9), SystemChoice::S2);
        assert_eq!(choose(&p2, 2, 9), SystemChoice::S1);
        let p1 = SwitchPolicy::ProximityEscapeS1 { radius: 2 };
        assert_eq!(choose(&p1, 1, 9), SystemChoice::S1);
        assert_eq!(choose(&p1, 2, 9), SystemChoice::S2);
    }

    #[test]
    fn food_rules() {
        // the fixture layout has 9 food cells
        let f = SwitchPolicy::FoodThreshold {
            threshold: 0.9,
            radius: 2,
        };
        assert_eq!(choose(&f, 5, 9), SystemChoice::S2);
        assert_eq!(choose(&f, 5, 4), SystemChoice::S1);
        assert_eq!(choose(&f, 1, 4), SystemChoice::S2);
        let inv = SwitchPolicy::FoodThresholdInverted {
            threshold: 0.9,
            radius: 2,
        };
        assert_eq!(choose(&inv, 5, 9), SystemChoice::S1);
        assert_eq!(choose(&inv, 5, 4), SystemChoice::S2);
        assert_eq!(choose(&inv, 1, 9), SystemChoice::S2);
    }

    #[test]
    fn food_fraction_values() {
        let g = Game::new(Layout::default_layout(), RewardConstants::default());
        let mut s = g.initial_state();
        assert_eq!(food_fraction(&s, &g.layout), Ok(1.0));
        s.food_remaining = 13;
        assert!((food_fraction(&s, &g.layout).unwrap() - 0.2).abs() < 1e-12);
        s.food_remaining = 0;
        assert_eq!(food_fraction(&s, &g.layout), Ok(0.0));
        let empty = Layout::parse("%%%\n%P%\n%%%").unwrap();
        assert_eq!(
            food_fraction(&s, &empty),
            Err(SwitchError::ZeroInitialFood)
        );
    }

    #[test]
    fn random_degenerate() {
        let (g, s) = state_with(3, 5);
        let always1 = SwitchPolicy::Random { p: 1.0 };
        let always2 = SwitchPolicy::Random { p: 0.0 };
        for seed in 0..50 {
            let mut r = rng::from_seed(seed);
            assert_eq!(always1.choose(&s, &g.layout, &mut r).unwrap(), SystemChoice::S1);
            assert_eq!(always2.choose(&s, &g.layout, &mut r).unwrap(), SystemChoice::S2);
        }
    }

    #[test]
    fn parse_grammar() {
        let cases = [
            ("always-s1", SwitchPolicy::AlwaysS1),
            ("always-s2", SwitchPolicy::AlwaysS2),
            ("random:p=0.1", SwitchPolicy::Random { p: 0.1 }),
            ("prox-s1:r=1", SwitchPolicy::ProximityEscapeS1 { radius: 1 }),
            ("prox-s2:r=2", SwitchPolicy::ProximityEscapeS2 { radius: 2 }),
            (
                "food:F=0.9,r=2",
                SwitchPolicy::FoodThreshold {
                    threshold: 0.9,
                    radius: 2,
                },
            ),
            (
                "food-inv:F=0.9,r=2",
                SwitchPolicy::FoodThresholdInverted {
                    threshold: 0.9,
                    radius: 2,
                },
            ),
        ];
        for (text, expected) in cases {
            let parsed = SwitchPolicy::parse(text, None).unwrap();
            assert_eq!(parsed, expected);
            assert_eq!(parsed.to_string(), text);
        }
        assert!(SwitchPolicy::parse("random:p=1.5", None).is_err());
        assert!(SwitchPolicy::parse("prox-s2:r=0", None).is_err());
        assert!(SwitchPolicy::parse("prox-s2", None).is_err());
        assert!(SwitchPolicy::parse("food:F=1,r=2", None).is_err());
        assert!(SwitchPolicy::parse("bogus", None).is_err());
        assert!(SwitchPolicy::parse("always-s1:x=1", None).is_err());
        assert!(SwitchPolicy::parse("locdiff:r=2,map=/nonexistent/file", None).is_err());
    }

    #[test]
    fn terminal_state_rejected() {
        let (g, mut s) = state_with(3, 5);
        s.status = crate::env::Status::Won;
        assert_eq!(
            SwitchPolicy::AlwaysS1.choose(&s, &g.layout, &mut rng::from_seed(0)),
            Err(SwitchError::Env(EnvError::TerminalState))
        );
    }
}
