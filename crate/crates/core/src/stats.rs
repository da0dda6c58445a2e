//! Where single-system agents die, and the per-cell system preference
//! derived from it.
//!
//! File formats:
//!
//! ```text
//! deathmap,<system>,<width>,<height>,<games>
//! x,y,count            one line per nonzero cell, row-major
//!
//! prefmap,<width>,<height>
//! x,y,{1|2}            one line per non-wall cell, row-major
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::env::{Cell, Layout};
use crate::system0::SystemChoice;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("cell {0} is a wall")]
    WallCell(Cell),
    #[error("cell {0} is outside the grid")]
    OutOfBounds(Cell),
    #[error("grid dimensions or systems do not match")]
    DimensionMismatch,
    #[error("sample sizes differ by more than 10% ({s1} vs {s2} games)")]
    UnbalancedSamples { s1: u64, s2: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> StatsError {
    StatsError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeathMap {
    width: usize,
    height: usize,
    system: SystemChoice,
    games_observed: u64,
    counts: Vec<u64>,
    walls: Vec<bool>,
}

impl DeathMap {
    pub fn new(layout: &Layout, system: SystemChoice) -> Self {
        let walls = (0..layout.cell_count())
            .map(|i| layout.is_wall(layout.cell_at(i)))
            .collect();
        Self {
            width: layout.width(),
            height: layout.height(),
            system,
            games_observed: 0,
            counts: vec![0; layout.cell_count()],
            walls,
        }
    }

    pub fn system(&self) -> SystemChoice {
        self.system
    }

    pub fn games_observed(&self) -> u64 {
        self.games_observed
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn index(&self, cell: Cell) -> Result<usize, StatsError> {
        if cell.x >= self.width || cell.y >= self.height {
            return Err(StatsError::OutOfBounds(cell));
        }
        let i = cell.y * self.width + cell.x;
        if self.walls[i] {
            return Err(StatsError::WallCell(cell));
        }
        Ok(i)
    }

    pub fn count(&self, cell: Cell) -> u64 {
        self.index(cell).map_or(0, |i| self.counts[i])
    }

    pub fn total_deaths(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts one finished game, and its death cell if it was lost.
    pub fn observe(&mut self, death: Option<Cell>) -> Result<(), StatsError> {
        if let Some(cell) = death {
            self.record_death(cell)?;
        }
        self.games_observed += 1;
        Ok(())
    }

    pub fn record_death(&mut self, cell: Cell) -> Result<(), StatsError> {
        let i = self.index(cell)?;
        self.counts[i] += 1;
        Ok(())
    }

    /// Cell-wise sum. Associative and commutative.
    pub fn merge(&mut self, other: &DeathMap) -> Result<(), StatsError> {
        if self.width != other.width
            || self.height != other.height
            || self.system != other.system
            || self.walls != other.walls
        {
            return Err(StatsError::DimensionMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.games_observed += other.games_observed;
        Ok(())
    }

    pub fn save(&self) -> String {
        let mut out = format!(
            "deathmap,{},{},{},{}\n",
            self.system, self.width, self.height, self.games_observed
        );
        for (i, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                let _ = writeln!(out, "{},{},{}", i % self.width, i / self.width, c);
            }
        }
        out
    }

    /// Parses a saved map against the layout it was recorded on.
    pub fn load(text: &str, layout: &Layout) -> Result<Self, StatsError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 5 || fields[0] != "deathmap" {
            return Err(parse_err(1, "expected deathmap,<system>,<width>,<height>,<games>"));
        }
        let system: SystemChoice = fields[1].parse().map_err(|e: String| parse_err(1, e))?;
        let num = |s: &str, line: usize| -> Result<u64, StatsError> {
            s.parse::<u64>()
                .map_err(|_| parse_err(line, format!("bad number {s:?}")))
        };
        let width = num(fields[2], 1)? as usize;
        let height = num(fields[3], 1)? as usize;
        if width != layout.width() || height != layout.height() {
            return Err(StatsError::DimensionMismatch);
        }
        let mut map = DeathMap::new(layout, system);
        map.games_observed = num(fields[4], 1)?;
        for (i, line) in lines {
            let line_no = i + 1;
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(parse_err(line_no, "expected x,y,count"));
            }
            let cell = Cell::new(num(parts[0], line_no)? as usize, num(parts[1], line_no)? as usize);
            let count = num(parts[2], line_no)?;
            let idx = map
                .index(cell)
                .map_err(|e| parse_err(line_no, e.to_string()))?;
            if map.counts[idx] != 0 {
                return Err(parse_err(line_no, format!("duplicate cell {cell}")));
            }
            map.counts[idx] = count;
        }
        if map.total_deaths() > map.games_observed {
            return Err(parse_err(1, "more deaths than games observed"));
        }
        Ok(map)
    }
}

/// Per-cell choice of the system that dies less often there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceMap {
    width: usize,
    height: usize,
    choices: Vec<Option<SystemChoice>>,
}

impl PreferenceMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `None` on walls and outside the grid.
    pub fn get(&self, cell: Cell) -> Option<SystemChoice> {
        if cell.x >= self.width || cell.y >= self.height {
            return None;
        }
        self.choices[cell.y * self.width + cell.x]
    }

    pub fn save(&self) -> String {
        let mut out = format!("prefmap,{},{}\n", self.width, self.height);
        for (i, choice) in self.choices.iter().enumerate() {
            if let Some(c) = choice {
                let _ = writeln!(out, "{},{},{}", i % self.width, i / self.width, c.number());
            }
        }
        out
    }

    pub fn load(text: &str) -> Result<Self, StatsError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 3 || fields[0] != "prefmap" {
            return Err(parse_err(1, "expected prefmap,<width>,<height>"));
        }
        let num = |s: &str, line: usize| -> Result<usize, StatsError> {
            s.parse::<usize>()
                .map_err(|_| parse_err(line, format!("bad number {s:?}")))
        };
        let width = num(fields[1], 1)?;
        let height = num(fields[2], 1)?;
        let mut choices = vec![None; width * height];
        for (i, line) in lines {
            let line_no = i + 1;
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(parse_err(line_no, "expected x,y,system"));
            }
            let (x, y) = (num(parts[0], line_no)?, num(parts[1], line_no)?);
            if x >= width || y >= height {
                return Err(parse_err(line_no, "cell outside the grid"));
            }
            let choice = parts[2]
                .parse::<u8>()
                .ok()
                .and_then(SystemChoice::from_number)
                .ok_or_else(|| parse_err(line_no, format!("bad system {:?}", parts[2])))?;
            if choices[y * width + x].replace(choice).is_some() {
                return Err(parse_err(line_no, "duplicate cell"));
            }
        }
        Ok(Self {
            width,
            height,
            choices,
        })
    }

    /// True when every open cell of `layout` has a choice.
    pub fn covers(&self, layout: &Layout) -> bool {
        self.width == layout.width()
            && self.height == layout.height()
            && layout.open_cells().all(|c| self.get(c).is_some())
    }
}

/// Picks, per open cell, the system with strictly fewer deaths there. Equal
/// counts (including cells nobody died on) go to System 2.
pub fn build_preference(
    deaths_s1: &DeathMap,
    deaths_s2: &DeathMap,
) -> Result<PreferenceMap, StatsError> {
    if deaths_s1.width != deaths_s2.width
        || deaths_s1.height != deaths_s2.height
        || deaths_s1.walls != deaths_s2.walls
    {
        return Err(StatsError::DimensionMismatch);
    }
    let (a, b) = (deaths_s1.games_observed, deaths_s2.games_observed);
    if a.abs_diff(b) * 10 > a.max(b) {
        return Err(StatsError::UnbalancedSamples { s1: a, s2: b });
    }
    let choices = deaths_s1
        .walls
        .iter()
        .enumerate()
        .map(|(i, &wall)| {
            (!wall).then(|| {
                if deaths_s1.counts[i] < deaths_s2.counts[i] {
                    SystemChoice::S1
                } else {
                    SystemChoice::S2
                }
            })
        })
        .collect();
    Ok(PreferenceMap {
        width: deaths_s1.width,
        height: deaths_s1.height,
        choices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Layout {
        Layout::parse("%%%%%%\n%P...%\n%.%%.%\n%....%\n%%%%%%").unwrap()
    }

    #[test]
    fn record_and_accumulate() {
        let l = layout();
        let mut m = DeathMap::new(&l, SystemChoice::S1);
        m.record_death(Cell::new(3, 3)).unwrap();
        assert_eq!(m.count(Cell::new(3, 3)), 1);
        m.record_death(Cell::new(3, 3)).unwrap();
        assert_eq!(m.count(Cell::new(3, 3)), 2);
        assert_eq!(
            m.record_death(Cell::new(2, 2)),
            Err(StatsError::WallCell(Cell::new(2, 2)))
        );
        assert_eq!(
            m.record_death(Cell::new(9, 9)),
            Err(StatsError::OutOfBounds(Cell::new(9, 9)))
        );
    }

    #[test]
    fn preference_rules() {
        let l = layout();
        let mut s1 = DeathMap::new(&l, SystemChoice::S1);
        let mut s2 = DeathMap::new(&l, SystemChoice::S2);
        let a = Cell::new(1, 1);
        let b = Cell::new(4, 3);
        for _ in 0..5 {
            s1.observe(Some(a)).unwrap();
        }
        s2.observe(Some(a)).unwrap();
        for _ in 0..3 {
            s2.observe(Some(b)).unwrap();
        }
        s2.observe(None).unwrap();
        let prefs = build_preference(&s1, &s2).unwrap();
        assert_eq!(prefs.get(a), Some(SystemChoice::S2));
        assert_eq!(prefs.get(b), Some(SystemChoice::S1));
        assert_eq!(prefs.get(Cell::new(3, 1)), Some(SystemChoice::S2));
        assert_eq!(prefs.get(Cell::new(2, 2)), None);
        assert!(prefs.covers(&l));
    }

    #[test]
    fn unbalanced_and_mismatched() {
        let l = layout();
        let mut s1 = DeathMap::new(&l, SystemChoice::S1);
        let s2 = DeathMap::new(&l, SystemChoice::S2);
        for _ in 0..10 {
            s1.observe(None).unwrap();
        }
        assert_eq!(
            build_preference(&s1, &s2),
            Err(StatsError::UnbalancedSamples { s1: 10, s2: 0 })
        );
        let other = DeathMap::new(&Layout::parse("%%%%\n%P.%\n%%%%").unwrap(), SystemChoice::S2);
        assert_eq!(
            build_preference(&s1, &other),
            Err(StatsError::DimensionMismatch)
        );
    }

    #[test]
    fn deathmap_round_trip() {
        let l = layout();
        let mut m = DeathMap::new(&l, SystemChoice::S2);
        assert_eq!(m.save(), "deathmap,s2,6,5,0\n");
        m.observe(Some(Cell::new(1, 2))).unwrap();
        m.observe(Some(Cell::new(4, 1))).unwrap();
        m.observe(Some(Cell::new(4, 1))).unwrap();
        m.observe(None).unwrap();
        let text = m.save();
        assert_eq!(text, "deathmap,s2,6,5,4\n4,1,2\n1,2,1\n");
        assert_eq!(DeathMap::load(&text, &l).unwrap(), m);
    }

    #[test]
    fn deathmap_load_errors() {
        let l = layout();
        assert!(matches!(
            DeathMap::load("deathmap,s1,6,5,3\n2,2,1\n", &l),
            Err(StatsError::Parse { line: 2, .. })
        ));
        assert_eq!(
            DeathMap::load("deathmap,s1,7,5,3\n", &l),
            Err(StatsError::DimensionMismatch)
        );
        assert!(DeathMap::load("deathmap,s1,6,5,1\n1,1,2\n", &l).is_err());
        assert!(DeathMap::load("nonsense", &l).is_err());
    }

    #[test]
    fn merge_sums() {
        let l = layout();
        let mut a = DeathMap::new(&l, SystemChoice::S1);
        let mut b = DeathMap::new(&l, SystemChoice::S1);
        a.observe(Some(Cell::new(1, 1))).unwrap();
        b.observe(Some(Cell::new(1, 1))).unwrap();
        b.observe(None).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.count(Cell::new(1, 1)), 2);
        assert_eq!(a.games_observed(), 3);
        let c = DeathMap::new(&l, SystemChoice::S2);
        assert_eq!(a.merge(&c), Err(StatsError::DimensionMismatch));
    }

    #[test]
    fn prefmap_round_trip() {
        let l = layout();
        let mut s1 = DeathMap::new(&l, SystemChoice::S1);
        let s2 = DeathMap::new(&l, SystemChoice::S2);
        s1.record_death(Cell::new(4, 2)).unwrap();
        let mut s2b = s2.clone();
        s2b.record_death(Cell::new(1, 3)).unwrap();
        s2b.record_death(Cell::new(1, 3)).unwrap();
        let prefs = build_preference(&s1, &s2b).unwrap();
        let text = prefs.save();
        assert!(text.starts_with("prefmap,6,5\n"));
        assert_eq!(text.lines().count(), 1 + l.open_cells().count());
        assert_eq!(PreferenceMap::load(&text).unwrap(), prefs);
        assert!(PreferenceMap::load("prefmap,6,5\n1,1,3\n").is_err());
    }
}
