use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use super::Cell;

/// The maze shipped with the crate: 20x11, 65 food cells, two ghosts.
pub const DEFAULT_LAYOUT: &str = include_str!("../../layouts/default.lay");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("layout is not rectangular: row {row} has width {found}, expected {expected}")]
    NonRectangular {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("unknown character {ch:?} at ({x},{y})")]
    UnknownCharacter { ch: char, x: usize, y: usize },
    #[error("layout has no player start 'P'")]
    MissingPlayerStart,
    #[error("layout has more than one player start 'P'")]
    MultiplePlayerStarts,
    #[error("border cell ({x},{y}) is not a wall")]
    UnwalledBorder { x: usize, y: usize },
    #[error("open cells do not form a single connected region")]
    DisconnectedInterior,
}

/// Fixed-size bitset over the cells of a layout.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FoodGrid {
    words: Vec<u64>,
}

impl FoodGrid {
    pub fn new(cells: usize) -> Self {
        Self {
            words: vec![0; cells.div_ceil(64)],
        }
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: bool) {
        let mask = 1u64 << (index % 64);
        if value {
            self.words[index / 64] |= mask;
        } else {
            self.words[index / 64] &= !mask;
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}

impl fmt::Debug for FoodGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Static maze description: walls, initial food and start cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    food: FoodGrid,
    food_count: usize,
    player_start: Cell,
    ghost_starts: Vec<Cell>,
    /// All-pairs maze distances, `cell_count()^2` entries; `u16::MAX` marks
    /// walls and unreachable pairs.
    distances: Vec<u16>,
}

impl Layout {
    /// Parses the ASCII maze format: `%` wall, `.` food, ` ` empty,
    /// `P` player start, `G` ghost start. Trailing whitespace on a line and
    /// trailing blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, LayoutError> {
        let mut rows: Vec<&str> = text.lines().map(|l| l.trim_end()).collect();
        while rows.last().is_some_and(|r| r.is_empty()) {
            rows.pop();
        }
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        for (row, line) in rows.iter().enumerate() {
            let found = line.chars().count();
            if found != width {
                return Err(LayoutError::NonRectangular {
                    row,
                    found,
                    expected: width,
                });
            }
        }

        let cells = width * height;
        let mut walls = vec![false; cells];
        let mut food = FoodGrid::new(cells);
        let mut player_start = None;
        let mut ghost_starts = Vec::new();
        for (y, line) in rows.iter().enumerate() {
            for (x, ch) in line.chars().enumerate() {
                let idx = y * width + x;
                match ch {
                    '%' => walls[idx] = true,
                    '.' => food.set(idx, true),
                    ' ' => {}
                    'P' => {
                        if player_start.replace(Cell::new(x, y)).is_some() {
                            return Err(LayoutError::MultiplePlayerStarts);
                        }
                    }
                    'G' => ghost_starts.push(Cell::new(x, y)),
                    ch => return Err(LayoutError::UnknownCharacter { ch, x, y }),
                }
            }
        }
        let player_start = player_start.ok_or(LayoutError::MissingPlayerStart)?;

        for y in 0..height {
            for x in 0..width {
                let border = x == 0 || y == 0 || x + 1 == width || y + 1 == height;
                if border && !walls[y * width + x] {
                    return Err(LayoutError::UnwalledBorder { x, y });
                }
            }
        }

        let mut layout = Self {
            width,
            height,
            walls,
            food_count: food.count(),
            food,
            player_start,
            ghost_starts,
            distances: Vec::new(),
        };
        if !layout.is_connected() {
            return Err(LayoutError::DisconnectedInterior);
        }
        layout.distances = layout.all_pairs();
        Ok(layout)
    }

    /// The shipped default maze.
    pub fn default_layout() -> Self {
        Self::parse(DEFAULT_LAYOUT).expect("shipped layout is valid")
    }

    fn is_connected(&self) -> bool {
        let open = self.walls.iter().filter(|w| !**w).count();
        let dist = self.distances_from(self.player_start);
        dist.iter().filter(|d| d.is_some()).count() == open
    }

    fn all_pairs(&self) -> Vec<u16> {
        let n = self.cell_count();
        let mut table = vec![u16::MAX; n * n];
        for origin in self.open_cells() {
            let row = self.index(origin) * n;
            for (i, d) in self.distances_from(origin).into_iter().enumerate() {
                if let Some(d) = d {
                    table[row + i] = u16::try_from(d).unwrap_or(u16::MAX);
                }
            }
        }
        table
    }

    /// Shortest-path length through open cells, `None` if either cell is a
    /// wall or outside the grid.
    #[inline]
    pub fn maze_distance(&self, a: Cell, b: Cell) -> Option<usize> {
        if !self.contains(a) || !self.contains(b) {
            return None;
        }
        let d = self.distances[self.index(a) * self.cell_count() + self.index(b)];
        (d != u16::MAX).then_some(d as usize)
    }

    /// Distance from `from` to the nearest set cell of `food`.
    pub fn nearest_food_distance(&self, from: Cell, food: &FoodGrid) -> Option<usize> {
        if !self.contains(from) {
            return None;
        }
        let row = &self.distances[self.index(from) * self.cell_count()..][..self.cell_count()];
        food.iter()
            .map(|i| row[i])
            .filter(|d| *d != u16::MAX)
            .min()
            .map(usize::from)
    }

    /// Maze (BFS) distance from `origin` to every cell; `None` for walls and
    /// unreachable cells.
    pub fn distances_from(&self, origin: Cell) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.walls.len()];
        if self.is_wall(origin) {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[self.index(origin)] = Some(0);
        queue.push_back(origin);
        while let Some(cell) = queue.pop_front() {
            let d = dist[self.index(cell)].unwrap_or(0);
            for next in self.open_neighbours(cell) {
                let ni = self.index(next);
                if dist[ni].is_none() {
                    dist[ni] = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }

    /// Non-wall orthogonal neighbours, in North, South, East, West order.
    pub fn open_neighbours(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        super::Action::MOVES
            .into_iter()
            .filter_map(move |a| self.neighbour(cell, a))
    }

    /// Destination of moving from `cell` by `action`, or `None` if it is a wall.
    #[inline]
    pub fn neighbour(&self, cell: Cell, action: super::Action) -> Option<Cell> {
        let (dx, dy) = action.delta();
        let x = cell.x.checked_add_signed(dx)?;
        let y = cell.y.checked_add_signed(dy)?;
        if x >= self.width || y >= self.height {
            return None;
        }
        let next = Cell::new(x, y);
        (!self.is_wall(next)).then_some(next)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.walls.len()
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.x < self.width && cell.y < self.height
    }

    /// Out-of-bounds cells count as walls.
    #[inline]
    pub fn is_wall(&self, cell: Cell) -> bool {
        !self.contains(cell) || self.walls[self.index(cell)]
    }

    pub fn open_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.walls.len())
            .filter(|&i| !self.walls[i])
            .map(|i| self.cell_at(i))
    }

    pub fn food(&self) -> &FoodGrid {
        &self.food
    }

    pub fn food_count(&self) -> usize {
        self.food_count
    }

    pub fn player_start(&self) -> Cell {
        self.player_start
    }

    pub fn ghost_starts(&self) -> &[Cell] {
        &self.ghost_starts
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            for x in 0..self.width {
                let cell = Cell::new(x, y);
                let ch = if self.is_wall(cell) {
                    '%'
                } else if cell == self.player_start {
                    'P'
                } else if self.ghost_starts.contains(&cell) {
                    'G'
                } else if self.food.get(self.index(cell)) {
                    '.'
                } else {
                    ' '
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
