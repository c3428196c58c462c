//! Lattice geometry: cells, moves and the rectangular search domain.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// A lattice site, in coordinates relative to the central site `(0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn step(self, dir: Direction) -> Cell {
        let (dx, dy) = dir.offset();
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn distance(self, other: Cell) -> f64 {
        let dx = f64::from(self.x - other.x);
        let dy = f64::from(self.y - other.y);
        dx.hypot(dy)
    }

    pub fn mirror_x(self) -> Cell {
        Cell::new(-self.x, self.y)
    }
}

/// Cells order by `y` first, then `x`.
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// One lattice move. `Down` decreases `y`; the wind blows along `Down`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Stay,
    Down,
    Up,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 5] = [
        Direction::Down,
        Direction::Up,
        Direction::Left,
        Direction::Right,
        Direction::Stay,
    ];

    pub fn offset(self) -> (i32, i32) {
        match self {
            Direction::Stay => (0, 0),
            Direction::Down => (0, -1),
            Direction::Up => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    pub fn mirror_x(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Stay => "stay",
            Direction::Down => "down",
            Direction::Up => "up",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.name() == s)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rectangular lattice with reflecting walls.
///
/// Columns run over `x ∈ [-(width/2), width - width/2 - 1]`, rows likewise,
/// so the 100x100 domain spans `[-50, 49]` on both axes. Storage is
/// row-major with `y` ascending.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    width: usize,
    height: usize,
}

impl GridSpec {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 3 || height < 3 || width > i32::MAX as usize / 4 || height > i32::MAX as usize / 4
        {
            return Err(Error::GridTooSmall { width, height });
        }
        Ok(Self { width, height })
    }

    /// The 100x100 lattice used throughout the reference experiments.
    pub fn standard() -> Self {
        Self {
            width: 100,
            height: 100,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> i32 {
        -((self.width / 2) as i32)
    }

    pub fn x_max(&self) -> i32 {
        self.x_min() + self.width as i32 - 1
    }

    pub fn y_min(&self) -> i32 {
        -((self.height / 2) as i32)
    }

    pub fn y_max(&self) -> i32 {
        self.y_min() + self.height as i32 - 1
    }

    pub fn contains(&self, cell: Cell) -> bool {
        (self.x_min()..=self.x_max()).contains(&cell.x)
            && (self.y_min()..=self.y_max()).contains(&cell.y)
    }

    pub fn check(&self, cell: Cell) -> Result<()> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(Error::OutsideGrid {
                x: cell.x,
                y: cell.y,
            })
        }
    }

    /// Row-major index; the cell must be inside the grid.
    pub fn index(&self, cell: Cell) -> usize {
        debug_assert!(self.contains(cell));
        (cell.y - self.y_min()) as usize * self.width + (cell.x - self.x_min()) as usize
    }

    pub fn cell(&self, index: usize) -> Cell {
        let row = (index / self.width) as i32;
        let col = (index % self.width) as i32;
        Cell::new(self.x_min() + col, self.y_min() + row)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell(i))
    }

    /// Whether `dir` from `cell` stays on the lattice. Staying always does.
    pub fn admits(&self, cell: Cell, dir: Direction) -> bool {
        self.contains(cell.step(dir))
    }
}
