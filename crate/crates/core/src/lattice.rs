//! Rectangular lattice, cell numbering, metrics, and the static floor field.
//!
//! Cells are numbered row-major from 1 at the top-left cell, so on a
//! 5-column lattice the cell at column 2, row 3 (0-based) is cell 18 and its
//! left neighbor is cell 17. Rows grow downward.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPos {
    pub col: usize,
    pub row: usize,
}

impl GridPos {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

/// 1-based row-major cell index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cell(pub u32);

impl Cell {
    #[inline]
    pub fn get(self) -> usize {
        self.0 as usize
    }

    #[inline]
    fn slot(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    #[default]
    Chebyshev,
    Manhattan,
}

impl Metric {
    pub fn dist<T: Scalar>(self, a: GridPos, b: GridPos) -> T {
        let dc = a.col.abs_diff(b.col);
        let dr = a.row.abs_diff(b.row);
        match self {
            Metric::Euclidean => T::from_usize_lossy(dc).hypot(T::from_usize_lossy(dr)),
            Metric::Chebyshev => T::from_usize_lossy(dc.max(dr)),
            Metric::Manhattan => T::from_usize_lossy(dc + dr),
        }
    }

    /// Whether `dist(a, b) <= 1`, decided on integers.
    pub fn within_one(self, a: GridPos, b: GridPos) -> bool {
        let dc = a.col.abs_diff(b.col);
        let dr = a.row.abs_diff(b.row);
        match self {
            Metric::Euclidean | Metric::Manhattan => dc + dr <= 1,
            Metric::Chebyshev => dc <= 1 && dr <= 1,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Metric::Euclidean),
            "chebyshev" => Ok(Metric::Chebyshev),
            "manhattan" => Ok(Metric::Manhattan),
            other => Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
        }
    }
}

/// On-disk lattice description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub width: usize,
    pub height: usize,
    pub exit: [usize; 2],
    #[serde(default)]
    pub blocked: Vec<[usize; 2]>,
    #[serde(default)]
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    width: usize,
    height: usize,
    exit: GridPos,
    blocked: BTreeSet<GridPos>,
    metric: Metric,
    open: Vec<bool>,
}

impl Lattice {
    pub fn new(
        width: usize,
        height: usize,
        exit: GridPos,
        blocked: impl IntoIterator<Item = GridPos>,
        metric: Metric,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidLattice(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if width.checked_mul(height).is_none_or(|n| n > u32::MAX as usize) {
            return Err(Error::InvalidLattice("too many cells".into()));
        }
        let blocked: BTreeSet<GridPos> = blocked.into_iter().collect();
        let mut lattice = Self {
            width,
            height,
            exit,
            blocked,
            metric,
            open: vec![true; width * height],
        };
        lattice.check_bounds(exit)?;
        for &b in &lattice.blocked {
            lattice.check_bounds(b)?;
        }
        if lattice.blocked.contains(&exit) {
            return Err(Error::InvalidLattice(format!("exit {exit} is blocked")));
        }
        for b in lattice.blocked.clone() {
            let slot = lattice.cell_index(b)?.slot();
            lattice.open[slot] = false;
        }
        Ok(lattice)
    }

    /// Unobstructed lattice.
    pub fn open(width: usize, height: usize, exit: GridPos, metric: Metric) -> Result<Self> {
        Self::new(width, height, exit, [], metric)
    }

    pub fn from_config(config: &LatticeConfig) -> Result<Self> {
        Self::new(
            config.width,
            config.height,
            GridPos::new(config.exit[0], config.exit[1]),
            config.blocked.iter().map(|&[c, r]| GridPos::new(c, r)),
            config.metric,
        )
    }

    pub fn to_config(&self) -> LatticeConfig {
        LatticeConfig {
            width: self.width,
            height: self.height,
            exit: [self.exit.col, self.exit.row],
            blocked: self.blocked.iter().map(|p| [p.col, p.row]).collect(),
            metric: self.metric,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn exit(&self) -> GridPos {
        self.exit
    }

    pub fn exit_cell(&self) -> Cell {
        Cell((self.exit.row * self.width + self.exit.col + 1) as u32)
    }

    pub fn blocked(&self) -> &BTreeSet<GridPos> {
        &self.blocked
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn in_bounds(&self, pos: GridPos) -> bool {
        pos.col < self.width && pos.row < self.height
    }

    fn check_bounds(&self, pos: GridPos) -> Result<()> {
        if self.in_bounds(pos) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                pos: pos.to_string(),
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn cell_index(&self, pos: GridPos) -> Result<Cell> {
        self.check_bounds(pos)?;
        Ok(Cell((pos.row * self.width + pos.col + 1) as u32))
    }

    pub fn index_to_pos(&self, cell: Cell) -> Result<GridPos> {
        let idx = cell.get();
        if idx == 0 || idx > self.num_cells() {
            return Err(Error::OutOfBounds {
                pos: format!("cell {idx}"),
                width: self.width,
                height: self.height,
            });
        }
        let zero = idx - 1;
        Ok(GridPos::new(zero % self.width, zero / self.width))
    }

    /// Position of a cell known to be valid. Panics on an out-of-range index.
    pub fn pos(&self, cell: Cell) -> GridPos {
        self.index_to_pos(cell)
            .unwrap_or_else(|e| panic!("invalid cell {cell}: {e}"))
    }

    pub fn contains_cell(&self, cell: Cell) -> bool {
        cell.get() >= 1 && cell.get() <= self.num_cells()
    }

    /// In bounds and not a wall.
    pub fn is_open(&self, cell: Cell) -> bool {
        self.contains_cell(cell) && self.open[cell.slot()]
    }

    pub fn is_open_pos(&self, pos: GridPos) -> bool {
        self.in_bounds(pos) && !self.blocked.contains(&pos)
    }

    pub fn open_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (1..=self.num_cells() as u32)
            .map(Cell)
            .filter(|&c| self.open[c.slot()])
    }

    pub fn dist<T: Scalar>(&self, a: GridPos, b: GridPos) -> T {
        self.metric.dist(a, b)
    }

    pub fn cell_dist<T: Scalar>(&self, a: Cell, b: Cell) -> T {
        self.metric.dist(self.pos(a), self.pos(b))
    }

    /// Number of lattice steps (Chebyshev moves) between two cells.
    pub fn step_dist(&self, a: Cell, b: Cell) -> usize {
        let (pa, pb) = (self.pos(a), self.pos(b));
        pa.col.abs_diff(pb.col).max(pa.row.abs_diff(pb.row))
    }

    /// Open cells `y` with `dist(pos, y) <= 1`; `pos` itself only if asked.
    pub fn neighbors(&self, pos: GridPos, include_self: bool) -> Result<Vec<GridPos>> {
        self.check_bounds(pos)?;
        let mut out = Vec::with_capacity(9);
        for row in pos.row.saturating_sub(1)..=(pos.row + 1).min(self.height - 1) {
            for col in pos.col.saturating_sub(1)..=(pos.col + 1).min(self.width - 1) {
                let y = GridPos::new(col, row);
                if y == pos {
                    if include_self && self.is_open_pos(y) {
                        out.push(y);
                    }
                    continue;
                }
                if self.metric.within_one(pos, y) && self.is_open_pos(y) {
                    out.push(y);
                }
            }
        }
        Ok(out)
    }

    /// Cell-index form of [`Lattice::neighbors`], in ascending order.
    pub fn neighbor_cells(&self, cell: Cell, include_self: bool) -> Vec<Cell> {
        let pos = self.pos(cell);
        let mut cells: Vec<Cell> = self
            .neighbors(pos, include_self)
            .expect("cell is in bounds")
            .into_iter()
            .map(|p| Cell((p.row * self.width + p.col + 1) as u32))
            .collect();
        cells.sort_unstable();
        cells
    }

    /// Cell at `pos + (dcol, drow)` if that lands inside the lattice.
    pub fn offset(&self, cell: Cell, dcol: isize, drow: isize) -> Option<Cell> {
        let pos = self.pos(cell);
        let col = pos.col.checked_add_signed(dcol)?;
        let row = pos.row.checked_add_signed(drow)?;
        let target = GridPos::new(col, row);
        self.in_bounds(target)
            .then(|| Cell((row * self.width + col + 1) as u32))
    }
}

/// Static floor field `S(y) = dist(y, exit)` over the open cells.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticField<T> {
    values: Vec<Option<T>>,
}

impl<T: Scalar> StaticField<T> {
    pub fn build(lattice: &Lattice) -> Self {
        let exit = lattice.exit();
        let values = (1..=lattice.num_cells() as u32)
            .map(Cell)
            .map(|c| {
                lattice
                    .is_open(c)
                    .then(|| lattice.dist(lattice.pos(c), exit))
            })
            .collect();
        Self { values }
    }

    /// Field value of an open cell; `None` for walls and out-of-range cells.
    pub fn get(&self, cell: Cell) -> Option<T> {
        self.values.get(cell.get().checked_sub(1)?).copied().flatten()
    }

    /// Field value of a cell known to be open. Panics otherwise.
    pub fn at(&self, cell: Cell) -> T {
        self.get(cell)
            .unwrap_or_else(|| panic!("cell {cell} has no field value"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (Cell(i as u32 + 1), v)))
    }
}

pub fn build_static_field<T: Scalar>(lattice: &Lattice) -> StaticField<T> {
    StaticField::build(lattice)
}
