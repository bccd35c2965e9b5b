//! Floor-field particle dynamics.
//!
//! Each particle picks a target among the open cells within distance one
//! (itself included) with probability `∝ exp(-S(y))`. All particles move in
//! parallel against the time-`t` occupancy: among several particles aiming at
//! the same cell one uniformly chosen winner moves and the rest stay, and a
//! particle aiming at an occupied cell only moves if that occupant leaves.
//! Particles that reach the exit are absorbed.
//!
//! The planner uses the aggregated crowd transition instead: every crowd
//! configuration reachable by simultaneous one-site moves is weighted by
//! `exp(-U(z'))` with `U(z') = Σ_j dist(z'_j, exit)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Cell, Lattice, StaticField};
use crate::num::Scalar;

/// Positions of the ordinary particles, sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Cell>", into = "Vec<Cell>")]
pub struct CrowdState(Vec<Cell>);

impl CrowdState {
    pub fn new(cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let mut cells: Vec<Cell> = cells.into_iter().collect();
        cells.sort_unstable();
        if let Some(w) = cells.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidState(format!("particle cell {} listed twice", w[0])));
        }
        Ok(Self(cells))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Build from cells that are already sorted and distinct.
    fn from_sorted(cells: Vec<Cell>) -> Self {
        debug_assert!(cells.windows(2).all(|w| w[0] < w[1]));
        Self(cells)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.0.binary_search(&cell).is_ok()
    }

    /// Every particle on an open, non-exit cell.
    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        for &c in &self.0 {
            if !lattice.is_open(c) {
                return Err(Error::InvalidState(format!("particle on blocked or missing cell {c}")));
            }
            if c == lattice.exit_cell() {
                return Err(Error::InvalidState(format!("particle on the exit cell {c}")));
            }
        }
        Ok(())
    }

    /// Crowd potential `Σ_j S(z_j)`.
    pub fn potential<T: Scalar>(&self, field: &StaticField<T>) -> T {
        self.0.iter().map(|&c| field.at(c)).sum()
    }
}

impl TryFrom<Vec<Cell>> for CrowdState {
    type Error = Error;
    fn try_from(cells: Vec<Cell>) -> Result<Self> {
        Self::new(cells)
    }
}

impl From<CrowdState> for Vec<Cell> {
    fn from(z: CrowdState) -> Self {
        z.0
    }
}

impl fmt::Display for CrowdState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("}")
    }
}

/// Cell occupancy `τ`, indexed by cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupancyGrid {
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(lattice: &Lattice) -> Self {
        Self {
            occupied: vec![false; lattice.num_cells()],
        }
    }

    /// Occupancy of distinct, open cells.
    pub fn from_particles(lattice: &Lattice, particles: &[Cell]) -> Result<Self> {
        let mut grid = Self::empty(lattice);
        for &c in particles {
            if !lattice.is_open(c) {
                return Err(Error::InvalidState(format!("particle on blocked or missing cell {c}")));
            }
            let slot = &mut grid.occupied[c.get() - 1];
            if *slot {
                return Err(Error::InvalidState(format!("two particles on cell {c}")));
            }
            *slot = true;
        }
        Ok(grid)
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        cell.get() >= 1 && self.occupied.get(cell.get() - 1).copied().unwrap_or(false)
    }

    pub fn particles(&self) -> Vec<Cell> {
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| Cell(i as u32 + 1))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn num_cells(&self) -> usize {
        self.occupied.len()
    }
}

/// Normalized `(cell, probability)` pairs of a particle's target choice.
pub fn hop_distribution<T: Scalar>(
    x: Cell,
    tau: &OccupancyGrid,
    field: &StaticField<T>,
    lattice: &Lattice,
) -> Result<Vec<(Cell, T)>> {
    if !tau.is_occupied(x) {
        return Err(Error::InvalidState(format!("no particle on cell {x}")));
    }
    let candidates = lattice.neighbor_cells(x, true);
    Ok(softmin(candidates.into_iter().map(|c| (c, field.at(c)))))
}

/// `exp(-energy)` weights, normalized. The minimum energy is subtracted first.
fn softmin<K, T: Scalar>(items: impl IntoIterator<Item = (K, T)>) -> Vec<(K, T)> {
    let items: Vec<(K, T)> = items.into_iter().collect();
    let min = items.iter().map(|(_, e)| *e).fold(T::infinity(), T::min);
    let weighted: Vec<(K, T)> = items.into_iter().map(|(k, e)| (k, (min - e).exp())).collect();
    let total: T = weighted.iter().map(|(_, w)| *w).sum();
    weighted.into_iter().map(|(k, w)| (k, w / total)).collect()
}

fn sample_index<T: Scalar, R: Rng + ?Sized>(probs: impl Iterator<Item = T>, rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc = acc + p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Resolve a parallel update. `moves[i] = (origin, target)`; returns the
/// realized cell of every particle, in input order.
pub fn resolve_conflicts<R: Rng + ?Sized>(moves: &[(Cell, Cell)], lattice: &Lattice, rng: &mut R) -> Result<Vec<Cell>> {
    let mut origins = BTreeMap::new();
    for (i, &(from, to)) in moves.iter().enumerate() {
        if !lattice.is_open(from) || !lattice.is_open(to) {
            return Err(Error::InvalidState(format!("move {from} -> {to} touches a blocked or missing cell")));
        }
        if !lattice.metric().within_one(lattice.pos(from), lattice.pos(to)) {
            return Err(Error::InvalidState(format!("move {from} -> {to} is longer than one site")));
        }
        if origins.insert(from, i).is_some() {
            return Err(Error::InvalidState(format!("two particles start on cell {from}")));
        }
    }

    let mut moving = vec![false; moves.len()];
    let mut contenders: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
    for (i, &(from, to)) in moves.iter().enumerate() {
        if from != to {
            contenders.entry(to).or_default().push(i);
        }
    }
    for (_, group) in contenders {
        let winner = group[rng.random_range(0..group.len())];
        moving[winner] = true;
    }

    // A move into a cell whose occupant ends up staying fails; failures can
    // cascade backwards along chains of movers.
    loop {
        let mut changed = false;
        for i in 0..moves.len() {
            if !moving[i] {
                continue;
            }
            if let Some(&j) = origins.get(&moves[i].1) {
                if !moving[j] {
                    moving[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    Ok(moves
        .iter()
        .zip(&moving)
        .map(|(&(from, to), &m)| if m { to } else { from })
        .collect())
}

/// Advance individually tracked particles by one step. `None` marks a
/// particle absorbed at the exit, including one that started there.
pub fn step_particles<T: Scalar, R: Rng + ?Sized>(
    particles: &[Cell],
    field: &StaticField<T>,
    lattice: &Lattice,
    rng: &mut R,
) -> Result<Vec<Option<Cell>>> {
    let exit = lattice.exit_cell();
    let tau = OccupancyGrid::from_particles(lattice, particles)?;
    let active: Vec<usize> = (0..particles.len()).filter(|&i| particles[i] != exit).collect();
    let mut moves = Vec::with_capacity(active.len());
    for &i in &active {
        let from = particles[i];
        let hop = hop_distribution(from, &tau, field, lattice)?;
        let k = sample_index(hop.iter().map(|(_, p)| *p), rng);
        moves.push((from, hop[k].0));
    }
    let realized = resolve_conflicts(&moves, lattice, rng)?;
    let mut out = vec![None; particles.len()];
    for (&i, cell) in active.iter().zip(realized) {
        out[i] = (cell != exit).then_some(cell);
    }
    Ok(out)
}

pub fn simulate_step<T: Scalar, R: Rng + ?Sized>(
    tau: &OccupancyGrid,
    field: &StaticField<T>,
    lattice: &Lattice,
    rng: &mut R,
) -> Result<OccupancyGrid> {
    let next = step_particles(&tau.particles(), field, lattice, rng)?;
    let cells: Vec<Cell> = next.into_iter().flatten().collect();
    OccupancyGrid::from_particles(lattice, &cells)
}

/// Crowd states with their probabilities, sorted by state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDistribution<T> {
    pub entries: Vec<(CrowdState, T)>,
}

impl<T: Scalar> TransitionDistribution<T> {
    pub fn total(&self) -> T {
        self.entries.iter().map(|(_, p)| *p).sum()
    }

    pub fn prob(&self, z: &CrowdState) -> T {
        self.entries
            .binary_search_by(|(s, _)| s.cmp(z))
            .map_or(T::zero(), |i| self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn check_full_state(x: Cell, z: &CrowdState, lattice: &Lattice) -> Result<()> {
    if !lattice.is_open(x) {
        return Err(Error::InvalidState(format!("agent on blocked or missing cell {x}")));
    }
    z.validate(lattice)?;
    if z.contains(x) {
        return Err(Error::InvalidState(format!("agent cell {x} is also occupied by a particle")));
    }
    Ok(())
}

/// All crowd states reachable from `z` in one simultaneous step while the
/// agent sits on `x`.
///
/// Each particle stays or moves to an open cell within distance one other
/// than `x`; no two particles may end on the same cell; a particle ending on
/// the exit is removed. Distinct assignments producing the same configuration
/// collapse into one state.
pub fn reachable_crowd_states(x: Cell, z: &CrowdState, lattice: &Lattice) -> Result<BTreeSet<CrowdState>> {
    check_full_state(x, z, lattice)?;
    let options: Vec<Vec<Cell>> = z
        .cells()
        .iter()
        .map(|&p| lattice.neighbor_cells(p, true).into_iter().filter(|&c| c != x).collect())
        .collect();
    let exit = lattice.exit_cell();
    let mut out = BTreeSet::new();
    let mut chosen: Vec<Cell> = Vec::with_capacity(options.len());

    fn assign(
        k: usize,
        options: &[Vec<Cell>],
        chosen: &mut Vec<Cell>,
        exit: Cell,
        out: &mut BTreeSet<CrowdState>,
    ) {
        if k == options.len() {
            let mut cells: Vec<Cell> = chosen.iter().copied().filter(|&c| c != exit).collect();
            cells.sort_unstable();
            out.insert(CrowdState::from_sorted(cells));
            return;
        }
        for &c in &options[k] {
            if chosen.contains(&c) {
                continue;
            }
            chosen.push(c);
            assign(k + 1, options, chosen, exit, out);
            chosen.pop();
        }
    }

    assign(0, &options, &mut chosen, exit, &mut out);
    Ok(out)
}

/// Potential-weighted crowd transition `p(z' | x, z) ∝ exp(-U(z'))` over
/// [`reachable_crowd_states`].
pub fn crowd_transition<T: Scalar>(
    x: Cell,
    z: &CrowdState,
    lattice: &Lattice,
    field: &StaticField<T>,
) -> Result<TransitionDistribution<T>> {
    let support = reachable_crowd_states(x, z, lattice)?;
    let entries = softmin(support.into_iter().map(|s| {
        let u = s.potential(field);
        (s, u)
    }));
    Ok(TransitionDistribution { entries })
}
