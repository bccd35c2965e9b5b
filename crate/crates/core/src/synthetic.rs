//! Synthetic trajectories from a floor-field corridor, for exercising the
//! estimation pipeline where no tracked data is at hand.

use rand::Rng;

use crate::environment::step_particles;
use crate::error::{Error, Result};
use crate::lattice::{Cell, GridPos, Lattice, Metric, StaticField};
use crate::num::{Scalar, Vec2};
use crate::trajectory::{PathRecord, Sample};

/// A corridor `length` cells long and `lanes` cells wide with the exit at
/// the far end of the middle lane. A new pedestrian enters at the start of
/// the middle lane every `inflow_period` steps when that cell is free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corridor<T> {
    pub length: usize,
    pub lanes: usize,
    /// Cell edge in meters.
    pub cell_size: T,
    pub inflow_period: usize,
    pub steps: usize,
}

impl<T: Scalar> Default for Corridor<T> {
    fn default() -> Self {
        Self {
            length: 20,
            lanes: 1,
            cell_size: T::lit(0.6),
            inflow_period: 1,
            steps: 400,
        }
    }
}

/// Output of [`Corridor::run`]: one record per pedestrian, sampled once per
/// second, plus the exit position in meters.
#[derive(Debug, Clone)]
pub struct CorridorRun<T> {
    pub records: Vec<PathRecord<T>>,
    pub exit: Vec2<T>,
    pub lattice: Lattice,
}

impl<T: Scalar> Corridor<T> {
    pub fn lattice(&self) -> Result<Lattice> {
        if self.length < 2 || self.lanes == 0 {
            return Err(Error::InvalidParameter("corridor needs at least 2 cells and 1 lane".into()));
        }
        Lattice::open(self.length, self.lanes, GridPos::new(self.length - 1, self.lanes / 2), Metric::Chebyshev)
    }

    /// Cell center in meters; rows and `y` both grow downward.
    pub fn position(&self, lattice: &Lattice, cell: Cell) -> Vec2<T> {
        let p = lattice.pos(cell);
        Vec2::new(
            T::from_usize_lossy(p.col) * self.cell_size,
            T::from_usize_lossy(p.row) * self.cell_size,
        )
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CorridorRun<T>> {
        if self.inflow_period == 0 || !(self.cell_size > T::zero()) {
            return Err(Error::InvalidParameter("inflow period and cell size must be positive".into()));
        }
        let lattice = self.lattice()?;
        let field = StaticField::<T>::build(&lattice);
        let entrance = lattice.cell_index(GridPos::new(0, self.lanes / 2))?;

        // (id, current cell, samples so far)
        let mut walkers: Vec<(usize, Cell, Vec<Sample<T>>)> = Vec::new();
        let mut finished: Vec<(usize, Vec<Sample<T>>)> = Vec::new();
        let mut next_id = 0;
        for step in 0..self.steps {
            let t = T::from_usize_lossy(step);
            if step % self.inflow_period == 0 && walkers.iter().all(|w| w.1 != entrance) {
                walkers.push((next_id, entrance, Vec::new()));
                next_id += 1;
            }
            for w in &mut walkers {
                w.2.push(Sample {
                    t,
                    pos: self.position(&lattice, w.1),
                });
            }
            let cells: Vec<Cell> = walkers.iter().map(|w| w.1).collect();
            let moved = step_particles(&cells, &field, &lattice, rng)?;
            let t_next = t + T::one();
            let mut remaining = Vec::with_capacity(walkers.len());
            for (mut w, next) in walkers.into_iter().zip(moved) {
                match next {
                    Some(cell) => {
                        w.1 = cell;
                        remaining.push(w);
                    }
                    None => {
                        w.2.push(Sample {
                            t: t_next,
                            pos: self.position(&lattice, lattice.exit_cell()),
                        });
                        finished.push((w.0, w.2));
                    }
                }
            }
            walkers = remaining;
        }
        finished.extend(walkers.into_iter().map(|w| (w.0, w.2)));
        finished.sort_by_key(|(id, _)| *id);
        let records = finished
            .into_iter()
            .map(|(id, samples)| PathRecord::new(format!("p{id}"), samples))
            .collect::<Result<_>>()?;
        let exit = self.position(&lattice, lattice.exit_cell());
        Ok(CorridorRun { records, exit, lattice })
    }
}
