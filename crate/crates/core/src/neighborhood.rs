//! Oriented neighborhood state of a pedestrian: six sectors of a circle
//! around the pedestrian, aligned with the direction to the exit, each marked
//! occupied when it holds another pedestrian or is sufficiently covered by
//! walls.

use std::fmt;
use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Scalar, Vec2};
use crate::trajectory::{classify_action, direction_angle, discretize, ActionLabel, PathRecord, Sector};

pub const DEFAULT_RADIUS: f64 = 0.75;
pub const DEFAULT_WALL_FRACTION: f64 = 0.40;

/// Occupancy bits of the six sectors, bit `i` for `Sector::ALL[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SectorState(u8);

impl SectorState {
    pub const EMPTY: SectorState = SectorState(0);
    pub const FULL: SectorState = SectorState(0b11_1111);

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits > 0b11_1111 {
            return Err(Error::InvalidState(format!("sector bits {bits:#b} exceed 6 bits")));
        }
        Ok(Self(bits))
    }

    pub fn from_array(occ: [bool; 6]) -> Self {
        Self(occ.iter().enumerate().fold(0, |acc, (i, &b)| acc | (u8::from(b) << i)))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn get(self, sector: Sector) -> bool {
        self.0 >> sector.index() & 1 == 1
    }

    /// Occupancy of a sector as a table column index: 0 empty, 1 occupied.
    pub fn value(self, sector: Sector) -> usize {
        usize::from(self.get(sector))
    }

    pub fn set(&mut self, sector: Sector) {
        self.0 |= 1 << sector.index();
    }

    pub fn with(mut self, sector: Sector) -> Self {
        self.set(sector);
        self
    }

    pub fn to_array(self) -> [bool; 6] {
        Sector::ALL.map(|s| self.get(s))
    }

    /// All 64 states in bit order.
    pub fn all() -> impl Iterator<Item = SectorState> {
        (0u8..64).map(SectorState)
    }
}

impl fmt::Display for SectorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in Sector::ALL {
            f.write_str(if self.get(s) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WallGeometry<T> {
    pub polygons: Vec<Vec<[T; 2]>>,
}

impl<T: Scalar> WallGeometry<T> {
    pub fn new(polygons: Vec<Vec<[T; 2]>>) -> Result<Self> {
        let walls = Self { polygons };
        walls.validate()?;
        Ok(walls)
    }

    pub fn empty() -> Self {
        Self { polygons: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, poly) in self.polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::InvalidParameter(format!("wall polygon {k} has fewer than 3 vertices")));
            }
            if poly.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("wall polygon {k} has a non-finite vertex")));
            }
            if !is_simple(poly) {
                return Err(Error::InvalidParameter(format!("wall polygon {k} is self-intersecting")));
            }
        }
        Ok(())
    }

    /// Even-odd containment in any polygon.
    pub fn contains(&self, p: Vec2<T>) -> bool {
        self.polygons.iter().any(|poly| point_in_polygon(poly, p))
    }
}

fn point_in_polygon<T: Scalar>(poly: &[[T; 2]], p: Vec2<T>) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if (yi > p.y) != (yj > p.y) && p.x < (xj - xi) * (p.y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn segments_intersect<T: Scalar>(a: [T; 2], b: [T; 2], c: [T; 2], d: [T; 2]) -> bool {
    let orient = |p: [T; 2], q: [T; 2], r: [T; 2]| {
        let v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        if v > T::zero() {
            1
        } else if v < T::zero() {
            -1
        } else {
            0
        }
    };
    let on_segment = |p: [T; 2], q: [T; 2], r: [T; 2]| {
        r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
    };
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    (o1 == 0 && on_segment(a, b, c))
        || (o2 == 0 && on_segment(a, b, d))
        || (o3 == 0 && on_segment(c, d, a))
        || (o4 == 0 && on_segment(c, d, b))
}

fn is_simple<T: Scalar>(poly: &[[T; 2]]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodParams<T> {
    pub radius: T,
    pub wall_fraction: T,
    /// Polar grid resolution for wall coverage; `n × n` points per sector.
    pub wall_samples: usize,
}

impl<T: Scalar> Default for NeighborhoodParams<T> {
    fn default() -> Self {
        Self {
            radius: T::lit(DEFAULT_RADIUS),
            wall_fraction: T::lit(DEFAULT_WALL_FRACTION),
            wall_samples: 32,
        }
    }
}

impl<T: Scalar> NeighborhoodParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > T::zero()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.wall_fraction > T::zero() && self.wall_fraction <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "wall fraction must lie in (0, 1], got {}",
                self.wall_fraction
            )));
        }
        if self.wall_samples == 0 {
            return Err(Error::InvalidParameter("wall sample grid must be non-empty".into()));
        }
        Ok(())
    }
}

/// Fraction of the sector area inside walls, by a stratified polar grid of
/// `samples × samples` points with area-uniform radii.
pub fn wall_coverage<T: Scalar>(
    self_pos: Vec2<T>,
    exit: Vec2<T>,
    sector: Sector,
    walls: &WallGeometry<T>,
    radius: T,
    samples: usize,
) -> T {
    if walls.polygons.is_empty() {
        return T::zero();
    }
    let heading = (exit - self_pos).heading();
    let (lo, hi) = sector.interval::<T>();
    let n = T::from_usize_lossy(samples);
    let half = T::lit(0.5);
    let mut hits = 0usize;
    for i in 0..samples {
        let r = radius * ((T::from_usize_lossy(i) + half) / n).sqrt();
        for j in 0..samples {
            let rel = lo + (hi - lo) * (T::from_usize_lossy(j) + half) / n;
            // The relative angle is the negated offset from the heading.
            let p = self_pos + Vec2::from_polar(r, heading - rel);
            if walls.contains(p) {
                hits += 1;
            }
        }
    }
    T::from_usize_lossy(hits) / (n * n)
}

/// Occupancy of the six sectors around `self_pos`.
///
/// A sector is occupied when another position lies within `radius` at a
/// bearing in that sector, or when walls cover at least `wall_fraction` of its
/// area. Another pedestrian exactly at `self_pos` is counted as forward.
pub fn extract_state<T: Scalar>(
    self_pos: Vec2<T>,
    others: &[Vec2<T>],
    exit: Vec2<T>,
    walls: &WallGeometry<T>,
    params: &NeighborhoodParams<T>,
) -> Result<SectorState> {
    params.validate()?;
    if self_pos == exit {
        return Err(Error::UndefinedAngle("position coincides with the exit"));
    }
    let mut state = SectorState::EMPTY;
    for &other in others {
        let d = other - self_pos;
        let dist = d.norm();
        if dist > params.radius {
            continue;
        }
        if dist == T::zero() {
            warn!("another pedestrian coincides with ({}, {}); counted as forward", self_pos.x, self_pos.y);
            state.set(Sector::Forward);
            continue;
        }
        let bearing = direction_angle(self_pos, d, exit)?;
        state.set(Sector::from_angle(bearing));
    }
    if !walls.polygons.is_empty() {
        for sector in Sector::ALL {
            if state.get(sector) {
                continue;
            }
            let cover = wall_coverage(self_pos, exit, sector, walls, params.radius, params.wall_samples);
            if cover >= params.wall_fraction {
                state.set(sector);
            }
        }
    }
    Ok(state)
}

/// One (state, action) pair of a pedestrian at a discretized time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Observation<T> {
    pub ped_id: String,
    pub t: T,
    pub state: SectorState,
    pub action: ActionLabel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationParams<T> {
    pub dt: T,
    pub speed_threshold: T,
    pub neighborhood: NeighborhoodParams<T>,
    /// Count pedestrians already beyond the exit as neighbors.
    pub include_exited: bool,
}

impl<T: Scalar> Default for ObservationParams<T> {
    fn default() -> Self {
        Self {
            dt: T::one(),
            speed_threshold: T::lit(crate::trajectory::DEFAULT_SPEED_THRESHOLD),
            neighborhood: NeighborhoodParams::default(),
            include_exited: false,
        }
    }
}

/// A pedestrian at `other` is past the exit, as seen from `self_pos`, when it
/// lies beyond the line through the exit perpendicular to the exit ray.
fn past_exit<T: Scalar>(self_pos: Vec2<T>, other: Vec2<T>, exit: Vec2<T>) -> bool {
    (other - exit).dot(exit - self_pos) > T::zero()
}

/// Pair every discretized step of every pedestrian with the neighborhood
/// state at its start. Observations are ordered by time, then by record order.
pub fn build_observations<T: Scalar>(
    records: &[PathRecord<T>],
    exit: Vec2<T>,
    walls: &WallGeometry<T>,
    params: &ObservationParams<T>,
) -> Result<Vec<Observation<T>>> {
    params.neighborhood.validate()?;
    let per_record: Vec<Vec<(usize, Observation<T>)>> = records
        .par_iter()
        .enumerate()
        .map(|(i, record)| -> Result<Vec<(usize, Observation<T>)>> {
            let steps = discretize(record, params.dt, exit)?;
            let mut out = Vec::with_capacity(steps.len());
            for step in steps {
                if step.position == exit {
                    continue;
                }
                let others: Vec<Vec2<T>> = records
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .filter_map(|(_, r)| r.position_at(step.t))
                    .filter(|&p| params.include_exited || !past_exit(step.position, p, exit))
                    .collect();
                let state = extract_state(step.position, &others, exit, walls, &params.neighborhood)?;
                out.push((
                    i,
                    Observation {
                        ped_id: record.ped_id.clone(),
                        t: step.t,
                        state,
                        action: classify_action(&step, params.speed_threshold),
                    },
                ));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<(usize, Observation<T>)> = per_record.into_iter().flatten().collect();
    all.sort_by(|(ia, a), (ib, b)| a.t.partial_cmp(&b.t).expect("finite times").then(ia.cmp(ib)));
    Ok(all.into_iter().map(|(_, o)| o).collect())
}

/// Write observations as `ped_id,t,s_fwd,s_fwdr,s_fwdl,s_right,s_left,s_back,action`.
pub fn write_observations_csv<T: Scalar, W: Write>(writer: W, observations: &[Observation<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ped_id", "t", "s_fwd", "s_fwdr", "s_fwdl", "s_right", "s_left", "s_back", "action"])?;
    for o in observations {
        let mut row = vec![o.ped_id.clone(), o.t.to_string()];
        row.extend(Sector::ALL.iter().map(|&s| o.state.value(s).to_string()));
        row.push(o.action.name().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
