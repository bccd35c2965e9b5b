//! Trajectory ingestion: time discretization and classification of motion
//! steps into the seven relative actions.
//!
//! Angles are measured from the direction towards the exit. Coordinates are
//! taken in an image frame with `y` pointing down, where motion veering to
//! the right of the exit ray has a negative angle, so `ForwardRight` covers
//! `(-3π/8, -π/8]`.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Scalar, Vec2};

/// One of the seven relative actions. The six moving labels double as the
/// neighborhood sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionLabel {
    Stand,
    Forward,
    ForwardRight,
    ForwardLeft,
    Right,
    Left,
    Back,
}

impl ActionLabel {
    pub const ALL: [ActionLabel; 7] = [
        ActionLabel::Stand,
        ActionLabel::Forward,
        ActionLabel::ForwardRight,
        ActionLabel::ForwardLeft,
        ActionLabel::Right,
        ActionLabel::Left,
        ActionLabel::Back,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionLabel::Stand => "stand",
            ActionLabel::Forward => "fwd",
            ActionLabel::ForwardRight => "fwd_r",
            ActionLabel::ForwardLeft => "fwd_l",
            ActionLabel::Right => "right",
            ActionLabel::Left => "left",
            ActionLabel::Back => "back",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ActionLabel::Stand => "⊗",
            ActionLabel::Forward => "←",
            ActionLabel::ForwardRight => "↖",
            ActionLabel::ForwardLeft => "↙",
            ActionLabel::Right => "↑",
            ActionLabel::Left => "↓",
            ActionLabel::Back => "→",
        }
    }

    pub fn sector(self) -> Option<Sector> {
        match self {
            ActionLabel::Stand => None,
            ActionLabel::Forward => Some(Sector::Forward),
            ActionLabel::ForwardRight => Some(Sector::ForwardRight),
            ActionLabel::ForwardLeft => Some(Sector::ForwardLeft),
            ActionLabel::Right => Some(Sector::Right),
            ActionLabel::Left => Some(Sector::Left),
            ActionLabel::Back => Some(Sector::Back),
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown action label '{s}'")))
    }
}

/// Angular sector around a pedestrian, oriented towards the exit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Forward,
    ForwardRight,
    ForwardLeft,
    Right,
    Left,
    Back,
}

impl Sector {
    pub const ALL: [Sector; 6] = [
        Sector::Forward,
        Sector::ForwardRight,
        Sector::ForwardLeft,
        Sector::Right,
        Sector::Left,
        Sector::Back,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn action(self) -> ActionLabel {
        ActionLabel::ALL[self.index() + 1]
    }

    pub fn name(self) -> &'static str {
        self.action().name()
    }

    /// Bin a relative angle in `(-π, π]`. Intervals are closed on the right:
    /// forward `(-π/8, π/8]`, forward-right `(-3π/8, -π/8]`, forward-left
    /// `(π/8, 3π/8]`, right `(-5π/8, -3π/8]`, left `(3π/8, 5π/8]`, back the
    /// rest.
    pub fn from_angle<T: Scalar>(angle: T) -> Sector {
        let eighth = T::FRAC_PI_8();
        let e = |k: f64| eighth * T::lit(k);
        if angle > e(-1.0) && angle <= e(1.0) {
            Sector::Forward
        } else if angle > e(-3.0) && angle <= e(-1.0) {
            Sector::ForwardRight
        } else if angle > e(1.0) && angle <= e(3.0) {
            Sector::ForwardLeft
        } else if angle > e(-5.0) && angle <= e(-3.0) {
            Sector::Right
        } else if angle > e(3.0) && angle <= e(5.0) {
            Sector::Left
        } else {
            Sector::Back
        }
    }

    /// Angular interval `(lo, hi]` of the sector, relative to the exit
    /// direction. The back sector is reported as `(5π/8, 11π/8]`.
    pub fn interval<T: Scalar>(self) -> (T, T) {
        let e = |k: f64| T::FRAC_PI_8() * T::lit(k);
        match self {
            Sector::Forward => (e(-1.0), e(1.0)),
            Sector::ForwardRight => (e(-3.0), e(-1.0)),
            Sector::ForwardLeft => (e(1.0), e(3.0)),
            Sector::Right => (e(-5.0), e(-3.0)),
            Sector::Left => (e(3.0), e(5.0)),
            Sector::Back => (e(5.0), e(11.0)),
        }
    }

    pub fn mirror(self) -> Sector {
        match self {
            Sector::ForwardRight => Sector::ForwardLeft,
            Sector::ForwardLeft => Sector::ForwardRight,
            Sector::Right => Sector::Left,
            Sector::Left => Sector::Right,
            s => s,
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Sample<T> {
    pub t: T,
    pub pos: Vec2<T>,
}

/// Raw path of one pedestrian, time-ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord<T> {
    pub ped_id: String,
    samples: Vec<Sample<T>>,
}

impl<T: Scalar> PathRecord<T> {
    pub fn new(ped_id: impl Into<String>, samples: Vec<Sample<T>>) -> Result<Self> {
        let ped_id = ped_id.into();
        if samples.is_empty() {
            return Err(Error::InvalidRecord {
                ped_id,
                reason: "no samples".into(),
            });
        }
        for s in &samples {
            if !(s.t.is_finite() && s.pos.x.is_finite() && s.pos.y.is_finite()) {
                return Err(Error::InvalidRecord {
                    ped_id,
                    reason: "non-finite sample".into(),
                });
            }
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidRecord {
                ped_id,
                reason: format!("time not strictly increasing at t = {}", w[1].t),
            });
        }
        Ok(Self { ped_id, samples })
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn t_in(&self) -> T {
        self.samples[0].t
    }

    pub fn t_out(&self) -> T {
        self.samples[self.samples.len() - 1].t
    }

    /// Linearly interpolated position; `None` outside `[t_in, t_out]`.
    pub fn position_at(&self, t: T) -> Option<Vec2<T>> {
        if t < self.t_in() || t > self.t_out() {
            return None;
        }
        let k = self.samples.partition_point(|s| s.t <= t);
        if k == 0 {
            return Some(self.samples[0].pos);
        }
        let a = self.samples[k - 1];
        if k == self.samples.len() || a.t == t {
            return Some(a.pos);
        }
        let b = self.samples[k];
        Some(a.pos.lerp(b.pos, (t - a.t) / (b.t - a.t)))
    }
}

/// Displacement over one discretization step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MotionStep<T> {
    pub t: T,
    pub position: Vec2<T>,
    pub displacement: Vec2<T>,
    pub speed: T,
    /// Direction relative to the exit; `None` when the step has zero length
    /// or starts at the exit.
    pub angle: Option<T>,
}

impl<T: Scalar> MotionStep<T> {
    pub fn length(&self) -> T {
        self.displacement.norm()
    }
}

/// Resample `record` on the grid `t_in + k·dt` and emit one step for every
/// grid time whose successor is still covered by the record.
pub fn discretize<T: Scalar>(record: &PathRecord<T>, dt: T, exit: Vec2<T>) -> Result<Vec<MotionStep<T>>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let span = record.t_out() - record.t_in();
    // Absorb rounding so that a record of exactly k·dt yields k steps.
    let count = ((span / dt) + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let mut steps = Vec::with_capacity(count);
    for k in 0..count {
        let t = record.t_in() + dt * T::from_usize_lossy(k);
        let t_next = (t + dt).min(record.t_out());
        let (Some(p), Some(q)) = (record.position_at(t), record.position_at(t_next)) else {
            continue;
        };
        let displacement = q - p;
        let speed = displacement.norm() / dt;
        let angle = direction_angle(p, displacement, exit).ok();
        steps.push(MotionStep {
            t,
            position: p,
            displacement,
            speed,
            angle,
        });
    }
    Ok(steps)
}

/// Signed angle between the exit direction `exit - position` and the
/// displacement, in `(-π, π]`. Its cosine is the normalized dot product; the
/// sign is the negated planar cross product, so with `y` pointing down
/// deviations to the right are negative.
pub fn direction_angle<T: Scalar>(position: Vec2<T>, displacement: Vec2<T>, exit: Vec2<T>) -> Result<T> {
    let to_exit = exit - position;
    if displacement.x == T::zero() && displacement.y == T::zero() {
        return Err(Error::UndefinedAngle("zero displacement"));
    }
    if to_exit.x == T::zero() && to_exit.y == T::zero() {
        return Err(Error::UndefinedAngle("position coincides with the exit"));
    }
    let dot = to_exit.dot(displacement);
    let cross = to_exit.cross(displacement);
    let angle = (T::zero() - cross).atan2(dot);
    Ok(if angle <= -T::PI() { T::PI() } else { angle })
}

pub const DEFAULT_SPEED_THRESHOLD: f64 = 0.5;

/// Steps slower than `speed_threshold` are standing; the rest are binned by
/// angle.
pub fn classify_action<T: Scalar>(step: &MotionStep<T>, speed_threshold: T) -> ActionLabel {
    match step.angle {
        Some(angle) if step.speed >= speed_threshold => Sector::from_angle(angle).action(),
        _ => ActionLabel::Stand,
    }
}

/// Read a `ped_id,t,x,y` CSV into one record per pedestrian, in order of first
/// appearance. Rows of a pedestrian may come in any order.
pub fn read_trajectory_csv<T: Scalar, R: Read>(reader: R) -> Result<Vec<PathRecord<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or(Error::Malformed {
            line: 1,
            reason: format!("missing column '{name}' (expected header ped_id,t,x,y)"),
        })
    };
    let (ci, ct, cx, cy) = (col("ped_id")?, col("t")?, col("x")?, col("y")?);

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<Sample<T>>> = HashMap::new();
    for result in rdr.records() {
        let rec = result?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<T> {
            let raw = rec.get(i).ok_or_else(|| Error::Malformed {
                line,
                reason: format!("missing field '{name}'"),
            })?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| Error::Malformed {
                    line,
                    reason: format!("field '{name}' is not a finite number: '{raw}'"),
                })
        };
        let id = rec
            .get(ci)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Malformed {
                line,
                reason: "empty ped_id".into(),
            })?
            .to_string();
        let sample = Sample {
            t: field(ct, "t")?,
            pos: Vec2::new(field(cx, "x")?, field(cy, "y")?),
        };
        rows.entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(sample);
    }

    order
        .into_iter()
        .map(|id| {
            let mut samples = rows.remove(&id).unwrap_or_default();
            samples.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite times"));
            PathRecord::new(id, samples)
        })
        .collect()
}
