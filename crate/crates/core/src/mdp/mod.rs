//! Finite-horizon decision problem of one clever agent moving among
//! floor-field particles.
//!
//! The state is the agent's cell together with the crowd configuration. Each
//! epoch the crowd moves first, following [`crowd_transition`], and the agent
//! then steps to its chosen neighbor cell if that cell is open and free, or
//! stays otherwise. The agent's exit cell is absorbing.

mod evaluate;
mod oracle;
mod solver;

pub use evaluate::{evaluate_policy, DecisionRule, Evaluation};
pub use oracle::{brute_force_value, DEFAULT_NODE_CAP};
pub use solver::{
    backward_induction, bellman_residual, dense_state_count, q_value, Policy, PolicyDecision, PolicyDump,
    StateSpace, ValueFunction, DEFAULT_MAX_STATES,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::{crowd_transition, CrowdState, TransitionDistribution};
use crate::error::{Error, Result};
use crate::lattice::{Cell, Lattice, StaticField};
use crate::num::Scalar;

/// Agent action `1..=9`: `1` stays, `2..=9` step to the eight neighbors
/// clockwise starting from the left, `(-1, 0)`. Rows grow downward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct CleverAction(u8);

const DISPLACEMENTS: [(isize, isize); 9] = [
    (0, 0),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

impl CleverAction {
    pub const STAY: CleverAction = CleverAction(1);

    pub fn new(a: u8) -> Result<Self> {
        if (1..=9).contains(&a) {
            Ok(Self(a))
        } else {
            Err(Error::InvalidParameter(format!("action must be in 1..=9, got {a}")))
        }
    }

    pub fn all() -> impl Iterator<Item = CleverAction> {
        (1..=9).map(CleverAction)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// `(dcol, drow)` of the chosen target.
    pub fn displacement(self) -> (isize, isize) {
        DISPLACEMENTS[self.0 as usize - 1]
    }

    pub fn is_stay(self) -> bool {
        self.0 == 1
    }
}

impl TryFrom<u8> for CleverAction {
    type Error = Error;
    fn try_from(a: u8) -> Result<Self> {
        Self::new(a)
    }
}

impl From<CleverAction> for u8 {
    fn from(a: CleverAction) -> u8 {
        a.0
    }
}

impl fmt::Display for CleverAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Agent cell `x` and crowd `z`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FullState {
    pub x: Cell,
    pub z: CrowdState,
}

impl FullState {
    pub fn new(x: Cell, z: CrowdState) -> Self {
        Self { x, z }
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        if !lattice.is_open(self.x) {
            return Err(Error::InvalidState(format!("agent on blocked or missing cell {}", self.x)));
        }
        self.z.validate(lattice)?;
        if self.z.contains(self.x) {
            return Err(Error::InvalidState(format!("agent cell {} is also occupied by a particle", self.x)));
        }
        Ok(())
    }
}

impl fmt::Display for FullState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x={}, z={})", self.x, self.z)
    }
}

impl FromStr for FullState {
    type Err = Error;

    /// `"x:z1,z2,..."`, e.g. `"18:8,14,17,22"`; `"18:"` or `"18"` for an
    /// empty crowd.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse state '{s}', expected x:z1,z2,..."));
        let (x, z) = s.split_once(':').unwrap_or((s, ""));
        let x: u32 = x.trim().parse().map_err(|_| bad())?;
        let cells = z
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(|c| c.parse::<u32>().map(Cell).map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(Cell(x), CrowdState::new(cells)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    /// `-1` per epoch spent outside the exit.
    Time,
    /// `-1/2` for standing, `-1` for a step, `-2` for a step into a cell a
    /// particle has just taken.
    Co,
}

impl FromStr for RewardKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "time" => Ok(RewardKind::Time),
            "co" => Ok(RewardKind::Co),
            other => Err(Error::InvalidParameter(format!("unknown reward '{other}', expected time or co"))),
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardKind::Time => "time",
            RewardKind::Co => "co",
        })
    }
}

pub const DEFAULT_TERMINAL_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardModel<T> {
    pub kind: RewardKind,
    pub terminal_factor: T,
}

impl<T: Scalar> RewardModel<T> {
    pub fn new(kind: RewardKind) -> Self {
        Self {
            kind,
            terminal_factor: T::lit(DEFAULT_TERMINAL_FACTOR),
        }
    }

    pub fn time() -> Self {
        Self::new(RewardKind::Time)
    }

    pub fn co() -> Self {
        Self::new(RewardKind::Co)
    }

    pub fn with_terminal_factor(mut self, factor: T) -> Self {
        self.terminal_factor = factor;
        self
    }
}

/// Cell the agent aims at, if it lies inside the lattice. At the exit the
/// agent always stays.
pub fn chosen_target(x: Cell, a: CleverAction, lattice: &Lattice) -> Option<Cell> {
    if x == lattice.exit_cell() {
        return Some(x);
    }
    let (dc, dr) = a.displacement();
    lattice.offset(x, dc, dr)
}

/// Agent position after the crowd has moved to `z_next`.
pub fn clever_move(x: Cell, a: CleverAction, z_next: &CrowdState, lattice: &Lattice) -> Cell {
    match chosen_target(x, a, lattice) {
        Some(t) if lattice.is_open(t) && !z_next.contains(t) => t,
        _ => x,
    }
}

/// The agent tried to step into a cell that a particle occupies after the
/// crowd moved.
pub fn lost_conflict(s: &FullState, a: CleverAction, s_next: &FullState, lattice: &Lattice) -> bool {
    if s.x == lattice.exit_cell() || a.is_stay() {
        return false;
    }
    chosen_target(s.x, a, lattice).is_some_and(|t| s_next.z.contains(t))
}

/// Compose a crowd transition with the agent's deterministic move.
pub fn compose<T: Scalar>(
    x: Cell,
    a: CleverAction,
    crowd: &TransitionDistribution<T>,
    lattice: &Lattice,
) -> Vec<(FullState, T)> {
    // Distinct crowd states give distinct full states, so nothing to merge.
    crowd
        .entries
        .iter()
        .map(|(z, p)| (FullState::new(clever_move(x, a, z, lattice), z.clone()), *p))
        .collect()
}

pub fn full_transition<T: Scalar>(
    s: &FullState,
    a: CleverAction,
    lattice: &Lattice,
    field: &StaticField<T>,
) -> Result<Vec<(FullState, T)>> {
    let crowd = crowd_transition(s.x, &s.z, lattice, field)?;
    Ok(compose(s.x, a, &crowd, lattice))
}

pub fn local_reward<T: Scalar>(
    model: &RewardModel<T>,
    s: &FullState,
    a: CleverAction,
    s_next: &FullState,
    lattice: &Lattice,
) -> T {
    if s.x == lattice.exit_cell() {
        return T::zero();
    }
    match model.kind {
        RewardKind::Time => -T::one(),
        RewardKind::Co if a.is_stay() => T::lit(-0.5),
        RewardKind::Co if lost_conflict(s, a, s_next, lattice) => T::lit(-2.0),
        RewardKind::Co => -T::one(),
    }
}

pub fn expected_reward<T: Scalar>(
    model: &RewardModel<T>,
    s: &FullState,
    a: CleverAction,
    transition: &[(FullState, T)],
    lattice: &Lattice,
) -> T {
    transition
        .iter()
        .map(|(s_next, p)| *p * local_reward(model, s, a, s_next, lattice))
        .sum()
}

/// `-factor · dist(x, exit)`.
pub fn terminal_reward<T: Scalar>(model: &RewardModel<T>, s: &FullState, field: &StaticField<T>) -> T {
    -model.terminal_factor * field.at(s.x)
}
