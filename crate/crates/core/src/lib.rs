//! Pedestrian decision modelling on a lattice.
//!
//! The pipeline runs from raw trajectories to an optimal evacuation strategy:
//!
//! * [`trajectory`] resamples tracked paths and labels each step with one of
//!   seven actions relative to the exit direction.
//! * [`neighborhood`] turns the surroundings of each pedestrian into six
//!   occupancy bits, and [`mixture`] fits a mixture of per-sector categorical
//!   models to the resulting `(state, action)` stream.
//! * [`environment`] implements floor-field particles on a [`lattice`], and
//!   [`mdp`] plans for a single agent moving among them.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` and `*32` aliases below fix the precision.

// `!(x > 0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod environment;
pub mod error;
pub mod lattice;
pub mod mdp;
pub mod mixture;
pub mod neighborhood;
pub mod num;
pub mod synthetic;
pub mod trajectory;

pub use environment::{crowd_transition, CrowdState, OccupancyGrid, TransitionDistribution};
pub use error::{Error, Result};
pub use lattice::{Cell, GridPos, Lattice, LatticeConfig, Metric, StaticField};
pub use mdp::{CleverAction, FullState, RewardKind, RewardModel};
pub use mixture::{EstimatorState, MixtureModel};
pub use neighborhood::{Observation, SectorState, WallGeometry};
pub use num::{Scalar, Vec2};
pub use trajectory::{ActionLabel, PathRecord, Sector};

pub type StaticField64 = StaticField<f64>;
pub type StaticField32 = StaticField<f32>;
pub type Vec2d = Vec2<f64>;
pub type Vec2f = Vec2<f32>;
pub type PathRecord64 = PathRecord<f64>;
pub type PathRecord32 = PathRecord<f32>;
pub type Observation64 = Observation<f64>;
pub type Observation32 = Observation<f32>;
pub type WallGeometry64 = WallGeometry<f64>;
pub type WallGeometry32 = WallGeometry<f32>;
pub type MixtureModel64 = MixtureModel<f64>;
pub type MixtureModel32 = MixtureModel<f32>;
pub type EstimatorState64 = EstimatorState<f64>;
pub type EstimatorState32 = EstimatorState<f32>;
pub type TransitionDistribution64 = TransitionDistribution<f64>;
pub type TransitionDistribution32 = TransitionDistribution<f32>;
pub type RewardModel64 = RewardModel<f64>;
pub type RewardModel32 = RewardModel<f32>;
pub type ValueFunction64 = mdp::ValueFunction<f64>;
pub type ValueFunction32 = mdp::ValueFunction<f32>;
