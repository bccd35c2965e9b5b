use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("position {pos} is outside the {width}x{height} lattice")]
    OutOfBounds {
        pos: String,
        width: usize,
        height: usize,
    },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid trajectory record for pedestrian {ped_id}: {reason}")]
    InvalidRecord { ped_id: String, reason: String },

    #[error("direction angle is undefined: {0}")]
    UndefinedAngle(&'static str),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("malformed input at line {line}: {reason}")]
    Malformed { line: u64, reason: String },

    #[error("state space too large: {required} states required, {allowed} allowed")]
    Capacity { required: u128, allowed: u128 },

    #[error("policy has no decision for state {state} at epoch {epoch}")]
    UndefinedPolicy { epoch: usize, state: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
