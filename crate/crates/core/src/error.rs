use thiserror::Error;

use crate::evolution::Trajectory;
use crate::peakons::PeakonTrajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "boundary value {value:.3e} exceeds 1e-8 of the field maximum {max:.3e}; \
         the decaying boundary requires negligible values at both ends"
    )]
    BoundaryNotNegligible { value: f64, max: f64 },

    #[error("blow-up: non-finite solution at t = {time}")]
    BlowUp {
        time: f64,
        partial: Box<Trajectory>,
    },

    #[error("peakon collision at t = {time}: |q_{i} - q_{j}| < 1e-6", i = .pair.0 + 1, j = .pair.1 + 1)]
    Collision {
        time: f64,
        pair: (usize, usize),
        partial: Box<PeakonTrajectory>,
    },

    #[error("singular right-hand side: {0}")]
    Singularity(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("characteristics cross at t = {time} (seeds {left} and {right})")]
    CharacteristicCrossing { time: f64, left: usize, right: usize },

    #[error("insufficient tail: {usable} usable points in the {side} window, need at least 8")]
    InsufficientTail { side: &'static str, usable: usize },

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::MissingKey(_)
            | Error::UnknownKey(_)
            | Error::Domain(_)
            | Error::BoundaryNotNegligible { .. }
            | Error::InvalidGrid(_)
            | Error::InvalidArgument(_) => 2,
            Error::BlowUp { .. } => 3,
            Error::Collision { .. } => 4,
            Error::Singularity(_) | Error::Constraint(_) => 5,
            Error::InsufficientTail { .. } => 6,
            _ => 1,
        }
    }
}
