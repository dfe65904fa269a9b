use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("Duffing ladder inverts at level {level}: keep at most {max_levels} transmon levels")]
    LadderInversion { level: usize, max_levels: usize },

    #[error("Hilbert space dimension {dim} exceeds limit {max}; reduce n_levels or n_photons")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("branch labeling failed at detuning {detuning} GHz: {reason}")]
    Labeling { detuning: f64, reason: String },

    #[error("photon truncation breached at t = {time} ns: top Fock population {population:.3e}")]
    Truncation { time: f64, population: f64 },

    #[error("integrator step size underflow at t = {time} ns")]
    StepUnderflow { time: f64 },

    #[error("classical amplitude diverged at t = {time} ns (|alpha| = {magnitude:.3e})")]
    Divergence { time: f64, magnitude: f64 },

    #[error("bisection could not bracket the threshold: {0}")]
    NotBracketed(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("S-curve does not span the transition: min P = {min_p:.3}, max P = {max_p:.3}")]
    SpanNotCovered { min_p: f64, max_p: f64 },

    #[error("S-curves are not comparable: {0}")]
    GridMismatch(String),

    #[error("steady state not reached: {0}")]
    NotConverged(String),

    #[error("{failed} of {total} trajectories aborted (limit 1%); first: {first}")]
    TooManyAborts {
        failed: usize,
        total: usize,
        first: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
