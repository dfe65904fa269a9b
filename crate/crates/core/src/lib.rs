//! Simulation and analysis toolkit for autoresonant capture in a chirp-driven
//! Kerr cavity strongly coupled to a multilevel transmon.
//!
//! * [`model`]: Hilbert space and Jaynes–Cummings–Kerr operators.
//! * [`spectrum`]: dressed levels, adiabatic branch labels, avoided
//!   crossings, and the effective `ε + ω n − λ n²` ladder.
//! * [`quantum`]: Monte Carlo wavefunction trajectories under a chirped
//!   drive, and weak-probe transmission around a pumped steady state.
//! * [`semiclassical`]: coupled classical oscillators with vacuum Wigner
//!   sampling, autoresonant capture and threshold scaling.
//! * [`analysis`]: S-curves, logistic threshold fits, readout fidelity,
//!   ac Stark calibration and detuning maps.
//!
//! Units are GHz and ns at every public boundary.

// `!(x > 0.0)` is used deliberately so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod model;
pub mod ode;
pub mod pulse;
pub mod quantum;
pub mod rng;
pub mod semiclassical;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{Coupling, OperatorMatrix, SystemParams};
pub use pulse::{ChirpPulse, Envelope};

/// 2π, the only place ordinary frequencies become angular ones.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Initial transmon state for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitState {
    Ground,
    Excited,
}

impl QubitState {
    pub fn index(self) -> usize {
        match self {
            QubitState::Ground => 0,
            QubitState::Excited => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(QubitState::Ground),
            1 => Some(QubitState::Excited),
            _ => None,
        }
    }
}

impl std::fmt::Display for QubitState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index())
    }
}
