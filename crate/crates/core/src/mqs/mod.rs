//! Stranded-conductor eddy-current field–circuit system on a 2D cross-section.
//!
//! Unknowns are the field coefficients `a` and the winding currents `i`:
//!
//! ```text
//!     M_σ (a_k − a_{k−1})/τ + K(a_k) = C i_k
//!     Cᵀ (a_k − a_{k−1})/τ + R i_k   = v_k
//! ```
//!
//! Each step is one proximal minimization over `a` in the metric of
//! `E a = (√σ a, R^{-1/2} Cᵀ a)`; the currents follow from the second line.

mod config;
mod manufactured;
mod probes;
mod solve;
mod system;

pub use config::{InitialField, MqsConfig, VoltageSignal};
pub use manufactured::{manufactured_energy_error, manufactured_loads, manufactured_solution};
pub use probes::{
    energy_bound_probe, gateaux_probe, lipschitz_probe, monotonicity_probe, EnergyBoundReport, GateauxReport,
    LipschitzReport, MonotonicityReport,
};
pub use solve::{
    balance_residuals, check_weak_solution, schur_step, solve, solve_from, tolerance_scale, MqsTrajectory,
    WeakResidualReport,
};
pub use system::{
    build_system, initial_field, mqs_energy, mqs_energy_gateaux, MagneticEnergy, MqsEMap, MqsOperators,
};

use thiserror::Error;

use crate::dae::DaeError;
use crate::fem::FemError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MqsError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Dae(#[from] DaeError),
    #[error("unsupported: {0}")]
    Unsupported(String),
}
