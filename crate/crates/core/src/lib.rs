//! Proximal time stepping for quasilinear eddy-current field–circuit systems
//! written as differential-algebraic gradient flows, with numerical
//! diagnostics for the structural properties of the scheme.
//!
//! * [`dae`]: generic gradient-DAE solver (`E* f − E* d/dt(E x) ∈ ∂φ(x)`).
//! * [`material`]: reluctivity models and energy densities.
//! * [`fem`]: 2D cross-section mesh and P1 assembly.
//! * [`mqs`]: the coupled field–circuit instantiation.
//! * [`diagnostics`]: experiments, refinement studies and output writers.

pub mod dae;
pub mod diagnostics;
pub mod fem;
pub mod linalg;
pub mod material;
pub mod mqs;
pub(crate) mod sampling;
