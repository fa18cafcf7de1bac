//! Two-dimensional cross-section discretization.
//!
//! The out-of-plane potential `A = A_z e_z` is approximated by continuous
//! piecewise-linear functions on a structured triangulation of `(0,1)²`,
//! vanishing on the outer boundary. In this setting `|∇×A| = |∇A_z|`, so
//! the quasilinear curl–curl form becomes `∫ ν(|∇a|) ∇a·∇φ_i`.

mod assembly;
mod coercivity;
mod mesh;
pub mod vtk;
mod winding;

pub use assembly::{local_mass, local_stiffness, ElementGeom, FemSpace, MassMatrices};
pub use coercivity::{estimate_coercivity_constant, CoercivityEstimate};
pub use mesh::{build_mesh, Disk, DofMap, Mesh2D, MIN_TRIANGLE_AREA};
pub use winding::{assemble_coupling, SupportRect, WindingSpec};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("winding error: {0}")]
    Winding(String),
    #[error("winding {winding} has support on conducting triangle {triangle}")]
    WindingOverlapsConductor { winding: usize, triangle: usize },
    #[error("eigenvalue iteration failed: {0}")]
    EigenSolveFailure(String),
}
