//! Abstract differential-algebraic gradient systems
//!
//! ```text
//!     E* f(t) - E* d/dt (E x(t))  ∈  ∂φ(x(t)),      E x(0) = z0,
//! ```
//!
//! with `E: X -> Z` linear (possibly rank deficient) and `φ` convex and
//! E-elliptic. Time stepping is implicit Euler written as a proximal
//! minimization in the degenerate metric induced by `E`; see [`prox`].
//!
//! Nothing in this module knows about the eddy-current instantiation; the
//! same code runs on the small dense instances used as oracles in tests.

mod ellipticity;
mod functionals;
mod monitors;
mod newton;
mod phi_e;
mod prox;

pub use ellipticity::{check_e_ellipticity, EllipticityProbe, EllipticityReport, LowerBound};
pub use functionals::{DenseMap, FnFunctional, LoadedFunctional, QuadraticFunctional};
pub use monitors::{energy_identity_residual, regularity_monitors, RegularityMonitors};
pub use newton::{damped_newton, NewtonObjective, NewtonOutcome, NewtonSettings};
pub use phi_e::{eval_phi_e, subgradient_preimage, PhiEValue, DEFAULT_ORACLE_DIM_LIMIT};
pub use prox::{
    prox_step, sample_input, solve_trajectory, solve_trajectory_loaded, DaeTrajectory,
    InitialGuess, InputSampling, ProxConfig, ProxOutcome,
};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{LinalgError, SymMatrix};

pub type Vector = DVector<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DaeError {
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e}, target {target:e})")]
    NonConvergence { iterations: usize, residual: f64, target: f64 },
    #[error("Newton linear system could not be solved: {0}")]
    SingularStep(#[from] LinalgError),
    #[error("step {step} failed: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<DaeError>,
    },
    #[error("level set E x = z is empty (residual {residual:e})")]
    InfeasibleLevelSet { residual: f64 },
    #[error("oracle dimension {dim} exceeds limit {limit}")]
    OracleLimitExceeded { dim: usize, limit: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Bounded linear map `E: X -> Z` between real coordinate spaces with
/// Euclidean inner products.
pub trait LinearMapE {
    fn dim_x(&self) -> usize;
    fn dim_z(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn apply_adjoint(&self, z: &Vector) -> Vector;

    /// `E* E`. The default probes `E` on unit vectors and returns a dense matrix.
    fn gram(&self) -> SymMatrix {
        SymMatrix::Dense(self.to_dense().tr_mul(&self.to_dense()))
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim_x();
        let mut m = DMatrix::zeros(self.dim_z(), n);
        for j in 0..n {
            let mut e = Vector::zeros(n);
            e[j] = 1.0;
            m.set_column(j, &self.apply(&e));
        }
        m
    }
}

/// Proper convex functional with a single-valued subgradient on its domain.
pub trait EllipticFunctional {
    fn dim(&self) -> usize;

    /// `φ(x)`, or `+∞` outside the effective domain.
    fn value(&self, x: &Vector) -> f64;

    /// Gâteaux derivative `Dφ(x)`, identified with an element of `X`.
    fn gradient(&self, x: &Vector) -> Vector;

    /// Second derivative, if available. Without it Newton falls back to a
    /// finite-difference Hessian of [`gradient`](Self::gradient).
    fn hessian(&self, _x: &Vector) -> Option<SymMatrix> {
        None
    }

    /// Declared shift `ω` such that `(ω/2)‖E x‖² + φ(x)` is convex and coercive.
    fn ellipticity_omega(&self) -> f64 {
        0.0
    }
}

impl<T: EllipticFunctional + ?Sized> EllipticFunctional for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &Vector) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &Vector) -> Option<SymMatrix> {
        (**self).hessian(x)
    }
    fn ellipticity_omega(&self) -> f64 {
        (**self).ellipticity_omega()
    }
}

/// Hessian of `phi` at `x`, by finite differences of the gradient when the
/// functional does not provide one.
pub(crate) fn hessian_or_fd(phi: &dyn EllipticFunctional, x: &Vector) -> SymMatrix {
    if let Some(h) = phi.hessian(x) {
        return h;
    }
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let step = 1e-6 * (1.0 + x[j].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += step;
        xm[j] -= step;
        let col = (phi.gradient(&xp) - phi.gradient(&xm)) / (2.0 * step);
        h.set_column(j, &col);
    }
    SymMatrix::Dense((&h + h.transpose()) * 0.5)
}
