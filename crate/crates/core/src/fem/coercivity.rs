//! Discrete constant `L_C` in `‖A‖² ≤ L_C (‖A‖²_{Ω_C} + ‖∇×A‖²)`.
//!
//! The optimal discrete value is `1/λ_min` for the pencil
//! `(M_C + K) x = λ M x`; `λ_min` is found by inverse iteration with a
//! banded Cholesky factor of `M_C + K`.

use nalgebra::DVector;

use super::{FemError, FemSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityEstimate {
    pub l_c: f64,
    pub lambda_min: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 20_000;
const REL_TOL: f64 = 1e-14;

pub fn estimate_coercivity_constant(space: &FemSpace) -> Result<CoercivityEstimate, FemError> {
    let n = space.n_dofs();
    if n == 0 {
        return Err(FemError::EigenSolveFailure("mesh has no interior dofs".into()));
    }
    let masses = space.masses();
    let lhs = masses.conductor.add_scaled(1.0, &space.stiffness());
    let chol = lhs.cholesky().map_err(|e| FemError::EigenSolveFailure(e.to_string()))?;

    let mut x = DVector::from_element(n, 1.0);
    let mut lambda = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let mx = masses.full.mul_vec(&x);
        let y = chol.solve(&mx);
        let my = masses.full.mul_vec(&y);
        let ay = lhs.mul_vec(&y);
        let new_lambda = y.dot(&ay) / y.dot(&my);
        if !new_lambda.is_finite() || new_lambda <= 0.0 {
            return Err(FemError::EigenSolveFailure(format!("non-positive Rayleigh quotient {new_lambda}")));
        }
        let norm = y.dot(&my).sqrt();
        x = y / norm;
        if (lambda - new_lambda).abs() <= REL_TOL * new_lambda {
            return Ok(CoercivityEstimate { l_c: 1.0 / new_lambda, lambda_min: new_lambda, iterations: it });
        }
        lambda = new_lambda;
    }
    Err(FemError::EigenSolveFailure(format!("no convergence after {MAX_ITER} iterations (λ ≈ {lambda})")))
}
