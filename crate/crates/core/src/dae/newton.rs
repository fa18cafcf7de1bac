use log::trace;

use super::{DaeError, Vector};
use crate::linalg::SymMatrix;

/// Smooth convex objective minimized by [`damped_newton`].
pub trait NewtonObjective {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> SymMatrix;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Relative tolerance: stop once `‖∇J‖ ≤ tol·(1 + ‖∇J(x_init)‖)`.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, armijo_c: 1e-4, armijo_shrink: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vector,
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
}

const MIN_STEP: f64 = 1e-10;

/// Newton's method with Armijo backtracking on the objective value.
///
/// A zero initial gradient returns `x_init` unchanged.
pub fn damped_newton(
    obj: &dyn NewtonObjective,
    x_init: Vector,
    settings: &NewtonSettings,
) -> Result<NewtonOutcome, DaeError> {
    let mut x = x_init;
    let mut g = obj.gradient(&x);
    let r0 = g.norm();
    let target = settings.tol * (1.0 + r0);
    if r0 == 0.0 {
        return Ok(NewtonOutcome { x, iterations: 0, initial_residual: 0.0, final_residual: 0.0 });
    }
    let mut fx = obj.value(&x);
    let mut res = r0;
    for it in 0..settings.max_iter {
        if res <= target {
            return Ok(NewtonOutcome { x, iterations: it, initial_residual: r0, final_residual: res });
        }
        let h = obj.hessian(&x);
        let d = -h.factor()?.solve(&g);
        let slope = g.dot(&d);
        if !(slope < 0.0) {
            // only possible through roundoff once the Hessian is nearly singular
            return Err(DaeError::NonConvergence { iterations: it, residual: res, target });
        }
        let slack = 8.0 * f64::EPSILON * (1.0 + fx.abs());
        let mut alpha = 1.0;
        let (x_new, f_new) = loop {
            let cand = &x + &d * alpha;
            let fc = obj.value(&cand);
            if fc.is_finite() && fc <= fx + settings.armijo_c * alpha * slope + slack {
                break (cand, fc);
            }
            alpha *= settings.armijo_shrink;
            if alpha < MIN_STEP {
                // at roundoff level the objective no longer resolves the decrease
                let cand = &x + &d;
                if obj.gradient(&cand).norm() < res {
                    let fc = obj.value(&cand);
                    break (cand, fc);
                }
                return Err(DaeError::NonConvergence { iterations: it + 1, residual: res, target });
            }
        };
        trace!("newton it={it} res={res:e} alpha={alpha}");
        x = x_new;
        fx = f_new;
        g = obj.gradient(&x);
        res = g.norm();
    }
    if res <= target {
        return Ok(NewtonOutcome {
            x,
            iterations: settings.max_iter,
            initial_residual: r0,
            final_residual: res,
        });
    }
    Err(DaeError::NonConvergence { iterations: settings.max_iter, residual: res, target })
}
