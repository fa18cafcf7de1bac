//! The pushed-forward functional `φ_E(z) = inf { φ(x) : E x = z }`.
//!
//! Evaluated by parameterizing the level set as `x_p + N y` with `x_p` the
//! minimum-norm solution and `N` an orthonormal basis of `ker E`, then
//! minimizing over `y` with damped Newton. Dense, so only for small `X`.

use nalgebra::{DMatrix, DVector};

use super::newton::{damped_newton, NewtonObjective, NewtonSettings};
use super::{hessian_or_fd, DaeError, EllipticFunctional, LinearMapE, Vector};
use crate::linalg::SymMatrix;

pub const DEFAULT_ORACLE_DIM_LIMIT: usize = 64;

const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PhiEValue {
    pub value: f64,
    pub argmin: Vector,
}

struct Reduced<'a> {
    phi: &'a dyn EllipticFunctional,
    base: Vector,
    null: DMatrix<f64>,
}

impl Reduced<'_> {
    fn lift(&self, y: &Vector) -> Vector {
        &self.base + &self.null * y
    }
}

impl NewtonObjective for Reduced<'_> {
    fn value(&self, y: &Vector) -> f64 {
        self.phi.value(&self.lift(y))
    }
    fn gradient(&self, y: &Vector) -> Vector {
        self.null.tr_mul(&self.phi.gradient(&self.lift(y)))
    }
    fn hessian(&self, y: &Vector) -> SymMatrix {
        let h = hessian_or_fd(self.phi, &self.lift(y)).to_dense();
        SymMatrix::Dense(self.null.tr_mul(&(h * &self.null)))
    }
}

/// Full SVD data of `E`: `(pinv(E), orthonormal basis of ker E)`.
fn pinv_and_kernel(e: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = e.shape();
    // pad rows so that the thin SVD returns a complete right basis
    let k = m.max(n);
    let mut sq = DMatrix::zeros(k, n);
    sq.view_mut((0, 0), (m, n)).copy_from(e);
    let svd = sq.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let smax = svd.singular_values.max();
    let cut = (k as f64) * f64::EPSILON * smax.max(f64::MIN_POSITIVE);
    let mut pinv = DMatrix::zeros(n, m);
    let mut null_cols = Vec::new();
    for (idx, &s) in svd.singular_values.iter().enumerate() {
        let v = v_t.row(idx).transpose();
        if s > cut {
            let u_col = u.column(idx).rows(0, m).into_owned();
            pinv += v * u_col.transpose() / s;
        } else {
            null_cols.push(v);
        }
    }
    let null = if null_cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    (pinv, null)
}

/// `φ_E(z)` and a minimizer; see the module docs.
pub fn eval_phi_e(
    phi: &dyn EllipticFunctional,
    e: &dyn LinearMapE,
    z: &Vector,
    dim_limit: usize,
) -> Result<PhiEValue, DaeError> {
    let n = e.dim_x();
    if n > dim_limit {
        return Err(DaeError::OracleLimitExceeded { dim: n, limit: dim_limit });
    }
    let dense = e.to_dense();
    let (pinv, null) = pinv_and_kernel(&dense);
    let base = &pinv * z;
    let residual = (&dense * &base - z).norm();
    if residual > FEASIBILITY_TOL * (1.0 + z.norm()) {
        return Err(DaeError::InfeasibleLevelSet { residual });
    }
    let reduced = Reduced { phi, base, null };
    let y0 = DVector::zeros(reduced.null.ncols());
    let settings = NewtonSettings { tol: 1e-13, max_iter: 100, ..Default::default() };
    let out = damped_newton(&reduced, y0, &settings)?;
    let argmin = reduced.lift(&out.x);
    Ok(PhiEValue { value: phi.value(&argmin), argmin })
}

/// Least-squares solution `g` of `E* g = q` and the residual `‖E* g − q‖`.
///
/// A small residual certifies `q ∈ range(E*)`, i.e. that `(z, g)` is an
/// E-subgradient pair whenever `q = Dφ(x)` at a `φ_E` minimizer.
pub fn subgradient_preimage(e: &dyn LinearMapE, q: &Vector) -> (Vector, f64) {
    let et = e.to_dense().transpose();
    let (pinv, _) = pinv_and_kernel(&et);
    let g = pinv * q;
    let r = (&et * &g - q).norm();
    (g, r)
}
