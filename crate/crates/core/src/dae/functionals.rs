use nalgebra::DMatrix;

use super::{EllipticFunctional, LinearMapE, Vector};
use crate::linalg::SymMatrix;

/// `E` given as an explicit dense matrix.
#[derive(Debug, Clone)]
pub struct DenseMap(pub DMatrix<f64>);

impl LinearMapE for DenseMap {
    fn dim_x(&self) -> usize {
        self.0.ncols()
    }
    fn dim_z(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &Vector) -> Vector {
        &self.0 * x
    }
    fn apply_adjoint(&self, z: &Vector) -> Vector {
        self.0.tr_mul(z)
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.0.clone()
    }
}

/// `φ(x) = ½ xᵀQx − bᵀx + c` with `Q` symmetric.
#[derive(Debug, Clone)]
pub struct QuadraticFunctional {
    pub q: DMatrix<f64>,
    pub b: Vector,
    pub c: f64,
    pub omega: f64,
}

impl QuadraticFunctional {
    pub fn new(q: DMatrix<f64>, b: Vector) -> Self {
        Self { q, b, c: 0.0, omega: 0.0 }
    }

    /// `½‖x − center‖²`, written in the `½xᵀQx − bᵀx + c` form.
    pub fn squared_distance(center: Vector) -> Self {
        let n = center.len();
        let c = 0.5 * center.norm_squared();
        Self { q: DMatrix::identity(n, n), b: center, c, omega: 0.0 }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }
}

impl EllipticFunctional for QuadraticFunctional {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q * x)) - self.b.dot(x) + self.c
    }
    fn gradient(&self, x: &Vector) -> Vector {
        &self.q * x - &self.b
    }
    fn hessian(&self, _x: &Vector) -> Option<SymMatrix> {
        Some(SymMatrix::Dense(self.q.clone()))
    }
    fn ellipticity_omega(&self) -> f64 {
        self.omega
    }
}

type ValueFn = Box<dyn Fn(&Vector) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;
type HessFn = Box<dyn Fn(&Vector) -> DMatrix<f64> + Send + Sync>;

/// Functional assembled from closures.
pub struct FnFunctional {
    dim: usize,
    value: ValueFn,
    gradient: GradFn,
    hessian: Option<HessFn>,
    omega: f64,
}

impl FnFunctional {
    pub fn new(
        dim: usize,
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self { dim, value: Box::new(value), gradient: Box::new(gradient), hessian: None, omega: 0.0 }
    }

    pub fn with_hessian(mut self, h: impl Fn(&Vector) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Box::new(h));
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }
}

impl EllipticFunctional for FnFunctional {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &Vector) -> Option<SymMatrix> {
        self.hessian.as_ref().map(|h| SymMatrix::Dense(h(x)))
    }
    fn ellipticity_omega(&self) -> f64 {
        self.omega
    }
}

/// `φ(x) − ⟨g, x⟩`: a functional shifted by a fixed linear load.
pub struct LoadedFunctional<'a, F: EllipticFunctional + ?Sized> {
    pub inner: &'a F,
    pub load: &'a Vector,
}

impl<F: EllipticFunctional + ?Sized> EllipticFunctional for LoadedFunctional<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &Vector) -> f64 {
        self.inner.value(x) - self.load.dot(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.inner.gradient(x) - self.load
    }
    fn hessian(&self, x: &Vector) -> Option<SymMatrix> {
        self.inner.hessian(x)
    }
    fn ellipticity_omega(&self) -> f64 {
        self.inner.ellipticity_omega()
    }
}
