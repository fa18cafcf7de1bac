//! Manufactured solution `A(x, y, t) = sin(πx) sin(πy)(1 − e^{−t})` for the
//! decoupled linear case.
//!
//! The source `f = σ ∂_t A − ν ΔA` is integrated against the basis with the
//! element's own conductivity, so the discrete conductor (a union of
//! triangles) is the domain the exact solution lives on.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::{MqsError, MqsOperators};
use crate::dae::Vector;
use crate::material::{NuCurve, Region};

/// Degree-5 rule on the reference triangle: (barycentric coordinates, weight).
const QUAD: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059_715_871_789_770, 0.470_142_064_105_115, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.059_715_871_789_770, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.470_142_064_105_115, 0.059_715_871_789_770], 0.132_394_152_788_506),
    ([0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.797_426_985_353_087, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.101_286_507_323_456, 0.797_426_985_353_087], 0.125_939_180_544_827),
];

fn shape(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

fn shape_grad(x: f64, y: f64) -> [f64; 2] {
    [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()]
}

/// `A(x, y, t)`.
pub fn manufactured_solution(x: f64, y: f64, t: f64) -> f64 {
    shape(x, y) * (1.0 - (-t).exp())
}

fn uniform_nu(ops: &MqsOperators) -> Result<f64, MqsError> {
    match (ops.model.curve(Region::Conductor), ops.model.curve(Region::Insulator)) {
        (NuCurve::Constant { nu0: a }, NuCurve::Constant { nu0: b }) if a == b => Ok(*a),
        _ => Err(MqsError::Unsupported(
            "the manufactured source is defined for a uniform constant reluctivity only".into(),
        )),
    }
}

/// `g_k = ∫ f(·, t_k) φ_i` for `k = 1..=n`. The windings must carry no density.
pub fn manufactured_loads(ops: &MqsOperators, tau: f64, n: usize) -> Result<Vec<Vector>, MqsError> {
    let nu = uniform_nu(ops)?;
    if ops.c.iter().any(|v| *v != 0.0) {
        return Err(MqsError::Unsupported("the manufactured source requires windings with zero density".into()));
    }
    // b = ∫ S φ_i over Ω, b_c the same over Ω_C
    let nd = ops.n_dofs();
    let mut b = DVector::zeros(nd);
    let mut b_c = DVector::zeros(nd);
    let mesh = &ops.space.mesh;
    for (t, el) in ops.space.elements.iter().enumerate() {
        let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
        for (lam, w) in QUAD {
            let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
            let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
            let s = w * el.area * shape(x, y);
            for (k, d) in el.dofs.iter().enumerate() {
                if let Some(i) = d {
                    b[*i] += s * lam[k];
                    if el.region == Region::Conductor {
                        b_c[*i] += s * lam[k];
                    }
                }
            }
        }
    }
    Ok((1..=n)
        .map(|k| {
            let decay = (-(k as f64) * tau).exp();
            &b_c * (ops.sigma_c * decay) + &b * (2.0 * nu * PI * PI * (1.0 - decay))
        })
        .collect())
}

/// `‖∇(A(·, t) − a_h)‖_{L²(Ω)}` by elementwise quadrature.
pub fn manufactured_energy_error(ops: &MqsOperators, a: &Vector, t: f64) -> f64 {
    let ramp = 1.0 - (-t).exp();
    let mesh = &ops.space.mesh;
    let mut acc = 0.0;
    for (tri, el) in mesh.triangles.iter().zip(&ops.space.elements) {
        let p = tri.map(|v| mesh.vertices[v]);
        let gh = el.gradient(a);
        for (lam, w) in QUAD {
            let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
            let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
            let g = shape_grad(x, y);
            let dx = g[0] * ramp - gh[0];
            let dy = g[1] * ramp - gh[1];
            acc += w * el.area * (dx * dx + dy * dy);
        }
    }
    acc.sqrt()
}
