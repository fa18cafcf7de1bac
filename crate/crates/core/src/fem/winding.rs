use nalgebra::DMatrix;

use super::{FemError, FemSpace};
use crate::material::Region;

/// Axis-aligned support rectangle carrying a constant out-of-plane winding density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    /// Turns per unit area, signed.
    pub kappa: f64,
}

impl SupportRect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Winding functions `χ_1 … χ_m`, each a sum of signed rectangles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindingSpec {
    pub windings: Vec<Vec<SupportRect>>,
}

impl WindingSpec {
    pub fn m(&self) -> usize {
        self.windings.len()
    }

    /// Go/return pair: `+κ` on `[0.1,0.2]×[0.4,0.6]`, `−κ` on `[0.8,0.9]×[0.4,0.6]`.
    pub fn go_return(kappa: f64) -> Self {
        Self {
            windings: vec![vec![
                SupportRect { x0: 0.1, x1: 0.2, y0: 0.4, y1: 0.6, kappa },
                SupportRect { x0: 0.8, x1: 0.9, y0: 0.4, y1: 0.6, kappa: -kappa },
            ]],
        }
    }

    pub fn density(&self, j: usize, p: [f64; 2]) -> f64 {
        self.windings[j].iter().filter(|r| r.contains(p)).map(|r| r.kappa).sum()
    }

    pub fn validate(&self) -> Result<(), FemError> {
        if self.windings.is_empty() {
            return Err(FemError::Winding("at least one winding is required".into()));
        }
        for (j, w) in self.windings.iter().enumerate() {
            for r in w {
                let inside = 0.0 <= r.x0 && r.x0 < r.x1 && r.x1 <= 1.0 && 0.0 <= r.y0 && r.y0 < r.y1 && r.y1 <= 1.0;
                if !inside || !r.kappa.is_finite() {
                    return Err(FemError::Winding(format!("winding {} has an invalid rectangle {r:?}", j + 1)));
                }
            }
        }
        Ok(())
    }
}

/// Density of winding `j` integrated against the triangle: the edge-midpoint
/// value when all three midpoints agree, the centroid value on triangles cut
/// by a support edge.
fn element_density(space: &FemSpace, winding: &WindingSpec, j: usize, t: usize) -> f64 {
    let mesh = &space.mesh;
    let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let mid = |p: [f64; 2], q: [f64; 2]| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
    let vals = [mid(a, b), mid(b, c), mid(c, a)].map(|p| winding.density(j, p));
    if vals[0] == vals[1] && vals[1] == vals[2] {
        vals[0]
    } else {
        winding.density(j, mesh.centroid(t))
    }
}

/// `C_{ij} = ∫ χ_j φ_i`: so `Cᵀa` is the flux linkage of the field with
/// coefficients `a`, and `C i` is the load of the winding currents `i`.
pub fn assemble_coupling(space: &FemSpace, winding: &WindingSpec) -> Result<DMatrix<f64>, FemError> {
    winding.validate()?;
    let m = winding.m();
    let mut c = DMatrix::zeros(space.n_dofs(), m);
    for (t, el) in space.elements.iter().enumerate() {
        for j in 0..m {
            let kappa = element_density(space, winding, j, t);
            if kappa == 0.0 {
                continue;
            }
            if el.region == Region::Conductor {
                return Err(FemError::WindingOverlapsConductor { winding: j + 1, triangle: t });
            }
            for d in el.dofs.iter().flatten() {
                c[(*d, j)] += kappa * el.area / 3.0;
            }
        }
    }
    Ok(c)
}
