use nalgebra::DVector;

use super::{DofMap, Mesh2D};
use crate::linalg::BandedSym;
use crate::material::{Region, ReluctivityModel};

/// Per-triangle data reused by every assembly pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeom {
    pub area: f64,
    /// Constant gradients of the three vertex basis functions.
    pub grads: [[f64; 2]; 3],
    /// Dof index of each vertex, `None` on the boundary.
    pub dofs: [Option<usize>; 3],
    pub region: Region,
}

impl ElementGeom {
    /// Gradient of the P1 field with dof coefficients `a` on this element.
    #[inline]
    pub fn gradient(&self, a: &DVector<f64>) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        for (k, d) in self.dofs.iter().enumerate() {
            if let Some(i) = d {
                g[0] += a[*i] * self.grads[k][0];
                g[1] += a[*i] * self.grads[k][1];
            }
        }
        g
    }
}

fn p1_gradients(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let [a, b, c] = p;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let area = 0.5 * det;
    // ∇φ_k = rot90(opposite edge) / (2·area)
    let grads = [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ];
    (area, grads)
}

/// Element stiffness `area · ∇φ_i·∇φ_j`.
pub fn local_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let (area, g) = p1_gradients(p);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// Element mass `∫ φ_i φ_j = area/12 · (1 + δ_ij)`.
pub fn local_mass(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let (area, _) = p1_gradients(p);
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// Mass matrices on the dof space.
#[derive(Debug, Clone)]
pub struct MassMatrices {
    /// `∫_Ω φ_i φ_j`.
    pub full: BandedSym,
    /// `∫_{Ω_C} φ_i φ_j` (unit conductivity).
    pub conductor: BandedSym,
}

/// Mesh, dof map and cached element geometry.
#[derive(Debug, Clone)]
pub struct FemSpace {
    pub mesh: Mesh2D,
    pub dofs: DofMap,
    pub elements: Vec<ElementGeom>,
    bandwidth: usize,
}

impl FemSpace {
    pub fn new(mesh: Mesh2D, dofs: DofMap) -> Self {
        let mut bandwidth = 0;
        let elements = mesh
            .triangles
            .iter()
            .zip(&mesh.labels)
            .map(|(tri, &region)| {
                let (area, grads) = p1_gradients(tri.map(|v| mesh.vertices[v]));
                let d = tri.map(|v| dofs.vertex_to_dof[v]);
                for a in d.iter().flatten() {
                    for b in d.iter().flatten() {
                        bandwidth = bandwidth.max(a.abs_diff(*b));
                    }
                }
                ElementGeom { area, grads, dofs: d, region }
            })
            .collect();
        Self { mesh, dofs, elements, bandwidth }
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn assemble_local(&self, mut local: impl FnMut(&ElementGeom) -> Option<[[f64; 3]; 3]>) -> BandedSym {
        let mut m = BandedSym::zeros(self.n_dofs(), self.bandwidth);
        for el in &self.elements {
            let Some(k) = local(el) else { continue };
            for (a, da) in el.dofs.iter().enumerate() {
                let Some(i) = da else { continue };
                for (b, db) in el.dofs.iter().enumerate().take(a + 1) {
                    let Some(j) = db else { continue };
                    if a == b {
                        m.add(*i, *i, k[a][a]);
                    } else {
                        m.add(*i, *j, k[a][b]);
                    }
                }
            }
        }
        m
    }

    /// Unit-coefficient stiffness matrix `∫ ∇φ_i·∇φ_j`.
    pub fn stiffness(&self) -> BandedSym {
        self.assemble_local(|el| {
            let mut k = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    k[i][j] = el.area * (el.grads[i][0] * el.grads[j][0] + el.grads[i][1] * el.grads[j][1]);
                }
            }
            Some(k)
        })
    }

    fn mass_on(&self, filter: impl Fn(Region) -> bool) -> BandedSym {
        self.assemble_local(|el| {
            filter(el.region).then(|| {
                let mut m = [[el.area / 12.0; 3]; 3];
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = el.area / 6.0;
                }
                m
            })
        })
    }

    pub fn masses(&self) -> MassMatrices {
        MassMatrices { full: self.mass_on(|_| true), conductor: self.mass_on(|r| r == Region::Conductor) }
    }

    /// `σ_C ∫_{Ω_C} φ_i φ_j`, the Gram matrix of the conductivity-weighted L² map.
    pub fn sigma_mass(&self, sigma_c: f64) -> BandedSym {
        self.mass_on(|r| r == Region::Conductor).scaled(sigma_c)
    }

    /// Discrete magnetic energy `Σ_e area_e θ(ξ_e, |∇a|_e²)`.
    pub fn energy(&self, model: &ReluctivityModel, a: &DVector<f64>) -> f64 {
        self.elements
            .iter()
            .map(|el| {
                let g = el.gradient(a);
                el.area * model.theta_unchecked(el.region, g[0] * g[0] + g[1] * g[1])
            })
            .sum()
    }

    /// Nonlinear curl–curl residual `K(a)_i = Σ_e area_e ν(|∇a|_e) ∇a·∇φ_i`.
    pub fn curlcurl_residual(&self, model: &ReluctivityModel, a: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.n_dofs());
        for el in &self.elements {
            let g = el.gradient(a);
            let s = g[0].hypot(g[1]);
            let w = el.area * model.nu_unchecked(el.region, s);
            for (k, d) in el.dofs.iter().enumerate() {
                if let Some(i) = d {
                    r[*i] += w * (g[0] * el.grads[k][0] + g[1] * el.grads[k][1]);
                }
            }
        }
        r
    }

    /// Consistent tangent of [`curlcurl_residual`](Self::curlcurl_residual).
    pub fn curlcurl_jacobian(&self, model: &ReluctivityModel, a: &DVector<f64>) -> BandedSym {
        self.assemble_local(|el| {
            let t = model.tangent(el.region, el.gradient(a));
            let mut k = [[0.0; 3]; 3];
            for i in 0..3 {
                let gi = el.grads[i];
                let tg = [t[0][0] * gi[0] + t[0][1] * gi[1], t[1][0] * gi[0] + t[1][1] * gi[1]];
                for j in 0..3 {
                    let gj = el.grads[j];
                    k[j][i] = el.area * (gj[0] * tg[0] + gj[1] * tg[1]);
                }
            }
            Some(k)
        })
    }

    /// Per-element gradient magnitudes `|∇a|_e`.
    pub fn gradient_magnitudes(&self, a: &DVector<f64>) -> Vec<f64> {
        self.elements.iter().map(|el| {
            let g = el.gradient(a);
            g[0].hypot(g[1])
        }).collect()
    }

    /// Row sums of the mass matrix over *all* vertices (boundary included).
    pub fn vertex_mass_row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.mesh.n_vertices()];
        for tri in &self.mesh.triangles {
            let m = local_mass(tri.map(|v| self.mesh.vertices[v]));
            for a in 0..3 {
                sums[tri[a]] += m[a].iter().sum::<f64>();
            }
        }
        sums
    }
}
