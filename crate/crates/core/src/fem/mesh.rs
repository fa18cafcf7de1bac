use std::collections::{HashMap, VecDeque};

use crate::material::Region;

use super::FemError;

/// Circular conducting cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) < self.radius
    }
}

/// Triangulation of the unit square with element subdomain labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub labels: Vec<Region>,
    pub boundary: Vec<bool>,
    /// Grid resolution for structured meshes (0 otherwise).
    pub n: usize,
}

pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

impl Mesh2D {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area (positive for counter-clockwise triangles).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.n_triangles()).filter(|&t| self.labels[t] == region).map(|t| self.signed_area(t)).sum()
    }

    /// Checks orientation, non-degeneracy, conformity and the placement of
    /// the conducting subdomain (edge-connected, closure away from the boundary).
    pub fn validate(&self) -> Result<(), FemError> {
        if self.labels.len() != self.triangles.len() || self.boundary.len() != self.vertices.len() {
            return Err(FemError::Geometry("label/flag arrays do not match mesh size".into()));
        }
        for t in 0..self.n_triangles() {
            let a = self.signed_area(t);
            if !(a >= MIN_TRIANGLE_AREA) {
                return Err(FemError::Geometry(format!("triangle {t} is degenerate or clockwise (area {a:e})")));
            }
        }
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        for (&(a, b), tris) in &edges {
            match tris.len() {
                1 if !(self.boundary[a] && self.boundary[b]) => {
                    return Err(FemError::Geometry(format!("edge ({a},{b}) has one neighbour but is not on the boundary")))
                }
                1 | 2 => {}
                k => return Err(FemError::Geometry(format!("edge ({a},{b}) is shared by {k} triangles"))),
            }
        }
        let conductor: Vec<usize> = (0..self.n_triangles()).filter(|&t| self.labels[t] == Region::Conductor).collect();
        for &t in &conductor {
            if self.triangles[t].iter().any(|&v| self.boundary[v]) {
                return Err(FemError::Geometry(format!("conducting triangle {t} touches the outer boundary")));
            }
        }
        if let Some(&first) = conductor.first() {
            let mut seen = vec![false; self.n_triangles()];
            seen[first] = true;
            let mut queue = VecDeque::from([first]);
            let mut reached = 1;
            while let Some(t) = queue.pop_front() {
                let tri = self.triangles[t];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    for &u in &edges[&(a.min(b), a.max(b))] {
                        if !seen[u] && self.labels[u] == Region::Conductor {
                            seen[u] = true;
                            reached += 1;
                            queue.push_back(u);
                        }
                    }
                }
            }
            if reached != conductor.len() {
                return Err(FemError::Geometry(format!(
                    "conducting subdomain is not edge-connected ({reached} of {} triangles reachable)",
                    conductor.len()
                )));
            }
        }
        Ok(())
    }
}

/// Degrees of freedom: interior vertices only, so coefficient vectors
/// vanish on the outer boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub vertex_to_dof: Vec<Option<usize>>,
    pub dof_to_vertex: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh2D) -> Self {
        let mut vertex_to_dof = vec![None; mesh.n_vertices()];
        let mut dof_to_vertex = Vec::new();
        for (v, &b) in mesh.boundary.iter().enumerate() {
            if !b {
                vertex_to_dof[v] = Some(dof_to_vertex.len());
                dof_to_vertex.push(v);
            }
        }
        Self { vertex_to_dof, dof_to_vertex }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_to_vertex.len()
    }

    /// Vertex values from dof coefficients (zero on the boundary).
    pub fn to_vertex_values(&self, a: &nalgebra::DVector<f64>) -> Vec<f64> {
        self.vertex_to_dof.iter().map(|d| d.map_or(0.0, |i| a[i])).collect()
    }
}

/// Structured `n × n` grid on the unit square, each cell split along an
/// alternating diagonal ("union jack"), with triangles labelled conducting
/// when their centroid lies inside `conductor`.
pub fn build_mesh(n: usize, conductor: Option<Disk>) -> Result<(Mesh2D, DofMap), FemError> {
    if n < 4 {
        return Err(FemError::Geometry(format!("grid resolution must be at least 4, got {n}")));
    }
    let conductor = conductor.filter(|d| d.radius > 0.0);
    if let Some(d) = conductor {
        let clearance = 2.0 / n as f64;
        let lo = d.center[0].min(d.center[1]) - d.radius;
        let hi = d.center[0].max(d.center[1]) + d.radius;
        if lo < clearance || hi > 1.0 - clearance {
            return Err(FemError::Geometry(format!(
                "conductor disk (center {:?}, radius {}) needs clearance {clearance} from the boundary",
                d.center, d.radius
            )));
        }
    }
    let np = n + 1;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(np * np);
    let mut boundary = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 * h, j as f64 * h]);
            boundary.push(i == 0 || j == 0 || i == n || j == n);
        }
    }
    let v = |i: usize, j: usize| j * np + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    let mut mesh = Mesh2D { vertices, triangles, labels: Vec::new(), boundary, n };
    mesh.labels = (0..mesh.n_triangles())
        .map(|t| match conductor {
            Some(d) if d.contains(mesh.centroid(t)) => Region::Conductor,
            _ => Region::Insulator,
        })
        .collect();
    mesh.validate()?;
    let dofs = DofMap::new(&mesh);
    Ok((mesh, dofs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_mesh_without_conductor() {
        let (mesh, dofs) = build_mesh(4, None).unwrap();
        assert_eq!(dofs.n_dofs(), 9);
        assert_eq!(mesh.n_triangles(), 32);
        assert!(mesh.labels.iter().all(|&l| l == Region::Insulator));
        let total: f64 = (0..mesh.n_triangles()).map(|t| mesh.signed_area(t)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_radius_means_no_conductor() {
        let d = Disk { center: [0.5, 0.5], radius: 0.0 };
        let (mesh, _) = build_mesh(8, Some(d)).unwrap();
        assert_eq!(mesh.region_area(Region::Conductor), 0.0);
    }

    #[test]
    fn disk_area_by_centroid_count() {
        let d = Disk { center: [0.5, 0.5], radius: 0.2 };
        let (mesh, _) = build_mesh(32, Some(d)).unwrap();
        let exact = std::f64::consts::PI * 0.04;
        let got = mesh.region_area(Region::Conductor);
        assert!((got - exact).abs() <= 0.05 * exact, "{got} vs {exact}");
    }

    #[test]
    fn clearance_violation() {
        let d = Disk { center: [0.5, 0.5], radius: 0.49 };
        assert!(matches!(build_mesh(8, Some(d)), Err(FemError::Geometry(_))));
        assert!(build_mesh(3, None).is_err());
    }

    #[test]
    fn disconnected_conductor_is_rejected() {
        let (mut mesh, _) = build_mesh(8, None).unwrap();
        // two interior triangles far apart
        let far: Vec<usize> = [[2.2, 2.2], [5.5, 5.5]]
            .iter()
            .map(|c| (0..mesh.n_triangles()).find(|&t| {
                let p = mesh.centroid(t);
                (p[0] * 8.0 - c[0]).abs() < 0.5 && (p[1] * 8.0 - c[1]).abs() < 0.5
            }).unwrap())
            .collect();
        for t in far {
            mesh.labels[t] = Region::Conductor;
        }
        let err = mesh.validate().unwrap_err();
        assert!(err.to_string().contains("edge-connected"));
    }

    #[test]
    fn conductor_touching_boundary_is_rejected() {
        let (mut mesh, _) = build_mesh(8, None).unwrap();
        mesh.labels[0] = Region::Conductor;
        assert!(mesh.validate().unwrap_err().to_string().contains("boundary"));
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let (mut mesh, _) = build_mesh(4, None).unwrap();
        mesh.triangles[3].swap(0, 1);
        assert!(mesh.validate().is_err());
    }
}
