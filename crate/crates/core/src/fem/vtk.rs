//! Legacy ASCII VTK output of the mesh, subdomain labels and nodal field.

use std::io::{self, Write};

use super::Mesh2D;
use crate::material::Region;

/// Writes an unstructured triangle grid. `a_z` holds one value per vertex.
pub fn write_vtk<W: Write>(w: &mut W, mesh: &Mesh2D, a_z: Option<&[f64]>) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "eddyflow field")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in &mesh.vertices {
        writeln!(w, "{} {} 0", p[0], p[1])?;
    }
    let nt = mesh.n_triangles();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nt}")?;
    writeln!(w, "SCALARS subdomain int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for l in &mesh.labels {
        writeln!(w, "{}", if *l == Region::Conductor { 1 } else { 0 })?;
    }
    if let Some(a) = a_z {
        if a.len() != mesh.n_vertices() {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "field length does not match vertex count"));
        }
        writeln!(w, "POINT_DATA {}", a.len())?;
        writeln!(w, "SCALARS A_z double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in a {
            writeln!(w, "{v}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_mesh;

    #[test]
    fn section_counts() {
        let (mesh, dofs) = build_mesh(4, None).unwrap();
        let a = dofs.to_vertex_values(&nalgebra::DVector::from_element(dofs.n_dofs(), 1.0));
        let mut buf = Vec::new();
        write_vtk(&mut buf, &mesh, Some(&a)).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(s.contains("POINTS 25 double"));
        assert!(s.contains("CELLS 32 128"));
        assert!(s.contains("POINT_DATA 25"));
        assert!(write_vtk(&mut Vec::new(), &mesh, Some(&a[..3])).is_err());
    }
}
