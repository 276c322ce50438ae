//! Legacy ASCII VTK output of displacements and per-element plastic fields.

use std::fmt::Write as _;
use std::path::Path;

use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Per-element averages of point quantities (`values.len()` must be a
/// multiple of the element count).
pub fn element_means(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let ne = mesh.n_elements().max(1);
    let per = values.len() / ne;
    values.chunks(per.max(1)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

/// Unstructured grid with point displacement, its magnitude, and the cell
/// means of the plastic multiplier increment and hardening variable.
pub fn write_vtk_string(mesh: &Mesh, u_full: &[f64], dlambda: &[f64], ebar: &[f64]) -> String {
    let dim = mesh.dim();
    let nen = mesh.family.nodes_per_element();
    let ne = mesh.n_elements();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nmohrcoulomb slope\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for p in &mesh.coords {
        let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "CELLS {} {}", ne, ne * (nen + 1));
    for e in 0..ne {
        let ids: Vec<String> = mesh.element(e).iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "{nen} {}", ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "{}", mesh.family.vtk_cell_type());
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.n_nodes());
    let _ = writeln!(s, "VECTORS displacement double");
    let comp = |n: usize, c: usize| if c < dim { u_full[n * dim + c] } else { 0.0 };
    for n in 0..mesh.n_nodes() {
        let _ = writeln!(s, "{:e} {:e} {:e}", comp(n, 0), comp(n, 1), comp(n, 2));
    }
    let _ = writeln!(s, "SCALARS displacement_magnitude double 1\nLOOKUP_TABLE default");
    for n in 0..mesh.n_nodes() {
        let m = (0..dim).map(|c| comp(n, c).powi(2)).sum::<f64>().sqrt();
        let _ = writeln!(s, "{m:e}");
    }
    let _ = writeln!(s, "CELL_DATA {ne}");
    for (name, values) in [("plastic_multiplier", dlambda), ("hardening_variable", ebar)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in element_means(mesh, values) {
            let _ = writeln!(s, "{v:e}");
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, u_full: &[f64], dlambda: &[f64], ebar: &[f64]) -> Result<()> {
    std::fs::write(path, write_vtk_string(mesh, u_full, dlambda, ebar)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::element::ElementFamily;
    use crate::fem::mesh::{build_slope_mesh, MeshDensity, SlopeGeometry};

    #[test]
    fn sections_sized_consistently() {
        let m = build_slope_mesh(&SlopeGeometry::default(), ElementFamily::Q2Quad, MeshDensity { refinement: 2, grading: 1.0 }).unwrap();
        let pts = m.n_points();
        let s = write_vtk_string(&m, &vec![0.0; m.n_dofs()], &vec![1.0; pts], &vec![0.5; pts]);
        assert!(s.contains(&format!("POINTS {} double", m.n_nodes())));
        assert!(s.contains(&format!("CELLS {} {}", m.n_elements(), 9 * m.n_elements())));
        let lines: Vec<&str> = s.lines().collect();
        let start = lines.iter().position(|l| l.starts_with("CELL_TYPES")).unwrap();
        assert!(lines[start + 1..start + 1 + m.n_elements()].iter().all(|l| *l == "23"));
        let tail = lines.iter().rposition(|l| l.starts_with("LOOKUP_TABLE")).unwrap();
        assert_eq!(lines.len() - tail - 1, m.n_elements());
        assert_eq!(lines[tail + 1], "5e-1");
    }
}
