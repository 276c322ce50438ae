//! Slope meshes, boundary constraints and a plain-text mesh format.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::element::ElementFamily;
use crate::error::{Error, Result};

/// Cross-section of the slope: a foundation of height `y1` under the whole
/// body, a slope of height `y2` rising over the horizontal run `x2`, flat
/// ground of length `x1` in front of the toe and `x3` behind the crest.
/// `z` is the extrusion depth of 3D meshes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlopeGeometry {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub y1: f64,
    pub y2: f64,
    pub z: f64,
}

impl Default for SlopeGeometry {
    fn default() -> Self {
        Self { x1: 15.0, x2: 10.0, x3: 15.0, y1: 10.0, y2: 10.0, z: 10.0 }
    }
}

impl SlopeGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("x1", self.x1), ("x2", self.x2), ("x3", self.x3), ("y1", self.y1), ("y2", self.y2), ("z", self.z)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Mesh(format!("slope geometry: {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x1 + self.x2 + self.x3
    }

    /// Cross-section area.
    pub fn area(&self) -> f64 {
        self.width() * self.y1 + self.y2 * (0.5 * self.x2 + self.x3)
    }

    /// Top of the slope at the crest.
    pub fn corner_a(&self) -> [f64; 3] {
        [self.x1 + self.x2, self.y1 + self.y2, 0.0]
    }
}

/// Mesh resolution: `refinement` element layers over the slope height,
/// element size `y2 / refinement` elsewhere, optionally graded toward the toe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshDensity {
    pub refinement: usize,
    /// Ratio of largest to smallest element along graded directions (>= 1).
    pub grading: f64,
}

impl Default for MeshDensity {
    fn default() -> Self {
        Self { refinement: 4, grading: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub family: ElementFamily,
    pub coords: Vec<[f64; 3]>,
    /// Flat connectivity, `nodes_per_element` entries per element.
    pub connectivity: Vec<usize>,
    /// Constrained `(node, component)` pairs with zero prescribed displacement.
    pub fixed: Vec<(usize, usize)>,
    /// Node at the slope crest whose settlement is monitored.
    pub corner_a: Option<usize>,
}

impl Mesh {
    pub fn new(
        family: ElementFamily,
        coords: Vec<[f64; 3]>,
        connectivity: Vec<usize>,
        mut fixed: Vec<(usize, usize)>,
        corner_a: Option<usize>,
    ) -> Result<Self> {
        fixed.sort_unstable();
        fixed.dedup();
        let mesh = Self { family, coords, connectivity, fixed, corner_a };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.connectivity.len() / self.family.nodes_per_element()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes() * self.dim()
    }

    pub fn n_points(&self) -> usize {
        self.n_elements() * self.family.points_per_element()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let n = self.family.nodes_per_element();
        &self.connectivity[e * n..(e + 1) * n]
    }

    pub fn dof(&self, node: usize, comp: usize) -> usize {
        node * self.dim() + comp
    }

    pub fn fixed_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_dofs()];
        for &(n, c) in &self.fixed {
            m[self.dof(n, c)] = true;
        }
        m
    }

    /// Index checks and positive Jacobian at every quadrature point.
    pub fn validate(&self) -> Result<()> {
        let nen = self.family.nodes_per_element();
        if self.connectivity.len() % nen != 0 {
            return Err(Error::Mesh(format!("connectivity length {} is not a multiple of {nen}", self.connectivity.len())));
        }
        if let Some(&bad) = self.connectivity.iter().find(|&&n| n >= self.n_nodes()) {
            return Err(Error::Mesh(format!("connectivity references node {bad} but the mesh has {} nodes", self.n_nodes())));
        }
        for &(n, c) in &self.fixed {
            if n >= self.n_nodes() || c >= self.dim() {
                return Err(Error::Mesh(format!("constraint ({n}, {c}) out of range")));
            }
        }
        if let Some(a) = self.corner_a {
            if a >= self.n_nodes() {
                return Err(Error::Mesh(format!("corner node {a} out of range")));
            }
        }
        let quad = self.family.quadrature();
        let mut n = vec![0.0; nen];
        let mut dn = vec![[0.0; 3]; nen];
        for e in 0..self.n_elements() {
            for (q, (xi, _)) in quad.iter().enumerate() {
                self.family.shape(*xi, &mut n, &mut dn);
                let det = jacobian(self, e, &dn).1;
                if !(det > 0.0) {
                    return Err(Error::Mesh(format!("element {e}, point {q}: nonpositive Jacobian determinant {det:e}")));
                }
            }
        }
        Ok(())
    }

    /// Volume (area in 2D) by quadrature.
    pub fn measure(&self) -> f64 {
        let nen = self.family.nodes_per_element();
        let quad = self.family.quadrature();
        let mut n = vec![0.0; nen];
        let mut dn = vec![[0.0; 3]; nen];
        let mut total = 0.0;
        for e in 0..self.n_elements() {
            for (xi, w) in &quad {
                self.family.shape(*xi, &mut n, &mut dn);
                total += w * jacobian(self, e, &dn).1;
            }
        }
        total
    }

    pub fn write_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# mohrcoulomb mesh v1");
        let _ = writeln!(s, "family {}", self.family);
        let _ = writeln!(s, "nodes {}", self.n_nodes());
        for p in &self.coords {
            let _ = match self.dim() {
                2 => writeln!(s, "{:e} {:e}", p[0], p[1]),
                _ => writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]),
            };
        }
        let _ = writeln!(s, "elements {}", self.n_elements());
        for e in 0..self.n_elements() {
            let line: Vec<String> = self.element(e).iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        let _ = writeln!(s, "fixed {}", self.fixed.len());
        for (n, c) in &self.fixed {
            let _ = writeln!(s, "{n} {c}");
        }
        if let Some(a) = self.corner_a {
            let _ = writeln!(s, "corner_a {a}");
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).enumerate();
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Mesh(format!("unexpected end of mesh file while reading {what}")));
        let header = |line: (usize, &str), key: &str| -> Result<String> {
            let (i, l) = line;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::Mesh(format!("line {}: expected '{key}'", i + 1)));
            }
            it.next().map(str::to_owned).ok_or_else(|| Error::Mesh(format!("line {}: missing value after '{key}'", i + 1)))
        };
        let count = |v: String, key: &str| v.parse::<usize>().map_err(|_| Error::Mesh(format!("invalid {key} count '{v}'")));
        let family: ElementFamily = header(next("family")?, "family")?.parse()?;
        let dim = family.dim();
        let nn = count(header(next("nodes")?, "nodes")?, "node")?;
        let mut coords = Vec::with_capacity(nn);
        for _ in 0..nn {
            let (i, l) = next("node coordinates")?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Mesh(format!("line {}: bad coordinate '{t}'", i + 1))))
                .collect::<Result<_>>()?;
            if v.len() != dim {
                return Err(Error::Mesh(format!("line {}: expected {dim} coordinates", i + 1)));
            }
            coords.push([v[0], v[1], if dim == 3 { v[2] } else { 0.0 }]);
        }
        let ne = count(header(next("elements")?, "elements")?, "element")?;
        let nen = family.nodes_per_element();
        let mut conn = Vec::with_capacity(ne * nen);
        for _ in 0..ne {
            let (i, l) = next("element connectivity")?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| Error::Mesh(format!("line {}: bad node index '{t}'", i + 1))))
                .collect::<Result<_>>()?;
            if v.len() != nen {
                return Err(Error::Mesh(format!("line {}: expected {nen} node indices", i + 1)));
            }
            conn.extend(v);
        }
        let nf = count(header(next("fixed")?, "fixed")?, "fixed")?;
        let mut fixed = Vec::with_capacity(nf);
        for _ in 0..nf {
            let (i, l) = next("constraint")?;
            let v: Vec<usize> = l.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            if v.len() != 2 {
                return Err(Error::Mesh(format!("line {}: expected 'node component'", i + 1)));
            }
            fixed.push((v[0], v[1]));
        }
        let corner_a = match lines.next() {
            Some(line) => Some(count(header(line, "corner_a")?, "corner_a")?),
            None => None,
        };
        Mesh::new(family, coords, conn, fixed, corner_a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.write_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }
}

/// Physical gradients of the shape functions and the Jacobian determinant.
pub(crate) fn jacobian(mesh: &Mesh, e: usize, dn: &[[f64; 3]]) -> (nalgebra::Matrix3<f64>, f64) {
    let dim = mesh.dim();
    let mut j = nalgebra::Matrix3::<f64>::zeros();
    for (a, &node) in mesh.element(e).iter().enumerate() {
        let x = mesh.coords[node];
        for r in 0..dim {
            for c in 0..dim {
                j[(r, c)] += x[r] * dn[a][c];
            }
        }
    }
    if dim == 2 {
        j[(2, 2)] = 1.0;
    }
    let det = j.determinant();
    (j, det)
}

/// Fractions in `[0, 1]` for `n` cells whose sizes grow geometrically by the
/// total ratio `ratio`; the smallest cell sits at the end if `fine_end`.
fn graded(n: usize, ratio: f64, fine_end: bool) -> Vec<f64> {
    let sizes: Vec<f64> = if n <= 1 || ratio == 1.0 {
        vec![1.0; n]
    } else {
        let q = ratio.powf(1.0 / (n - 1) as f64);
        (0..n).map(|i| q.powi(i as i32)).collect()
    };
    let total: f64 = sizes.iter().sum();
    let mut t = vec![0.0];
    let mut acc = 0.0;
    let ordered: Vec<f64> = if fine_end { sizes.iter().rev().copied().collect() } else { sizes };
    for s in ordered {
        acc += s;
        t.push(acc / total);
    }
    *t.last_mut().unwrap() = 1.0;
    t
}

/// Lattice fraction at half-step index `i` (midpoints of cells for odd `i`).
fn frac(t: &[f64], i: usize) -> f64 {
    if i % 2 == 0 {
        t[i / 2]
    } else {
        0.5 * (t[i / 2] + t[i / 2 + 1])
    }
}

/// Structured slope mesh: a foundation block spanning the full width and a
/// sheared block above it whose left side follows the slope face. 3D meshes
/// extrude the cross-section along `z`. The bottom is fixed, the lateral faces
/// have zero normal displacement.
pub fn build_slope_mesh(geom: &SlopeGeometry, family: ElementFamily, density: MeshDensity) -> Result<Mesh> {
    geom.validate()?;
    if density.refinement < 1 {
        return Err(Error::Mesh("refinement must be at least 1".into()));
    }
    if !(density.grading.is_finite() && density.grading >= 1.0) {
        return Err(Error::Mesh(format!("grading must be >= 1, got {}", density.grading)));
    }
    let h = geom.y2 / density.refinement as f64;
    let cells = |len: f64| ((len / h).round() as usize).max(1);
    let nx1 = cells(geom.x1);
    let nxr = cells(geom.x2 + geom.x3);
    let ny1 = cells(geom.y1);
    let ny2 = density.refinement;
    let nz = if family.dim() == 3 { cells(geom.z) } else { 0 };
    let g = density.grading;
    let tx1 = graded(nx1, g, true);
    let txr = graded(nxr, g, false);
    let ty1 = graded(ny1, g, true);
    let ty2 = graded(ny2, g, false);

    let ni = 2 * (nx1 + nxr) + 1;
    let nj = 2 * (ny1 + ny2) + 1;
    let nk = 2 * nz + 1;
    let (i_toe, j_top_base) = (2 * nx1, 2 * ny1);
    let inside = |i: usize, j: usize| j <= j_top_base || i >= i_toe;
    let position = |i: usize, j: usize, k: usize| -> [f64; 3] {
        let z = if nz > 0 { geom.z * k as f64 / (2 * nz) as f64 } else { 0.0 };
        let right = |y: f64, i: usize| {
            let xs = geom.x1 + geom.x2 * ((y - geom.y1) / geom.y2).max(0.0);
            xs + (geom.width() - xs) * frac(&txr, i - i_toe)
        };
        if j <= j_top_base {
            let y = geom.y1 * frac(&ty1, j);
            let x = if i <= i_toe { geom.x1 * frac(&tx1, i) } else { right(geom.y1, i) };
            [x, y, z]
        } else {
            let y = geom.y1 + geom.y2 * frac(&ty2, j - j_top_base);
            [right(y, i), y, z]
        }
    };
    let quadratic = family.is_quadratic();
    let admissible = |i: usize, j: usize, k: usize| {
        let odd = (i % 2) + (j % 2) + (k % 2);
        if quadratic {
            odd <= 1
        } else {
            odd == 0
        }
    };

    let idx = |i: usize, j: usize, k: usize| (k * nj + j) * ni + i;
    let mut id = vec![usize::MAX; ni * nj * nk];
    let mut coords = Vec::new();
    for k in 0..nk {
        for j in 0..nj {
            for i in 0..ni {
                if inside(i, j) && admissible(i, j, k) {
                    id[idx(i, j, k)] = coords.len();
                    coords.push(position(i, j, k));
                }
            }
        }
    }

    let nen = family.nodes_per_element();
    let refs = family.reference_nodes();
    let mut conn = Vec::new();
    let ks: Vec<usize> = if nz > 0 { (0..nz).collect() } else { vec![0] };
    for &ek in &ks {
        for ej in 0..ny1 + ny2 {
            for ei in 0..nx1 + nxr {
                if ej >= ny1 && ei < nx1 {
                    continue;
                }
                for p in refs.iter().take(nen) {
                    let li = (2 * ei as i64 + 1 + p[0] as i64) as usize;
                    let lj = (2 * ej as i64 + 1 + p[1] as i64) as usize;
                    let lk = if nz > 0 { (2 * ek as i64 + 1 + p[2] as i64) as usize } else { 0 };
                    let n = id[idx(li, lj, lk)];
                    debug_assert_ne!(n, usize::MAX);
                    conn.push(n);
                }
            }
        }
    }

    let mut fixed = Vec::new();
    let dim = family.dim();
    for k in 0..nk {
        for j in 0..nj {
            for i in 0..ni {
                let n = id[idx(i, j, k)];
                if n == usize::MAX {
                    continue;
                }
                if j == 0 {
                    fixed.extend((0..dim).map(|c| (n, c)));
                }
                if i == 0 || i == ni - 1 {
                    fixed.push((n, 0));
                }
                if dim == 3 && (k == 0 || k == nk - 1) {
                    fixed.push((n, 2));
                }
            }
        }
    }
    let corner = id[idx(i_toe, nj - 1, 0)];
    Mesh::new(family, coords, conn, fixed, Some(corner))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_counts_and_area() {
        let g = SlopeGeometry::default();
        for family in ElementFamily::ALL {
            let m = build_slope_mesh(&g, family, MeshDensity { refinement: 2, grading: 1.0 }).unwrap();
            // h = 5: nx1 = 3, nxr = 5, ny1 = ny2 = 2 -> 16 + 10 cells per layer.
            let layers = if family.dim() == 3 { 2 } else { 1 };
            assert_eq!(m.n_elements(), 26 * layers);
            let expect = if family.dim() == 3 { g.area() * g.z } else { g.area() };
            assert!((m.measure() - expect).abs() < 1e-9 * expect, "{family}");
            let a = m.coords[m.corner_a.unwrap()];
            assert_eq!([a[0], a[1], a[2]], g.corner_a());
        }
    }

    #[test]
    fn q2_node_count_formula() {
        // Vertices + edges of the 2D grid.
        let m1 = build_slope_mesh(&SlopeGeometry::default(), ElementFamily::Q1Quad, MeshDensity { refinement: 4, grading: 1.0 }).unwrap();
        let m2 = build_slope_mesh(&SlopeGeometry::default(), ElementFamily::Q2Quad, MeshDensity { refinement: 4, grading: 1.0 }).unwrap();
        let (v, e) = (m1.n_nodes(), m1.n_elements());
        // Euler: edges = V + F - 1 for a simply connected planar mesh.
        assert_eq!(m2.n_nodes(), v + (v + e - 1));
    }

    #[test]
    fn graded_mesh_valid() {
        let m = build_slope_mesh(&SlopeGeometry::default(), ElementFamily::Q2Quad, MeshDensity { refinement: 5, grading: 4.0 }).unwrap();
        let area = SlopeGeometry::default().area();
        assert!((m.measure() - area).abs() < 1e-9 * area);
    }

    #[test]
    fn constraints_tagged() {
        let m = build_slope_mesh(&SlopeGeometry::default(), ElementFamily::Q1Hex, MeshDensity { refinement: 2, grading: 1.0 }).unwrap();
        let mask = m.fixed_mask();
        for (n, p) in m.coords.iter().enumerate() {
            if p[1] == 0.0 {
                assert!(mask[m.dof(n, 0)] && mask[m.dof(n, 1)] && mask[m.dof(n, 2)]);
            }
            if p[0] == 0.0 || p[0] == 40.0 {
                assert!(mask[m.dof(n, 0)]);
            }
            if p[2] == 0.0 || p[2] == 10.0 {
                assert!(mask[m.dof(n, 2)]);
            }
            if p[1] > 0.0 && p[0] > 0.0 && p[0] < 40.0 && p[2] > 0.0 && p[2] < 10.0 {
                assert!(!mask[m.dof(n, 0)] && !mask[m.dof(n, 1)] && !mask[m.dof(n, 2)]);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        for family in ElementFamily::ALL {
            let m = build_slope_mesh(&SlopeGeometry::default(), family, MeshDensity { refinement: 2, grading: 1.5 }).unwrap();
            let back = Mesh::parse_text(&m.write_text()).unwrap();
            assert_eq!(back.connectivity, m.connectivity);
            assert_eq!(back.fixed, m.fixed);
            assert_eq!(back.corner_a, m.corner_a);
            for (a, b) in back.coords.iter().zip(&m.coords) {
                for c in 0..3 {
                    assert_eq!(a[c], b[c]);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_slope_mesh(&SlopeGeometry { y2: 0.0, ..Default::default() }, ElementFamily::Q1Quad, MeshDensity::default()).is_err());
        assert!(build_slope_mesh(&SlopeGeometry::default(), ElementFamily::Q1Quad, MeshDensity { refinement: 0, grading: 1.0 }).is_err());
        assert!(Mesh::parse_text("family q1-quad\nnodes 1\n0 0\nelements 1\n0 0 0 0\nfixed 0\n").is_err());
        let flipped = Mesh::new(
            ElementFamily::Q1Quad,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![0, 3, 2, 1],
            vec![],
            None,
        );
        assert!(flipped.is_err());
    }
}
