//! Isoparametric Lagrange/serendipity elements and Gauss rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementFamily {
    /// 4-node quadrilateral, 2x2 Gauss.
    Q1Quad,
    /// 8-node serendipity quadrilateral, 3x3 Gauss.
    Q2Quad,
    /// 8-node hexahedron, 2x2x2 Gauss.
    Q1Hex,
    /// 20-node serendipity hexahedron, 3x3x3 Gauss.
    Q2Hex,
}

impl ElementFamily {
    pub const ALL: [ElementFamily; 4] = [Self::Q1Quad, Self::Q2Quad, Self::Q1Hex, Self::Q2Hex];

    pub fn dim(self) -> usize {
        match self {
            Self::Q1Quad | Self::Q2Quad => 2,
            Self::Q1Hex | Self::Q2Hex => 3,
        }
    }

    pub fn is_quadratic(self) -> bool {
        matches!(self, Self::Q2Quad | Self::Q2Hex)
    }

    pub fn nodes_per_element(self) -> usize {
        match self {
            Self::Q1Quad => 4,
            Self::Q2Quad => 8,
            Self::Q1Hex => 8,
            Self::Q2Hex => 20,
        }
    }

    /// Gauss points per direction.
    pub fn gauss_order(self) -> usize {
        if self.is_quadratic() {
            3
        } else {
            2
        }
    }

    pub fn points_per_element(self) -> usize {
        self.gauss_order().pow(self.dim() as u32)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Q1Quad => "q1-quad",
            Self::Q2Quad => "q2-quad",
            Self::Q1Hex => "q1-hex",
            Self::Q2Hex => "q2-hex",
        }
    }

    /// Natural coordinates of the element nodes (corners first, then edge midpoints).
    pub fn reference_nodes(self) -> &'static [[f64; 3]] {
        match self {
            Self::Q1Quad => &QUAD_NODES[..4],
            Self::Q2Quad => &QUAD_NODES,
            Self::Q1Hex => &HEX_NODES[..8],
            Self::Q2Hex => &HEX_NODES,
        }
    }

    /// Shape function values and natural derivatives at `xi`.
    pub fn shape(self, xi: [f64; 3], n: &mut [f64], dn: &mut [[f64; 3]]) {
        let nodes = self.reference_nodes();
        for (a, p) in nodes.iter().enumerate() {
            let (v, d) = match self {
                Self::Q1Quad => q1_quad(*p, xi),
                Self::Q2Quad => q2_quad(*p, xi),
                Self::Q1Hex => q1_hex(*p, xi),
                Self::Q2Hex => q2_hex(*p, xi),
            };
            n[a] = v;
            dn[a] = d;
        }
    }

    /// Tensor-product Gauss rule: points and weights.
    pub fn quadrature(self) -> Vec<([f64; 3], f64)> {
        let (x, w) = gauss_1d(self.gauss_order());
        let mut out = Vec::with_capacity(self.points_per_element());
        if self.dim() == 2 {
            for j in 0..x.len() {
                for i in 0..x.len() {
                    out.push(([x[i], x[j], 0.0], w[i] * w[j]));
                }
            }
        } else {
            for k in 0..x.len() {
                for j in 0..x.len() {
                    for i in 0..x.len() {
                        out.push(([x[i], x[j], x[k]], w[i] * w[j] * w[k]));
                    }
                }
            }
        }
        out
    }

    /// VTK legacy cell type.
    pub fn vtk_cell_type(self) -> u8 {
        match self {
            Self::Q1Quad => 9,
            Self::Q2Quad => 23,
            Self::Q1Hex => 12,
            Self::Q2Hex => 25,
        }
    }
}

impl fmt::Display for ElementFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Mesh(format!("unknown element family '{s}' (expected q1-quad, q2-quad, q1-hex or q2-hex)")))
    }
}

const QUAD_NODES: [[f64; 3]; 8] = [
    [-1.0, -1.0, 0.0],
    [1.0, -1.0, 0.0],
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [-1.0, 0.0, 0.0],
];

const HEX_NODES: [[f64; 3]; 20] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
    [0.0, -1.0, -1.0],
    [1.0, 0.0, -1.0],
    [0.0, 1.0, -1.0],
    [-1.0, 0.0, -1.0],
    [0.0, -1.0, 1.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [-1.0, 0.0, 1.0],
    [-1.0, -1.0, 0.0],
    [1.0, -1.0, 0.0],
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
];

pub fn gauss_1d(order: usize) -> (Vec<f64>, Vec<f64>) {
    match order {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => panic!("unsupported Gauss order {order}"),
    }
}

fn q1_quad(p: [f64; 3], x: [f64; 3]) -> (f64, [f64; 3]) {
    let a = 1.0 + p[0] * x[0];
    let b = 1.0 + p[1] * x[1];
    (0.25 * a * b, [0.25 * p[0] * b, 0.25 * a * p[1], 0.0])
}

fn q2_quad(p: [f64; 3], x: [f64; 3]) -> (f64, [f64; 3]) {
    let (xi, eta) = (x[0], x[1]);
    if p[0] != 0.0 && p[1] != 0.0 {
        let a = 1.0 + p[0] * xi;
        let b = 1.0 + p[1] * eta;
        let s = p[0] * xi + p[1] * eta - 1.0;
        (0.25 * a * b * s, [0.25 * p[0] * b * (s + a), 0.25 * p[1] * a * (s + b), 0.0])
    } else if p[0] == 0.0 {
        let b = 1.0 + p[1] * eta;
        (0.5 * (1.0 - xi * xi) * b, [-xi * b, 0.5 * (1.0 - xi * xi) * p[1], 0.0])
    } else {
        let a = 1.0 + p[0] * xi;
        (0.5 * a * (1.0 - eta * eta), [0.5 * p[0] * (1.0 - eta * eta), -eta * a, 0.0])
    }
}

fn q1_hex(p: [f64; 3], x: [f64; 3]) -> (f64, [f64; 3]) {
    let a = 1.0 + p[0] * x[0];
    let b = 1.0 + p[1] * x[1];
    let c = 1.0 + p[2] * x[2];
    (0.125 * a * b * c, [0.125 * p[0] * b * c, 0.125 * a * p[1] * c, 0.125 * a * b * p[2]])
}

fn q2_hex(p: [f64; 3], x: [f64; 3]) -> (f64, [f64; 3]) {
    if p.iter().all(|&v| v != 0.0) {
        let f = [1.0 + p[0] * x[0], 1.0 + p[1] * x[1], 1.0 + p[2] * x[2]];
        let s = p[0] * x[0] + p[1] * x[1] + p[2] * x[2] - 2.0;
        let n = 0.125 * f[0] * f[1] * f[2] * s;
        let d = [
            0.125 * p[0] * f[1] * f[2] * (s + f[0]),
            0.125 * p[1] * f[0] * f[2] * (s + f[1]),
            0.125 * p[2] * f[0] * f[1] * (s + f[2]),
        ];
        return (n, d);
    }
    // Edge node: exactly one natural coordinate is zero.
    let m = p.iter().position(|&v| v == 0.0).expect("edge node");
    let (o1, o2) = ((m + 1) % 3, (m + 2) % 3);
    let q = 1.0 - x[m] * x[m];
    let f1 = 1.0 + p[o1] * x[o1];
    let f2 = 1.0 + p[o2] * x[o2];
    let mut d = [0.0; 3];
    d[m] = -2.0 * x[m] * f1 * f2 * 0.25;
    d[o1] = 0.25 * q * p[o1] * f2;
    d[o2] = 0.25 * q * f1 * p[o2];
    (0.25 * q * f1 * f2, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(f: ElementFamily, x: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let n = f.nodes_per_element();
        let mut v = vec![0.0; n];
        let mut d = vec![[0.0; 3]; n];
        f.shape(x, &mut v, &mut d);
        (v, d)
    }

    #[test]
    fn kronecker_property() {
        for f in ElementFamily::ALL {
            for (a, p) in f.reference_nodes().iter().enumerate() {
                let (v, _) = eval(f, *p);
                for (b, &vb) in v.iter().enumerate() {
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((vb - expect).abs() < 1e-14, "{f} node {a} shape {b}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_derivatives() {
        let pts = [[0.3, -0.2, 0.7], [-0.9, 0.1, -0.4], [0.0, 0.0, 0.0]];
        for f in ElementFamily::ALL {
            for x in pts {
                let x = if f.dim() == 2 { [x[0], x[1], 0.0] } else { x };
                let (v, d) = eval(f, x);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                for c in 0..f.dim() {
                    let s: f64 = d.iter().map(|g| g[c]).sum();
                    assert!(s.abs() < 1e-14);
                    let h = 1e-6;
                    let mut xp = x;
                    let mut xm = x;
                    xp[c] += h;
                    xm[c] -= h;
                    let (vp, _) = eval(f, xp);
                    let (vm, _) = eval(f, xm);
                    for a in 0..v.len() {
                        assert!(((vp[a] - vm[a]) / (2.0 * h) - d[a][c]).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn reproduces_quadratic_fields_when_quadratic() {
        // Serendipity elements interpolate x^2, xy exactly.
        for f in [ElementFamily::Q2Quad, ElementFamily::Q2Hex] {
            let nodes = f.reference_nodes();
            let field = |p: [f64; 3]| p[0] * p[0] + 2.0 * p[0] * p[1] - p[1] + 0.5;
            let (v, _) = eval(f, [0.37, -0.61, 0.2]);
            let interp: f64 = nodes.iter().zip(&v).map(|(p, n)| field(*p) * n).sum();
            assert!((interp - field([0.37, -0.61, 0.2])).abs() < 1e-14);
        }
    }

    #[test]
    fn quadrature_integrates_polynomials() {
        for f in ElementFamily::ALL {
            let q = f.quadrature();
            assert_eq!(q.len(), f.points_per_element());
            let vol: f64 = q.iter().map(|(_, w)| w).sum();
            assert!((vol - 2f64.powi(f.dim() as i32)).abs() < 1e-14);
            let order = 2 * f.gauss_order() - 1;
            let m: f64 = q.iter().map(|(x, w)| w * x[0].powi(order as i32 - 1)).sum();
            let exact = 2.0 / order as f64 * 2f64.powi(f.dim() as i32 - 1);
            assert!((m - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn parses_names() {
        for f in ElementFamily::ALL {
            assert_eq!(f.name().parse::<ElementFamily>().unwrap(), f);
        }
        assert!("q3-quad".parse::<ElementFamily>().is_err());
    }
}
