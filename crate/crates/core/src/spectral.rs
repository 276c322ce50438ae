//! Ordered spectral decomposition of symmetric tensors, eigenprojections and
//! their derivatives, and subdifferential membership for `g = a w1 - b w3`.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tensor_algebra::{d_square, identity4, in_plane_identity, outer, Kind, SymTensor, Tangent4, D3, PS};

/// Default relative tolerance for equal eigenvalues.
pub const TOL_EQ: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Multiplicity {
    /// `w1 > w2 > w3`
    Distinct,
    /// `w1 = w2 > w3`
    TopPair,
    /// `w1 > w2 = w3`
    BottomPair,
    /// `w1 = w2 = w3`
    Triple,
}

impl std::fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Multiplicity::Distinct => "distinct",
            Multiplicity::TopPair => "top-pair",
            Multiplicity::BottomPair => "bottom-pair",
            Multiplicity::Triple => "triple",
        };
        f.write_str(s)
    }
}

/// Eigenprojections available for each multiplicity class. All tensors are
/// stored with true components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projections<const N: usize> {
    Distinct([SymTensor<N>; 3]),
    TopPair { e12: SymTensor<N>, e3: SymTensor<N> },
    BottomPair { e1: SymTensor<N>, e23: SymTensor<N> },
    Triple,
}

/// Eigenprojection derivatives needed for a class.
#[derive(Clone, Debug, PartialEq)]
pub enum Derivatives<const N: usize> {
    Distinct([Tangent4<N>; 3]),
    /// Derivative of `E3`.
    TopPair(Tangent4<N>),
    /// Derivative of `E1`.
    BottomPair(Tangent4<N>),
}

/// Plane-strain data computed in closed form: derivatives of the ordered
/// eigenprojections on the plane-strain subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneData {
    pub derivatives: [Tangent4<PS>; 3],
    /// Which of the closed-form eigenvalues (0, 1 in-plane, 2 out-of-plane) sits in each ordered slot.
    pub order: [usize; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<const N: usize> {
    /// Ordered eigenvalues; values within a cluster are replaced by the cluster mean.
    pub values: [f64; 3],
    pub class: Multiplicity,
    pub projections: Projections<N>,
    /// The decomposed tensor (true components).
    pub tensor: Matrix3<f64>,
    pub plane: Option<PlaneData>,
}

impl<const N: usize> Spectrum<N> {
    pub fn e1(&self) -> Option<SymTensor<N>> {
        match &self.projections {
            Projections::Distinct(e) => Some(e[0]),
            Projections::BottomPair { e1, .. } => Some(*e1),
            _ => None,
        }
    }

    pub fn e2(&self) -> Option<SymTensor<N>> {
        match &self.projections {
            Projections::Distinct(e) => Some(e[1]),
            _ => None,
        }
    }

    pub fn e3(&self) -> Option<SymTensor<N>> {
        match &self.projections {
            Projections::Distinct(e) => Some(e[2]),
            Projections::TopPair { e3, .. } => Some(*e3),
            _ => None,
        }
    }

    pub fn e12(&self) -> Option<SymTensor<N>> {
        match &self.projections {
            Projections::Distinct(e) => Some(e[0] + e[1]),
            Projections::TopPair { e12, .. } => Some(*e12),
            _ => None,
        }
    }

    pub fn e23(&self) -> Option<SymTensor<N>> {
        match &self.projections {
            Projections::Distinct(e) => Some(e[1] + e[2]),
            Projections::BottomPair { e23, .. } => Some(*e23),
            _ => None,
        }
    }

    /// `sum_i w_i E_i` over the available projections.
    pub fn reconstruct(&self) -> SymTensor<N> {
        let v = self.values;
        match &self.projections {
            Projections::Distinct(e) => e[0] * v[0] + e[1] * v[1] + e[2] * v[2],
            Projections::TopPair { e12, e3 } => *e12 * v[0] + *e3 * v[2],
            Projections::BottomPair { e1, e23 } => *e1 * v[0] + *e23 * v[2],
            Projections::Triple => SymTensor::identity(Kind::Stress) * v[0],
        }
    }

    /// Projections listed for the class, summing to the identity.
    pub fn projection_list(&self) -> Vec<SymTensor<N>> {
        match &self.projections {
            Projections::Distinct(e) => e.to_vec(),
            Projections::TopPair { e12, e3 } => vec![*e12, *e3],
            Projections::BottomPair { e1, e23 } => vec![*e1, *e23],
            Projections::Triple => vec![SymTensor::identity(Kind::Stress)],
        }
    }

    /// Eigenprojection derivatives for the class of this spectrum.
    pub fn derivatives(&self) -> Result<Derivatives<N>> {
        let eta = SymTensor::<N>::from_matrix(&self.tensor, Kind::Stress);
        eigenprojection_derivatives(self, &eta)
    }
}

fn classify(v: [f64; 3], tol: f64) -> Multiplicity {
    let top = v[0] - v[1] <= tol;
    let bottom = v[1] - v[2] <= tol;
    match (top, bottom) {
        (false, false) => Multiplicity::Distinct,
        (true, false) => Multiplicity::TopPair,
        (false, true) => Multiplicity::BottomPair,
        (true, true) => Multiplicity::Triple,
    }
}

fn snap(v: [f64; 3], class: Multiplicity) -> [f64; 3] {
    match class {
        Multiplicity::Distinct => v,
        Multiplicity::TopPair => {
            let m = 0.5 * (v[0] + v[1]);
            [m, m, v[2]]
        }
        Multiplicity::BottomPair => {
            let m = 0.5 * (v[1] + v[2]);
            [v[0], m, m]
        }
        Multiplicity::Triple => {
            let m = (v[0] + v[1] + v[2]) / 3.0;
            [m, m, m]
        }
    }
}

/// Eigenvalues of a symmetric 3x3 matrix in descending order.
///
/// Uses the trigonometric solution of the characteristic cubic and falls back
/// to an iterative symmetric eigensolver when two roots are close.
pub fn eigenvalues_sym3(m: &Matrix3<f64>) -> [f64; 3] {
    let mean = m.trace() / 3.0;
    let b = m - Matrix3::identity() * mean;
    let p2 = b.component_mul(&b).sum() / 6.0;
    if p2 <= 0.0 {
        return [mean; 3];
    }
    let p = p2.sqrt();
    let r = (b.determinant() / (2.0 * p * p2)).clamp(-1.0, 1.0);
    let t = r.acos() / 3.0;
    let l1 = mean + 2.0 * p * t.cos();
    let l3 = mean + 2.0 * p * (t + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let l2 = 3.0 * mean - l1 - l3;
    let mut v = [l1, l2, l3];
    v.sort_by(|a, b| b.total_cmp(a));
    let gap = (v[0] - v[1]).min(v[1] - v[2]);
    if gap < 1e-3 * p {
        let eig = SymmetricEigen::new(*m);
        v = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        v.sort_by(|a, b| b.total_cmp(a));
    }
    v
}

fn proj_pair(eta: &Matrix3<f64>, a: f64, b: f64, denom: f64) -> Matrix3<f64> {
    let i = Matrix3::identity();
    ((eta - i * a) * (eta - i * b)) / denom
}

/// Ordered spectral decomposition of a symmetric tensor.
pub fn eigen_decompose<const N: usize>(eta: &SymTensor<N>, tol_eq: f64) -> Result<Spectrum<N>> {
    if !eta.is_finite() {
        return Err(Error::NonFinite("tensor passed to eigen_decompose"));
    }
    if !(tol_eq > 0.0 && tol_eq <= 1e-4) {
        return Err(Error::param("tol_eq", format!("must lie in (0, 1e-4], got {tol_eq}")));
    }
    let m = eta.to_matrix();
    let raw = eigenvalues_sym3(&m);
    let tol = tol_eq * (1.0 + eta.norm());
    let class = classify(raw, tol);
    let v = snap(raw, class);
    let st = |x: Matrix3<f64>| SymTensor::<N>::from_matrix(&x, Kind::Stress);
    let i = Matrix3::identity();
    let projections = match class {
        Multiplicity::Distinct => {
            let e1 = proj_pair(&m, v[1], v[2], (v[0] - v[1]) * (v[0] - v[2]));
            let e3 = proj_pair(&m, v[0], v[1], (v[2] - v[0]) * (v[2] - v[1]));
            let e2 = i - e1 - e3;
            Projections::Distinct([st(e1), st(e2), st(e3)])
        }
        Multiplicity::TopPair => {
            let e3 = proj_pair(&m, v[0], v[0], (v[2] - v[0]).powi(2));
            Projections::TopPair { e12: st(i - e3), e3: st(e3) }
        }
        Multiplicity::BottomPair => {
            let e1 = proj_pair(&m, v[2], v[2], (v[0] - v[2]).powi(2));
            Projections::BottomPair { e1: st(e1), e23: st(i - e1) }
        }
        Multiplicity::Triple => Projections::Triple,
    };
    Ok(Spectrum { values: v, class, projections, tensor: m, plane: None })
}

/// Plane-strain spectrum: closed-form in-plane eigenpairs plus the
/// out-of-plane value, merged into the global descending order.
pub fn plane_strain_spectrum(eta: &SymTensor<PS>, tol_eq: f64) -> Result<Spectrum<PS>> {
    if !eta.is_finite() {
        return Err(Error::NonFinite("tensor passed to plane_strain_spectrum"));
    }
    if !(tol_eq > 0.0 && tol_eq <= 1e-4) {
        return Err(Error::param("tol_eq", format!("must lie in (0, 1e-4], got {tol_eq}")));
    }
    let m = eta.to_matrix();
    let (a, b, c, z) = (m[(0, 0)], m[(1, 1)], m[(0, 1)], m[(2, 2)]);
    let tol = tol_eq * (1.0 + eta.norm());
    let root = ((a - b).powi(2) + 4.0 * c * c).sqrt();
    let mut t = [0.5 * (a + b + root), 0.5 * (a + b - root), z];

    let st = |x: Matrix3<f64>| SymTensor::<PS>::from_matrix(&x, Kind::Stress);
    let mut i_t = Matrix3::zeros();
    i_t[(0, 0)] = 1.0;
    i_t[(1, 1)] = 1.0;
    let mut e3_t = Matrix3::zeros();
    e3_t[(2, 2)] = 1.0;
    let mut eta_t = m;
    eta_t[(2, 2)] = 0.0;

    let zero4 = Tangent4::<PS>::zeros();
    let (pe1, pe2, pd1) = if t[0] - t[1] > tol {
        let e1 = st((eta_t - i_t * t[1]) / (t[0] - t[1]));
        let e2 = st(i_t) - e1;
        let d1 = (in_plane_identity::<PS>() - outer(&e1, &e1) - outer(&e2, &e2)) / (t[0] - t[1]);
        (e1, e2, d1)
    } else {
        let mean = 0.5 * (t[0] + t[1]);
        t[0] = mean;
        t[1] = mean;
        (st(i_t), SymTensor::zeros(Kind::Stress), zero4)
    };
    let proj_t = [pe1, pe2, st(e3_t)];
    let der_t = [pd1, -pd1, zero4];

    let order = if t[2] >= t[0] {
        [2, 0, 1]
    } else if t[2] >= t[1] {
        [0, 2, 1]
    } else {
        [0, 1, 2]
    };
    let raw = [t[order[0]], t[order[1]], t[order[2]]];
    let class = classify(raw, tol);
    let v = snap(raw, class);
    let p = [proj_t[order[0]], proj_t[order[1]], proj_t[order[2]]];
    let d = [der_t[order[0]], der_t[order[1]], der_t[order[2]]];
    let projections = match class {
        Multiplicity::Distinct => Projections::Distinct(p),
        Multiplicity::TopPair => Projections::TopPair { e12: p[0] + p[1], e3: p[2] },
        Multiplicity::BottomPair => Projections::BottomPair { e1: p[0], e23: p[1] + p[2] },
        Multiplicity::Triple => Projections::Triple,
    };
    Ok(Spectrum { values: v, class, projections, tensor: m, plane: Some(PlaneData { derivatives: d, order }) })
}

/// Spectrum in the native layout: closed-form plane-strain machinery for
/// the 4-slot layout, general 3D decomposition otherwise.
pub fn spectrum<const N: usize>(eta: &SymTensor<N>, tol_eq: f64) -> Result<Spectrum<N>> {
    if N == PS {
        let ps = SymTensor::<PS>::from_slice(eta.as_slice(), eta.kind());
        let s = plane_strain_spectrum(&ps, tol_eq)?;
        Ok(cast_spectrum(s))
    } else {
        eigen_decompose(eta, tol_eq)
    }
}

fn cast_spectrum<const M: usize, const N: usize>(s: Spectrum<M>) -> Spectrum<N> {
    assert_eq!(M, N);
    let c = |t: SymTensor<M>| SymTensor::<N>::from_slice(t.as_slice(), t.kind());
    let projections = match s.projections {
        Projections::Distinct(e) => Projections::Distinct([c(e[0]), c(e[1]), c(e[2])]),
        Projections::TopPair { e12, e3 } => Projections::TopPair { e12: c(e12), e3: c(e3) },
        Projections::BottomPair { e1, e23 } => Projections::BottomPair { e1: c(e1), e23: c(e23) },
        Projections::Triple => Projections::Triple,
    };
    Spectrum { values: s.values, class: s.class, projections, tensor: s.tensor, plane: s.plane }
}

fn cast_matrix<const N: usize>(m: &Tangent4<PS>) -> Tangent4<N> {
    Tangent4::<N>::from_column_slice(m.as_slice())
}

/// Derivative of `E_i` for distinct eigenvalues.
pub fn distinct_derivative<const N: usize>(
    eta: &SymTensor<N>,
    v: [f64; 3],
    e: &[SymTensor<N>; 3],
    i: usize,
) -> Tangent4<N> {
    let (j, k) = match i {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let m = eta.to_matrix();
    let num = d_square::<N>(&m)
        - (v[j] + v[k]) * identity4::<N>()
        - (2.0 * v[i] - v[j] - v[k]) * outer(&e[i], &e[i])
        - (v[j] - v[k]) * (outer(&e[j], &e[j]) - outer(&e[k], &e[k]));
    num / ((v[i] - v[j]) * (v[i] - v[k]))
}

/// Derivative of `E3`, valid for `w1 >= w2 > w3`.
pub fn e3_derivative<const N: usize>(eta: &SymTensor<N>, v: [f64; 3], e12: &SymTensor<N>, e3: &SymTensor<N>) -> Tangent4<N> {
    let m = eta.to_matrix();
    let et = SymTensor::<N>::from_matrix(&m, Kind::Stress);
    let s = v[0] + v[1];
    let num = d_square::<N>(&m) - s * identity4::<N>() - (outer(&et, e12) + outer(e12, &et))
        + s * outer(e12, e12)
        + (s - 2.0 * v[2]) * outer(e3, e3)
        + v[2] * (outer(e12, e3) + outer(e3, e12));
    num / ((v[2] - v[0]) * (v[2] - v[1]))
}

/// Derivative of `E1`, valid for `w1 > w2 >= w3`.
pub fn e1_derivative<const N: usize>(eta: &SymTensor<N>, v: [f64; 3], e1: &SymTensor<N>, e23: &SymTensor<N>) -> Tangent4<N> {
    let m = eta.to_matrix();
    let et = SymTensor::<N>::from_matrix(&m, Kind::Stress);
    let s = v[1] + v[2];
    let num = d_square::<N>(&m) - s * identity4::<N>() - (outer(&et, e23) + outer(e23, &et))
        + s * outer(e23, e23)
        + (s - 2.0 * v[0]) * outer(e1, e1)
        + v[0] * (outer(e23, e1) + outer(e1, e23));
    num / ((v[0] - v[1]) * (v[0] - v[2]))
}

/// Eigenprojection derivatives required for the class of `spec`.
pub fn eigenprojection_derivatives<const N: usize>(spec: &Spectrum<N>, eta: &SymTensor<N>) -> Result<Derivatives<N>> {
    if let Some(plane) = &spec.plane {
        let d = &plane.derivatives;
        return match spec.class {
            Multiplicity::Distinct => Ok(Derivatives::Distinct([cast_matrix(&d[0]), cast_matrix(&d[1]), cast_matrix(&d[2])])),
            Multiplicity::TopPair => Ok(Derivatives::TopPair(cast_matrix(&d[2]))),
            Multiplicity::BottomPair => Ok(Derivatives::BottomPair(cast_matrix(&d[0]))),
            Multiplicity::Triple => Err(Error::TripleEigenvalue),
        };
    }
    debug_assert_eq!(N, D3);
    let v = spec.values;
    match &spec.projections {
        Projections::Distinct(e) => Ok(Derivatives::Distinct([
            distinct_derivative(eta, v, e, 0),
            distinct_derivative(eta, v, e, 1),
            distinct_derivative(eta, v, e, 2),
        ])),
        Projections::TopPair { e12, e3 } => Ok(Derivatives::TopPair(e3_derivative(eta, v, e12, e3))),
        Projections::BottomPair { e1, e23 } => Ok(Derivatives::BottomPair(e1_derivative(eta, v, e1, e23))),
        Projections::Triple => Err(Error::TripleEigenvalue),
    }
}

/// `g(eta) = a w1(eta) - b w3(eta)`.
pub fn g_value(eta: &Matrix3<f64>, a: f64, b: f64) -> f64 {
    let v = eigenvalues_sym3(eta);
    a * v[0] - b * v[2]
}

/// An element of the subdifferential of `g = a w1 - b w3` at `eta`, built
/// from the eigenprojections of each multiplicity class.
pub fn subgradient<const N: usize>(eta: &SymTensor<N>, a: f64, b: f64, tol_eq: f64) -> Result<SymTensor<N>> {
    let s = spectrum(eta, tol_eq)?;
    Ok(match &s.projections {
        Projections::Distinct(e) => e[0] * a - e[2] * b,
        Projections::TopPair { e12, e3 } => *e12 * (0.5 * a) - *e3 * b,
        Projections::BottomPair { e1, e23 } => *e1 * a - *e23 * (0.5 * b),
        Projections::Triple => SymTensor::identity(Kind::Stress) * ((a - b) / 3.0),
    })
}

/// Whether `nu` lies in the subdifferential of `g = a w1 - b w3` at `eta`:
/// `nu` and `eta` share an ordered eigenbasis, `a >= n1 >= n2 >= n3 >= -b`,
/// `n1 + n2 + n3 = a - b`, `(n1 - a)(e1 - e2) = 0` and `(n3 + b)(e2 - e3) = 0`.
pub fn subdifferential_contains<const N: usize>(eta: &SymTensor<N>, nu: &SymTensor<N>, a: f64, b: f64, tol: f64) -> bool {
    if a < 0.0 || b < 0.0 || !eta.is_finite() || !nu.is_finite() {
        return false;
    }
    let em = eta.to_matrix();
    let nm = nu.to_matrix();
    let s_eta = em.norm().max(f64::MIN_POSITIVE);
    let s_nu = 1.0 + a + b;
    let e = eigenvalues_sym3(&em);
    let n = eigenvalues_sym3(&nm);

    let comm = em * nm - nm * em;
    if comm.norm() > tol * s_eta * s_nu {
        return false;
    }
    // Simultaneous ordered diagonalisation: equality in von Neumann's trace inequality.
    let inner = em.component_mul(&nm).sum();
    let ordered = n[0] * e[0] + n[1] * e[1] + n[2] * e[2];
    if (ordered - inner).abs() > tol * s_eta * s_nu {
        return false;
    }
    let t = tol * s_nu;
    if n[0] > a + t || n[2] < -b - t {
        return false;
    }
    if ((n[0] + n[1] + n[2]) - (a - b)).abs() > t {
        return false;
    }
    if ((n[0] - a) * (e[0] - e[1])).abs() > tol * s_nu * s_eta {
        return false;
    }
    if ((n[2] + b) * (e[1] - e[2])).abs() > tol * s_nu * s_eta {
        return false;
    }
    true
}
