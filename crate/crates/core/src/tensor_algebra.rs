//! Voigt encoding of symmetric second-order tensors and the matrix
//! representation of fourth-order tensors acting on them.
//!
//! Stress-like vectors store the true components. Strain-like vectors double
//! the shear entries, so that `t . n = tau : eta` and a fourth-order tensor
//! becomes a plain matrix acting on strain-like vectors.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, SMatrix, SVector};

use crate::error::{Error, Result};

/// Voigt size of the 3D encoding.
pub const D3: usize = 6;
/// Voigt size of the plane-strain encoding.
pub const PS: usize = 4;

const PAIRS_3D: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];
const PAIRS_PS: [(usize, usize); 4] = [(0, 0), (1, 1), (0, 1), (2, 2)];

/// Tensor index pairs of each Voigt slot: `(11,22,33,12,23,13)` in 3D,
/// `(11,22,12,33)` in plane strain.
pub fn voigt_pairs<const N: usize>() -> &'static [(usize, usize)] {
    match N {
        D3 => &PAIRS_3D,
        PS => &PAIRS_PS,
        _ => panic!("unsupported Voigt size {N}"),
    }
}

/// Whether slot `a` holds an off-diagonal component.
#[inline]
pub fn is_shear<const N: usize>(a: usize) -> bool {
    let (i, j) = voigt_pairs::<N>()[a];
    i != j
}

/// Slot of component `(i, j)`, if it is represented.
pub fn voigt_slot<const N: usize>(i: usize, j: usize) -> Option<usize> {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    voigt_pairs::<N>().iter().position(|&p| p == (i, j))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Stress,
    Strain,
}

/// Symmetric second-order tensor in Voigt form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor<const N: usize> {
    v: SVector<f64, N>,
    kind: Kind,
}

pub type SymTensor3 = SymTensor<D3>;
pub type SymTensorPS = SymTensor<PS>;

/// Matrix of a fourth-order tensor acting on strain-like vectors and
/// returning stress-like vectors.
pub type Tangent4<const N: usize> = SMatrix<f64, N, N>;
pub type Tangent4x3 = Tangent4<D3>;
pub type Tangent4PS = Tangent4<PS>;

impl<const N: usize> SymTensor<N> {
    pub fn new(v: SVector<f64, N>, kind: Kind) -> Self {
        Self { v, kind }
    }

    pub fn from_slice(s: &[f64], kind: Kind) -> Self {
        Self { v: SVector::from_column_slice(s), kind }
    }

    pub fn zeros(kind: Kind) -> Self {
        Self { v: SVector::zeros(), kind }
    }

    pub fn identity(kind: Kind) -> Self {
        let mut v = SVector::zeros();
        for (a, &(i, j)) in voigt_pairs::<N>().iter().enumerate() {
            if i == j {
                v[a] = 1.0;
            }
        }
        Self { v, kind }
    }

    /// Encode a symmetric matrix. Components outside the encoding are dropped.
    pub fn from_matrix(m: &Matrix3<f64>, kind: Kind) -> Self {
        let mut v = SVector::zeros();
        for (a, &(i, j)) in voigt_pairs::<N>().iter().enumerate() {
            let t = 0.5 * (m[(i, j)] + m[(j, i)]);
            v[a] = if i != j && kind == Kind::Strain { 2.0 * t } else { t };
        }
        Self { v, kind }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for (a, &(i, j)) in voigt_pairs::<N>().iter().enumerate() {
            let t = if i != j && self.kind == Kind::Strain { 0.5 * self.v[a] } else { self.v[a] };
            m[(i, j)] = t;
            m[(j, i)] = t;
        }
        m
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// The Voigt vector as stored.
    pub fn vector(&self) -> &SVector<f64, N> {
        &self.v
    }

    pub fn as_slice(&self) -> &[f64] {
        self.v.as_slice()
    }

    /// Same tensor re-encoded with another kind.
    pub fn to_kind(&self, kind: Kind) -> Self {
        if kind == self.kind {
            return *self;
        }
        let f = if kind == Kind::Strain { 2.0 } else { 0.5 };
        let mut v = self.v;
        for a in 0..N {
            if is_shear::<N>(a) {
                v[a] *= f;
            }
        }
        Self { v, kind }
    }

    /// Stress-like vector of this tensor (true components).
    pub fn stress_vector(&self) -> SVector<f64, N> {
        self.to_kind(Kind::Stress).v
    }

    /// Strain-like vector of this tensor (doubled shear).
    pub fn strain_vector(&self) -> SVector<f64, N> {
        self.to_kind(Kind::Strain).v
    }

    /// Biscalar product `self : other` regardless of encodings.
    pub fn contract(&self, other: &Self) -> f64 {
        let w = match (self.kind, other.kind) {
            (Kind::Stress, Kind::Stress) => 2.0,
            (Kind::Strain, Kind::Strain) => 0.5,
            _ => 1.0,
        };
        (0..N).map(|a| if is_shear::<N>(a) { w * self.v[a] * other.v[a] } else { self.v[a] * other.v[a] }).sum()
    }

    pub fn trace(&self) -> f64 {
        voigt_pairs::<N>().iter().enumerate().filter(|(_, &(i, j))| i == j).map(|(a, _)| self.v[a]).sum()
    }

    /// Frobenius norm of the represented tensor.
    pub fn norm(&self) -> f64 {
        self.contract(self).max(0.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|x| x.is_finite())
    }

    /// Embed or restrict into another Voigt layout through the full matrix.
    pub fn convert<const M: usize>(&self) -> SymTensor<M> {
        SymTensor::<M>::from_matrix(&self.to_matrix(), self.kind)
    }
}

impl<const N: usize> Add for SymTensor<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let rhs = rhs.to_kind(self.kind);
        Self { v: self.v + rhs.v, kind: self.kind }
    }
}

impl<const N: usize> Sub for SymTensor<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let rhs = rhs.to_kind(self.kind);
        Self { v: self.v - rhs.v, kind: self.kind }
    }
}

impl<const N: usize> AddAssign for SymTensor<N> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> SubAssign for SymTensor<N> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const N: usize> Mul<f64> for SymTensor<N> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self { v: self.v * s, kind: self.kind }
    }
}

impl<const N: usize> Mul<SymTensor<N>> for f64 {
    type Output = SymTensor<N>;
    fn mul(self, t: SymTensor<N>) -> SymTensor<N> {
        t * self
    }
}

impl<const N: usize> Neg for SymTensor<N> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { v: -self.v, kind: self.kind }
    }
}

/// Fourth-order tensor with all 81 components, `c[i][j][k][l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    pub c: [[[[f64; 3]; 3]; 3]; 3],
}

impl Tensor4 {
    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut c = [[[[0.0; 3]; 3]; 3]; 3];
        for (i, ci) in c.iter_mut().enumerate() {
            for (j, cij) in ci.iter_mut().enumerate() {
                for (k, cijk) in cij.iter_mut().enumerate() {
                    for (l, x) in cijk.iter_mut().enumerate() {
                        *x = f(i, j, k, l);
                    }
                }
            }
        }
        Self { c }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.c[i][j][k][l]
    }

    /// Minor symmetry `C_ijmn + C_ijnm = C_jimn + C_jinm` up to a relative tolerance.
    pub fn has_minor_symmetry(&self, rel_tol: f64) -> bool {
        let scale = self.c.iter().flatten().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..3 {
            for j in 0..3 {
                for m in 0..3 {
                    for n in 0..3 {
                        let lhs = self.c[i][j][m][n] + self.c[i][j][n][m];
                        let rhs = self.c[j][i][m][n] + self.c[j][i][n][m];
                        if (lhs - rhs).abs() > rel_tol * scale.max(f64::MIN_POSITIVE) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// `eta : C : eps` with full index contraction.
    pub fn double_contract(&self, eta: &Matrix3<f64>, eps: &Matrix3<f64>) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        s += eta[(i, j)] * self.c[i][j][k][l] * eps[(k, l)];
                    }
                }
            }
        }
        s
    }
}

/// Matrix whose entry for slots `a = (i,j)`, `b = (k,l)` is `C_ijkk` when
/// `k == l` and `(C_ijkl + C_ijlk) / 2` otherwise.
pub fn matrix_from_fn<const N: usize>(c: impl Fn(usize, usize, usize, usize) -> f64) -> Tangent4<N> {
    let pairs = voigt_pairs::<N>();
    let mut m = Tangent4::<N>::zeros();
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for (b, &(k, l)) in pairs.iter().enumerate() {
            m[(a, b)] = if k == l { c(i, j, k, k) } else { 0.5 * (c(i, j, k, l) + c(i, j, l, k)) };
        }
    }
    m
}

/// Matrix representation of a fourth-order tensor satisfying the minor
/// symmetry condition.
pub fn fourth_to_matrix<const N: usize>(c: &Tensor4) -> Tangent4<N> {
    debug_assert!(c.has_minor_symmetry(1e-10), "fourth-order tensor violates minor symmetry");
    matrix_from_fn::<N>(|i, j, k, l| c.get(i, j, k, l))
}

/// `(A (x) B) : eps = A (B : eps)`, i.e. `a b^T` on stress-like vectors.
pub fn outer<const N: usize>(a: &SymTensor<N>, b: &SymTensor<N>) -> Tangent4<N> {
    a.stress_vector() * b.stress_vector().transpose()
}

/// Matrix of the fourth-order identity `delta_ik delta_jl`.
pub fn identity4<const N: usize>() -> Tangent4<N> {
    let mut m = Tangent4::<N>::zeros();
    for a in 0..N {
        m[(a, a)] = if is_shear::<N>(a) { 0.5 } else { 1.0 };
    }
    m
}

/// Matrix of the in-plane identity: `delta_ik delta_jl` for `i,j,k,l` in {1,2}, zero otherwise.
pub fn in_plane_identity<const N: usize>() -> Tangent4<N> {
    matrix_from_fn::<N>(|i, j, k, l| if i < 2 && j < 2 && i == k && j == l { 1.0 } else { 0.0 })
}

/// Matrix of `D(eta^2)` with components `delta_ik eta_lj + delta_jl eta_ik`.
pub fn d_square<const N: usize>(eta: &Matrix3<f64>) -> Tangent4<N> {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    matrix_from_fn::<N>(|i, j, k, l| d(i, k) * eta[(l, j)] + d(j, l) * eta[(i, k)])
}

/// Apply a tangent matrix to a strain-like tensor.
pub fn apply<const N: usize>(c: &Tangent4<N>, e: &SymTensor<N>) -> SymTensor<N> {
    SymTensor::new(c * e.strain_vector(), Kind::Stress)
}

/// Lame's first parameter `(3K - 2G)/3`.
#[inline]
pub fn lame_lambda(k: f64, g: f64) -> f64 {
    (3.0 * k - 2.0 * g) / 3.0
}

fn check_moduli(k: f64, g: f64) -> Result<()> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::param("K", format!("bulk modulus must be positive, got {k}")));
    }
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::param("G", format!("shear modulus must be positive, got {g}")));
    }
    Ok(())
}

/// Isotropic elastic stiffness `lambda I (x) I + 2G II`.
pub fn elastic_stiffness<const N: usize>(k: f64, g: f64) -> Result<Tangent4<N>> {
    check_moduli(k, g)?;
    let i = SymTensor::<N>::identity(Kind::Stress);
    Ok(lame_lambda(k, g) * outer(&i, &i) + 2.0 * g * identity4::<N>())
}

/// Inverse of the isotropic stiffness: maps stress-like vectors to
/// strain-like vectors.
pub fn elastic_compliance<const N: usize>(k: f64, g: f64) -> Result<Tangent4<N>> {
    check_moduli(k, g)?;
    let i = SymTensor::<N>::identity(Kind::Stress);
    let mut c = (1.0 / (9.0 * k) - 1.0 / (6.0 * g)) * i.vector() * i.vector().transpose();
    for a in 0..N {
        c[(a, a)] += if is_shear::<N>(a) { 1.0 / g } else { 1.0 / (2.0 * g) };
    }
    Ok(c)
}

/// Strain from stress through the isotropic compliance.
pub fn apply_compliance<const N: usize>(k: f64, g: f64, sigma: &SymTensor<N>) -> SymTensor<N> {
    let s = sigma.to_kind(Kind::Stress);
    let p = s.trace() / 3.0;
    let dev = s - SymTensor::<N>::identity(Kind::Stress) * p;
    let eps = SymTensor::<N>::identity(Kind::Stress) * (s.trace() / (9.0 * k)) + dev * (1.0 / (2.0 * g));
    eps.to_kind(Kind::Strain)
}

/// Young's modulus and Poisson ratio to bulk and shear moduli.
pub fn moduli_from_young(e: f64, nu: f64) -> Result<(f64, f64)> {
    if !(e.is_finite() && e > 0.0) {
        return Err(Error::param("E", format!("Young's modulus must be positive, got {e}")));
    }
    if !(nu.is_finite() && nu > -1.0 && nu < 0.5) {
        return Err(Error::param("nu", format!("Poisson ratio must lie in (-1, 0.5), got {nu}")));
    }
    Ok((e / (3.0 * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu))))
}

/// Rows/columns of a plane-strain matrix inside the 3D layout.
pub fn ps_in_3d() -> [usize; 4] {
    [0, 1, 3, 2]
}

/// Restriction of a 3D matrix to the plane-strain slots.
pub fn restrict_to_ps(c: &Tangent4x3) -> Tangent4PS {
    let idx = ps_in_3d();
    Tangent4PS::from_fn(|a, b| c[(idx[a], idx[b])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut impl Rng) -> Matrix3<f64> {
        let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a + a.transpose()
    }

    fn random_minor_symmetric(rng: &mut impl Rng) -> Tensor4 {
        // Symmetrise the output index pair; input pair stays general.
        let vals: Vec<f64> = (0..81).map(|_| rng.random_range(-1.0..1.0)).collect();
        let raw = Tensor4::from_fn(|i, j, k, l| vals[27 * i + 9 * j + 3 * k + l]);
        Tensor4::from_fn(|i, j, k, l| 0.5 * (raw.get(i, j, k, l) + raw.get(j, i, k, l)))
    }

    #[test]
    fn identity_maps_to_half_shear_diagonal() {
        let ii = Tensor4::from_fn(|i, j, k, l| ((i == k) && (j == l)) as u8 as f64);
        let m = fourth_to_matrix::<6>(&ii);
        let expected = Tangent4x3::from_diagonal(&SVector::from([1.0, 1.0, 1.0, 0.5, 0.5, 0.5]));
        assert_eq!(m, expected);
        assert_eq!(identity4::<6>(), expected);
        assert_eq!(fourth_to_matrix::<4>(&ii), Tangent4PS::from_diagonal(&SVector::from([1.0, 1.0, 0.5, 1.0])));
    }

    #[test]
    fn outer_product_layout() {
        let tau = Matrix3::new(1.0, 4.0, 6.0, 4.0, 2.0, 5.0, 6.0, 5.0, 3.0);
        let sig = Matrix3::new(-1.0, 0.5, 0.25, 0.5, 7.0, -2.0, 0.25, -2.0, 3.0);
        let c = Tensor4::from_fn(|i, j, k, l| tau[(i, j)] * sig[(k, l)]);
        let t = SymTensor3::from_matrix(&tau, Kind::Stress);
        let s = SymTensor3::from_matrix(&sig, Kind::Stress);
        let m = fourth_to_matrix::<6>(&c);
        assert!((m - t.vector() * s.vector().transpose()).abs().max() < 1e-15);
        assert!((outer(&t, &s) - m).abs().max() < 1e-15);
    }

    #[test]
    fn d_square_diagonal_eta() {
        let eta = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 2.0, 3.0));
        let m = d_square::<6>(&eta);
        let diag = [2.0, 4.0, 6.0, 1.5, 2.5, 2.0];
        for a in 0..6 {
            for b in 0..6 {
                let e = if a == b { diag[a] } else { 0.0 };
                assert_eq!(m[(a, b)], e, "entry ({a},{b})");
            }
        }
    }

    #[test]
    fn d_square_matches_displayed_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_sym(&mut rng);
        let m = d_square::<6>(&e);
        let (e11, e22, e33, e12, e23, e13) = (e[(0, 0)], e[(1, 1)], e[(2, 2)], e[(0, 1)], e[(1, 2)], e[(0, 2)]);
        #[rustfmt::skip]
        let expected = Tangent4x3::from_row_slice(&[
            2.0 * e11, 0.0, 0.0, e12, 0.0, e13,
            0.0, 2.0 * e22, 0.0, e12, e23, 0.0,
            0.0, 0.0, 2.0 * e33, 0.0, e23, e13,
            e12, e12, 0.0, 0.5 * (e11 + e22), 0.5 * e13, 0.5 * e23,
            0.0, e23, e23, 0.5 * e13, 0.5 * (e22 + e33), 0.5 * e12,
            e13, 0.0, e13, 0.5 * e23, 0.5 * e12, 0.5 * (e11 + e33),
        ]);
        assert!((m - expected).abs().max() < 1e-15);
    }

    #[test]
    fn biscalar_product_equals_dot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = random_sym(&mut rng);
            let b = random_sym(&mut rng);
            let t = SymTensor3::from_matrix(&a, Kind::Stress);
            let n = SymTensor3::from_matrix(&b, Kind::Strain);
            let exact = a.component_mul(&b).sum();
            assert!((t.vector().dot(n.vector()) - exact).abs() < 1e-13);
            assert!((t.contract(&n) - exact).abs() < 1e-13);
            assert!((n.to_kind(Kind::Stress).contract(&t.to_kind(Kind::Strain)) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn round_trip_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = random_sym(&mut rng);
            for kind in [Kind::Stress, Kind::Strain] {
                assert_eq!(SymTensor3::from_matrix(&a, kind).to_matrix(), a);
            }
            let mut p = a;
            p[(0, 2)] = 0.0;
            p[(2, 0)] = 0.0;
            p[(1, 2)] = 0.0;
            p[(2, 1)] = 0.0;
            assert_eq!(SymTensorPS::from_matrix(&p, Kind::Strain).to_matrix(), p);
        }
    }

    #[test]
    fn plane_strain_keeps_out_of_plane_slot() {
        let t = SymTensorPS::from_slice(&[1.0, 2.0, 0.5, -3.0], Kind::Strain);
        assert_eq!(t.to_matrix()[(2, 2)], -3.0);
        assert_eq!(t.trace(), 0.0);
    }

    #[test]
    fn matrix_contraction_matches_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let c = random_minor_symmetric(&mut rng);
            assert!(c.has_minor_symmetry(1e-12));
            let eta = random_sym(&mut rng);
            let eps = random_sym(&mut rng);
            let exact = c.double_contract(&eta, &eps);
            let n = SymTensor3::from_matrix(&eta, Kind::Strain);
            let e = SymTensor3::from_matrix(&eps, Kind::Strain);
            let m = fourth_to_matrix::<6>(&c);
            let scale = 1.0 + exact.abs();
            assert!((n.vector().dot(&(m * e.vector())) - exact).abs() <= 1e-12 * scale * 81.0);
        }
    }

    #[test]
    fn identity_leaves_strain_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let e = SymTensor3::from_matrix(&random_sym(&mut rng), Kind::Strain);
            let out = apply(&identity4::<6>(), &e);
            assert!((out.to_matrix() - e.to_matrix()).abs().max() < 1e-15);
        }
    }

    #[test]
    fn elastic_hydrostatic_and_shear() {
        let d = elastic_stiffness::<6>(1.0, 1.0).unwrap();
        let s = apply(&d, &SymTensor3::identity(Kind::Strain));
        assert!((s.to_matrix() - Matrix3::<f64>::identity() * 3.0).abs().max() < 1e-15);

        let g: f64 = 6711.41;
        let d = elastic_stiffness::<6>(333333.3, g).unwrap();
        let e = SymTensor3::from_slice(&[0.0, 0.0, 0.0, 2.0 * 1e-3, 0.0, 0.0], Kind::Strain);
        let s = apply(&d, &e);
        assert!((s.vector()[3] - 2.0 * g * 1e-3).abs() < 1e-12);
        for a in [0, 1, 2, 4, 5] {
            assert_eq!(s.vector()[a], 0.0);
        }
    }

    #[test]
    fn elastic_matches_lame_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (k, g) = (5.0, 2.0);
        let d = elastic_stiffness::<6>(k, g).unwrap();
        for _ in 0..20 {
            let eps = random_sym(&mut rng);
            let expected = lame_lambda(k, g) * eps.trace() * Matrix3::identity() + 2.0 * g * eps;
            let s = apply(&d, &SymTensor3::from_matrix(&eps, Kind::Strain));
            assert!((s.to_matrix() - expected).abs().max() < 1e-13);
        }
    }

    #[test]
    fn compliance_inverts_stiffness() {
        let (k, g) = moduli_from_young(20000.0, 0.49).unwrap();
        assert!((k - 333333.333_333_333).abs() < 1e-6);
        assert!((g - 6711.409_395_973_154).abs() < 1e-9);
        let d = elastic_stiffness::<6>(k, g).unwrap();
        let c = elastic_compliance::<6>(k, g).unwrap();
        assert!((d * c - Tangent4x3::identity()).abs().max() < 1e-12);
        let dps = elastic_stiffness::<4>(k, g).unwrap();
        let cps = elastic_compliance::<4>(k, g).unwrap();
        assert!((dps * cps - Tangent4PS::identity()).abs().max() < 1e-12);

        let sig = SymTensor3::from_slice(&[10.0, -3.0, 4.0, 2.0, -1.0, 0.5], Kind::Stress);
        let eps = apply_compliance(k, g, &sig);
        assert!((apply(&d, &eps).vector() - sig.vector()).abs().max() < 1e-9);
        assert!((c * sig.vector() - eps.vector()).abs().max() < 1e-15);
    }

    #[test]
    fn elastic_spd() {
        let d = elastic_stiffness::<6>(3.0, 0.7).unwrap();
        assert!((d - d.transpose()).abs().max() == 0.0);
        let eig = nalgebra::SymmetricEigen::new(d);
        assert!(eig.eigenvalues.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn rejects_nonpositive_moduli() {
        assert!(elastic_stiffness::<6>(0.0, 1.0).is_err());
        assert!(elastic_stiffness::<4>(1.0, -1.0).is_err());
        assert!(moduli_from_young(1.0, 0.5).is_err());
    }

    #[test]
    fn ps_restriction_of_3d_elasticity() {
        let d3 = elastic_stiffness::<6>(3.0, 1.5).unwrap();
        let dps = elastic_stiffness::<4>(3.0, 1.5).unwrap();
        assert_eq!(restrict_to_ps(&d3), dps);
    }
}
