//! Internal forces, consistent tangent stiffness and load vector of the
//! discretized body, with constrained dofs eliminated.

use std::sync::Arc;

use nalgebra::{DMatrix, SVector};
use rayon::prelude::*;

use super::mesh::{jacobian, Mesh};
use super::sparse::{Pattern, SparseSystem};
use crate::constitutive::{return_map, MaterialParams, PointState, ReturnOutcome, RootConfig};
use crate::error::{Error, Result};
use crate::tangent::tangent_of;
use crate::tensor_algebra::{Kind, SymTensor, Tangent4};

const NONE: usize = usize::MAX;
const CHUNK: usize = 512;

/// Constitutive response at one integration point for the current iterate.
#[derive(Clone, Debug)]
pub struct PointResult<const N: usize> {
    pub outcome: ReturnOutcome<N>,
    pub tangent: Tangent4<N>,
}

/// Plane-strain (`N = 4`) or 3D (`N = 6`) slope model on a fixed mesh.
pub struct FemModel<const N: usize> {
    mesh: Mesh,
    params: MaterialParams,
    specific_weight: f64,
    root: RootConfig,
    nen: usize,
    npe: usize,
    grads: Vec<[f64; 3]>,
    weights: Vec<f64>,
    free_of: Vec<usize>,
    dof_of_free: Vec<usize>,
    load: Vec<f64>,
    pattern: Arc<Pattern>,
    slots: Vec<usize>,
    committed: Vec<PointState<N>>,
    cache: Vec<PointResult<N>>,
    pool: rayon::ThreadPool,
    workers: usize,
}

impl<const N: usize> FemModel<N> {
    /// `workers = 0` uses all available cores.
    pub fn new(mesh: Mesh, params: MaterialParams, specific_weight: f64, workers: usize) -> Result<Self> {
        let dim = mesh.dim();
        if !((dim == 2 && N == 4) || (dim == 3 && N == 6)) {
            return Err(Error::Mesh(format!("a {dim}D mesh cannot be used with Voigt size {N}")));
        }
        if !(specific_weight.is_finite() && specific_weight > 0.0) {
            return Err(Error::param("specific_weight", "must be positive"));
        }
        mesh.validate()?;
        let family = mesh.family;
        let nen = family.nodes_per_element();
        let npe = family.points_per_element();
        let quad = family.quadrature();
        let ne = mesh.n_elements();
        let mut grads = Vec::with_capacity(ne * npe * nen);
        let mut weights = Vec::with_capacity(ne * npe);
        let mut n = vec![0.0; nen];
        let mut dn = vec![[0.0; 3]; nen];
        for e in 0..ne {
            for (xi, w) in &quad {
                family.shape(*xi, &mut n, &mut dn);
                let (j, det) = jacobian(&mesh, e, &dn);
                let jinv = j.try_inverse().ok_or_else(|| Error::Mesh(format!("element {e}: singular Jacobian")))?;
                for d in &dn {
                    let mut g = [0.0; 3];
                    for (c, gc) in g.iter_mut().enumerate().take(dim) {
                        *gc = (0..dim).map(|r| d[r] * jinv[(r, c)]).sum();
                    }
                    grads.push(g);
                }
                weights.push(w * det);
            }
        }

        let mask = mesh.fixed_mask();
        let mut free_of = vec![NONE; mesh.n_dofs()];
        let mut dof_of_free = Vec::new();
        for (d, &fixed) in mask.iter().enumerate() {
            if !fixed {
                free_of[d] = dof_of_free.len();
                dof_of_free.push(d);
            }
        }
        let nfree = dof_of_free.len();
        let nd = nen * dim;
        let free_ref = &free_of;
        let edofs = |e: usize| -> Vec<usize> {
            mesh.element(e).iter().flat_map(|&node| (0..dim).map(move |c| free_ref[node * dim + c])).collect()
        };
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); nfree];
        for e in 0..ne {
            let ed = edofs(e);
            for &c in ed.iter().filter(|&&c| c != NONE) {
                cols[c].extend(ed.iter().copied().filter(|&r| r != NONE));
            }
        }
        let pattern = Arc::new(Pattern::from_columns(nfree, cols));
        let mut slots = Vec::with_capacity(ne * nd * nd);
        for e in 0..ne {
            let ed = edofs(e);
            for &c in &ed {
                for &r in &ed {
                    slots.push(if r == NONE || c == NONE { NONE } else { pattern.slot(r, c).expect("pattern covers element") });
                }
            }
        }

        let workers = if workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { workers };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Inconsistent(format!("thread pool: {e}")))?;

        let mut model = Self {
            params,
            specific_weight,
            root: RootConfig::default(),
            nen,
            npe,
            grads,
            weights,
            free_of,
            dof_of_free,
            load: Vec::new(),
            pattern,
            slots,
            committed: vec![PointState::default(); ne * npe],
            cache: Vec::new(),
            pool,
            workers,
            mesh,
        };
        model.load = model.restrict(&model.load_vector_full());
        Ok(model)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn set_root_config(&mut self, cfg: RootConfig) {
        self.root = cfg;
    }

    pub fn n_free(&self) -> usize {
        self.dof_of_free.len()
    }

    /// Free-dof index of a global dof, if unconstrained.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        Some(self.free_of[dof]).filter(|&i| i != NONE)
    }

    /// Load vector for unit load factor on the free dofs.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    /// Consistent body-force vector `-rho g \int N_a` on the vertical dofs.
    pub fn load_vector_full(&self) -> Vec<f64> {
        let dim = self.mesh.dim();
        let family = self.mesh.family;
        let quad = family.quadrature();
        let mut n = vec![0.0; self.nen];
        let mut dn = vec![[0.0; 3]; self.nen];
        let mut l = vec![0.0; self.mesh.n_dofs()];
        for e in 0..self.mesh.n_elements() {
            for (q, (xi, _)) in quad.iter().enumerate() {
                family.shape(*xi, &mut n, &mut dn);
                let w = self.weights[e * self.npe + q];
                for (a, &node) in self.mesh.element(e).iter().enumerate() {
                    l[node * dim + 1] -= self.specific_weight * n[a] * w;
                }
            }
        }
        l
    }

    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.n_dofs()];
        for (i, &d) in self.dof_of_free.iter().enumerate() {
            full[d] = u[i];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.dof_of_free.iter().map(|&d| full[d]).collect()
    }

    pub fn states(&self) -> &[PointState<N>] {
        &self.committed
    }

    pub fn set_states(&mut self, states: Vec<PointState<N>>) -> Result<()> {
        if states.len() != self.committed.len() {
            return Err(Error::Inconsistent(format!("expected {} point states, got {}", self.committed.len(), states.len())));
        }
        self.committed = states;
        self.cache.clear();
        Ok(())
    }

    /// Point results of the last force evaluation.
    pub fn point_results(&self) -> &[PointResult<N>] {
        &self.cache
    }

    fn b_matrix(&self, e: usize, q: usize) -> DMatrix<f64> {
        let dim = self.mesh.dim();
        let p = e * self.npe + q;
        let g = &self.grads[p * self.nen..(p + 1) * self.nen];
        let mut b = DMatrix::zeros(N, self.nen * dim);
        for (a, d) in g.iter().enumerate() {
            if dim == 2 {
                let c = 2 * a;
                b[(0, c)] = d[0];
                b[(1, c + 1)] = d[1];
                b[(2, c)] = d[1];
                b[(2, c + 1)] = d[0];
            } else {
                let c = 3 * a;
                b[(0, c)] = d[0];
                b[(1, c + 1)] = d[1];
                b[(2, c + 2)] = d[2];
                b[(3, c)] = d[1];
                b[(3, c + 1)] = d[0];
                b[(4, c + 1)] = d[2];
                b[(4, c + 2)] = d[1];
                b[(5, c)] = d[2];
                b[(5, c + 2)] = d[0];
            }
        }
        b
    }

    fn element_displacements(&self, e: usize, u_full: &[f64]) -> nalgebra::DVector<f64> {
        let dim = self.mesh.dim();
        nalgebra::DVector::from_iterator(
            self.nen * dim,
            self.mesh.element(e).iter().flat_map(|&n| (0..dim).map(move |c| u_full[n * dim + c])),
        )
    }

    /// Total strain at every point of element `e`.
    pub fn element_strains(&self, e: usize, u_full: &[f64]) -> Vec<SymTensor<N>> {
        let ue = self.element_displacements(e, u_full);
        (0..self.npe)
            .map(|q| {
                let v = self.b_matrix(e, q) * &ue;
                SymTensor::new(SVector::<f64, N>::from_iterator(v.iter().copied()), Kind::Strain)
            })
            .collect()
    }

    fn element_forces(&self, e: usize, u_full: &[f64]) -> Result<(Vec<f64>, Vec<PointResult<N>>)> {
        let ue = self.element_displacements(e, u_full);
        let mut fe = vec![0.0; ue.len()];
        let mut results = Vec::with_capacity(self.npe);
        for q in 0..self.npe {
            let p = e * self.npe + q;
            let b = self.b_matrix(e, q);
            let v = &b * &ue;
            let eps = SymTensor::new(SVector::<f64, N>::from_iterator(v.iter().copied()), Kind::Strain);
            let at = |source: Error| Error::AtPoint { element: e, point: q, source: Box::new(source) };
            let (trial, outcome) = return_map(&eps, &self.committed[p], &self.params, &self.root).map_err(at)?;
            let tangent = tangent_of(&trial, &outcome, &self.params).map_err(at)?;
            let s = outcome.sigma.stress_vector();
            let w = self.weights[p];
            for (i, f) in fe.iter_mut().enumerate() {
                *f += w * (0..N).map(|r| b[(r, i)] * s[r]).sum::<f64>();
            }
            results.push(PointResult { outcome, tangent });
        }
        Ok((fe, results))
    }

    /// Internal force vector on all dofs; caches the point results.
    pub fn internal_forces_full(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        let u_full = self.expand(u);
        self.forces_from_full(&u_full)
    }

    /// Internal force vector for a displacement given on all dofs, including
    /// nonzero values on constrained ones; caches the point results.
    pub fn forces_from_full(&mut self, u_full: &[f64]) -> Result<Vec<f64>> {
        if u_full.len() != self.mesh.n_dofs() {
            return Err(Error::Inconsistent(format!("displacement has length {}, expected {}", u_full.len(), self.mesh.n_dofs())));
        }
        let dim = self.mesh.dim();
        let ne = self.mesh.n_elements();
        let mut f = vec![0.0; self.mesh.n_dofs()];
        let mut cache = Vec::with_capacity(ne * self.npe);
        for start in (0..ne).step_by(CHUNK) {
            let end = (start + CHUNK).min(ne);
            let this = &*self;
            let chunk: Vec<Result<(Vec<f64>, Vec<PointResult<N>>)>> =
                self.pool.install(|| (start..end).into_par_iter().map(|e| this.element_forces(e, u_full)).collect());
            for (e, r) in (start..end).zip(chunk) {
                let (fe, pts) = r?;
                for (a, &node) in self.mesh.element(e).iter().enumerate() {
                    for c in 0..dim {
                        f[node * dim + c] += fe[a * dim + c];
                    }
                }
                cache.extend(pts);
            }
        }
        self.cache = cache;
        Ok(f)
    }

    /// Internal force vector on the free dofs; caches the point results.
    pub fn internal_forces(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        let f = self.internal_forces_full(u)?;
        Ok(self.restrict(&f))
    }

    fn element_stiffness(&self, e: usize) -> DMatrix<f64> {
        let nd = self.nen * self.mesh.dim();
        let mut ke = DMatrix::zeros(nd, nd);
        for q in 0..self.npe {
            let p = e * self.npe + q;
            let b = self.b_matrix(e, q);
            let d = DMatrix::from_iterator(N, N, self.cache[p].tangent.iter().copied());
            let db = d * &b;
            ke.gemm_tr(self.weights[p], &b, &db, 1.0);
        }
        ke
    }

    /// Consistent tangent stiffness at the iterate of the last force evaluation.
    pub fn tangent_stiffness(&self) -> Result<SparseSystem> {
        if self.cache.len() != self.committed.len() {
            return Err(Error::Inconsistent("tangent stiffness requested before an internal force evaluation".into()));
        }
        let ne = self.mesh.n_elements();
        let nd = self.nen * self.mesh.dim();
        let mut k = SparseSystem::zeros(self.pattern.clone());
        let vals = k.values_mut();
        for start in (0..ne).step_by(CHUNK) {
            let end = (start + CHUNK).min(ne);
            let chunk: Vec<DMatrix<f64>> = self.pool.install(|| (start..end).into_par_iter().map(|e| self.element_stiffness(e)).collect());
            for (e, ke) in (start..end).zip(chunk) {
                let slots = &self.slots[e * nd * nd..(e + 1) * nd * nd];
                // Column-major: slot index c * nd + r matches ke's storage order.
                for (s, v) in slots.iter().zip(ke.iter()) {
                    if *s != NONE {
                        vals[*s] += v;
                    }
                }
            }
        }
        Ok(k)
    }

    /// Evaluate at the converged `u` and make the resulting states the new
    /// committed history.
    pub fn commit(&mut self, u: &[f64]) -> Result<()> {
        self.internal_forces_full(u)?;
        self.committed = self.cache.iter().map(|r| r.outcome.state).collect();
        Ok(())
    }

    /// Load factor implied by the reactions at the constrained vertical dofs:
    /// `-sum F_c / sum l_free` over the vertical components.
    pub fn reaction_load_factor(&mut self, u: &[f64]) -> Result<f64> {
        let f = self.internal_forces_full(u)?;
        let dim = self.mesh.dim();
        let mut reaction = 0.0;
        for node in 0..self.mesh.n_nodes() {
            let d = node * dim + 1;
            if self.free_of[d] == NONE {
                reaction += f[d];
            }
        }
        let lfree: f64 = self.dof_of_free.iter().zip(&self.load).filter(|(d, _)| *d % dim == 1).map(|(_, l)| l).sum();
        Ok(-reaction / lfree)
    }

    /// Vertical settlement of the monitored crest node (positive downward).
    pub fn corner_settlement(&self, u: &[f64]) -> Option<f64> {
        let a = self.mesh.corner_a?;
        let i = self.free_index(self.mesh.dof(a, 1))?;
        Some(-u[i])
    }

    /// Control vector `b` with `b^T u` the crest settlement.
    pub fn corner_control(&self) -> Result<Vec<f64>> {
        let a = self.mesh.corner_a.ok_or_else(|| Error::Mesh("mesh has no tagged corner node".into()))?;
        let i = self.free_index(self.mesh.dof(a, 1)).ok_or_else(|| Error::Mesh("corner node settlement is constrained".into()))?;
        let mut b = vec![0.0; self.n_free()];
        b[i] = -1.0;
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::HardeningModel;
    use crate::fem::element::ElementFamily;
    use crate::fem::mesh::{build_slope_mesh, MeshDensity, SlopeGeometry};
    use crate::tensor_algebra::{D3, PS};

    fn elastic_params() -> MaterialParams {
        MaterialParams::from_young_degrees(20000.0, 0.3, 1e9, 30.0, 30.0, HardeningModel::Perfect).unwrap()
    }

    fn unit_square(family: ElementFamily) -> Mesh {
        let refs = family.reference_nodes();
        let coords = refs.iter().map(|p| [0.5 * (p[0] + 1.0), 0.5 * (p[1] + 1.0), 0.0]).collect();
        Mesh::new(family, coords, (0..refs.len()).collect(), vec![], None).unwrap()
    }

    #[test]
    fn load_on_unit_square() {
        let m = FemModel::<PS>::new(unit_square(ElementFamily::Q1Quad), elastic_params(), 20.0, 1).unwrap();
        let l = m.load_vector_full();
        for a in 0..4 {
            assert!((l[2 * a + 1] + 5.0).abs() < 1e-13);
            assert_eq!(l[2 * a], 0.0);
        }
        // Serendipity weights: corners -1/12, midsides 1/3 of the total.
        let m = FemModel::<PS>::new(unit_square(ElementFamily::Q2Quad), elastic_params(), 20.0, 1).unwrap();
        let l = m.load_vector_full();
        for a in 0..8 {
            let expect = if a < 4 { 20.0 / 12.0 } else { -20.0 / 3.0 };
            assert!((l[2 * a + 1] - expect).abs() < 1e-12, "{a}: {}", l[2 * a + 1]);
        }
    }

    #[test]
    fn load_total_is_weight() {
        let g = SlopeGeometry::default();
        for family in ElementFamily::ALL {
            let mesh = build_slope_mesh(&g, family, MeshDensity { refinement: 2, grading: 1.3 }).unwrap();
            let vol = mesh.measure();
            let total: f64 = if family.dim() == 2 {
                let m = FemModel::<PS>::new(mesh, elastic_params(), 20.0, 1).unwrap();
                m.load_vector_full().iter().skip(1).step_by(2).sum()
            } else {
                let m = FemModel::<D3>::new(mesh, elastic_params(), 20.0, 1).unwrap();
                m.load_vector_full().iter().skip(1).step_by(3).sum()
            };
            assert!((total + 20.0 * vol).abs() < 1e-9 * 20.0 * vol, "{family}");
        }
    }

    #[test]
    fn zero_displacement_zero_force() {
        let mesh = build_slope_mesh(&SlopeGeometry::default(), ElementFamily::Q2Quad, MeshDensity { refinement: 2, grading: 1.0 }).unwrap();
        let mut m = FemModel::<PS>::new(mesh, elastic_params(), 20.0, 2).unwrap();
        let f = m.internal_forces(&vec![0.0; m.n_free()]).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(FemModel::<D3>::new(unit_square(ElementFamily::Q1Quad), elastic_params(), 20.0, 1).is_err());
        assert!(FemModel::<PS>::new(unit_square(ElementFamily::Q1Quad), elastic_params(), 0.0, 1).is_err());
    }

    #[test]
    fn stiffness_requires_force_pass() {
        let m = FemModel::<PS>::new(unit_square(ElementFamily::Q1Quad), elastic_params(), 20.0, 1).unwrap();
        assert!(m.tangent_stiffness().is_err());
    }

    #[test]
    fn corner_control_points_down() {
        let mesh = build_slope_mesh(&SlopeGeometry::default(), ElementFamily::Q1Quad, MeshDensity { refinement: 2, grading: 1.0 }).unwrap();
        let m = FemModel::<PS>::new(mesh, elastic_params(), 20.0, 1).unwrap();
        let b = m.corner_control().unwrap();
        let mut u = vec![0.0; m.n_free()];
        let i = b.iter().position(|&v| v != 0.0).unwrap();
        u[i] = -0.25;
        assert_eq!(m.corner_settlement(&u), Some(0.25));
        assert_eq!(b.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>(), 0.25);
    }
}
