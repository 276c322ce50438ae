#![allow(dead_code)]

use mohrcoulomb::constitutive::{Branch, HardeningModel, MaterialParams};
use mohrcoulomb::fem::mesh::Mesh;
use mohrcoulomb::fem::{build_slope_mesh, ElementFamily, FemModel, MeshDensity, SlopeGeometry};
use mohrcoulomb::tensor_algebra::{elastic_stiffness, D3};
use nalgebra::{DMatrix, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit box split into `n` elements per direction with randomly shifted
/// interior vertices; midside nodes sit at edge midpoints. Nodes on the
/// boundary get all components fixed when `fix_boundary`.
pub fn distorted_box(family: ElementFamily, n: usize, shift: f64, fix_boundary: bool, rng: &mut impl Rng) -> Mesh {
    let dim = family.dim();
    let m = 2 * n + 1;
    let mk = if dim == 3 { m } else { 1 };
    let idx = |i: usize, j: usize, k: usize| (k * m + j) * m + i;
    let mut vertex = vec![[0.0f64; 3]; m * m * mk];
    let interior = |i: usize| i > 0 && i < 2 * n;
    for k in (0..mk).step_by(2) {
        for j in (0..m).step_by(2) {
            for i in (0..m).step_by(2) {
                let mut p = [i as f64 / (2 * n) as f64, j as f64 / (2 * n) as f64, if dim == 3 { k as f64 / (2 * n) as f64 } else { 0.0 }];
                let inside = interior(i) && interior(j) && (dim == 2 || interior(k));
                if inside {
                    for c in 0..dim {
                        p[c] += shift * rng.random_range(-1.0..1.0) / n as f64;
                    }
                }
                vertex[idx(i, j, k)] = p;
            }
        }
    }
    let quadratic = family.is_quadratic();
    let mut id = vec![usize::MAX; m * m * mk];
    let mut coords = Vec::new();
    let mut fixed = Vec::new();
    for k in 0..mk {
        for j in 0..m {
            for i in 0..m {
                let odd = [i % 2, j % 2, k % 2];
                let nodd: usize = odd.iter().sum();
                if nodd > usize::from(quadratic) {
                    continue;
                }
                let p = if nodd == 0 {
                    vertex[idx(i, j, k)]
                } else {
                    let (a, b) = match odd {
                        [1, 0, 0] => (idx(i - 1, j, k), idx(i + 1, j, k)),
                        [0, 1, 0] => (idx(i, j - 1, k), idx(i, j + 1, k)),
                        _ => (idx(i, j, k - 1), idx(i, j, k + 1)),
                    };
                    [0, 1, 2].map(|c| 0.5 * (vertex[a][c] + vertex[b][c]))
                };
                id[idx(i, j, k)] = coords.len();
                let on_boundary = i == 0 || i == 2 * n || j == 0 || j == 2 * n || (dim == 3 && (k == 0 || k == 2 * n));
                if fix_boundary && on_boundary {
                    fixed.extend((0..dim).map(|c| (coords.len(), c)));
                }
                coords.push(p);
            }
        }
    }
    let mut conn = Vec::new();
    let nz = if dim == 3 { n } else { 1 };
    for ek in 0..nz {
        for ej in 0..n {
            for ei in 0..n {
                for r in family.reference_nodes() {
                    let li = (2 * ei as i64 + 1 + r[0] as i64) as usize;
                    let lj = (2 * ej as i64 + 1 + r[1] as i64) as usize;
                    let lk = if dim == 3 { (2 * ek as i64 + 1 + r[2] as i64) as usize } else { 0 };
                    conn.push(id[idx(li, lj, lk)]);
                }
            }
        }
    }
    Mesh::new(family, coords, conn, fixed, None).unwrap()
}

/// Dense linear elastic stiffness on all dofs, assembled from scratch.
pub fn dense_elastic_stiffness<const N: usize>(mesh: &Mesh, k: f64, g: f64) -> DMatrix<f64> {
    let dim = mesh.dim();
    let d: SMatrix<f64, N, N> = elastic_stiffness::<N>(k, g).unwrap();
    let family = mesh.family;
    let nen = family.nodes_per_element();
    let mut kk = DMatrix::zeros(mesh.n_dofs(), mesh.n_dofs());
    let mut n = vec![0.0; nen];
    let mut dn = vec![[0.0; 3]; nen];
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element(e);
        for (xi, w) in family.quadrature() {
            family.shape(xi, &mut n, &mut dn);
            let mut j = DMatrix::<f64>::zeros(dim, dim);
            for (a, &node) in nodes.iter().enumerate() {
                for r in 0..dim {
                    for c in 0..dim {
                        j[(r, c)] += mesh.coords[node][r] * dn[a][c];
                    }
                }
            }
            let det = j.determinant();
            let jinv = j.try_inverse().unwrap();
            let mut b = DMatrix::<f64>::zeros(N, nen * dim);
            for a in 0..nen {
                let gx: Vec<f64> = (0..dim).map(|c| (0..dim).map(|r| dn[a][r] * jinv[(r, c)]).sum()).collect();
                let pairs: &[(usize, usize)] = if dim == 2 { &[(0, 0), (1, 1), (0, 1)] } else { &[(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)] };
                for (row, &(p, q)) in pairs.iter().enumerate() {
                    b[(row, a * dim + p)] += gx[q];
                    if p != q {
                        b[(row, a * dim + q)] += gx[p];
                    }
                }
            }
            let dd = DMatrix::from_iterator(N, N, d.iter().copied());
            let ke = b.transpose() * dd * &b * (w * det);
            for (a, &na) in nodes.iter().enumerate() {
                for (bb, &nb) in nodes.iter().enumerate() {
                    for r in 0..dim {
                        for c in 0..dim {
                            kk[(na * dim + r, nb * dim + c)] += ke[(a * dim + r, bb * dim + c)];
                        }
                    }
                }
            }
        }
    }
    kk
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solution of the elastic problem `K u = zeta l` from the undeformed state.
pub fn elastic_solution<const N: usize>(model: &mut FemModel<N>, zeta: f64) -> Vec<f64> {
    let zero = vec![0.0; model.n_free()];
    model.internal_forces(&zero).unwrap();
    let k = model.tangent_stiffness().unwrap();
    let rhs: Vec<f64> = model.load().iter().map(|l| zeta * l).collect();
    k.factorize().unwrap().solve(&rhs).unwrap()
}

pub fn elastic() -> MaterialParams {
    MaterialParams::from_young_degrees(20000.0, 0.3, 1e12, 30.0, 30.0, HardeningModel::Perfect).unwrap()
}

pub fn slope_params(psi: f64) -> MaterialParams {
    MaterialParams::from_young_degrees(20000.0, 0.49, 40.0, 20.0, psi, HardeningModel::SaturatedQuadratic { slope: 10000.0, gain: 10.0 })
        .unwrap()
}

fn linear_field(p: [f64; 3], dim: usize) -> [f64; 3] {
    let a = [[1e-3, -2e-3, 5e-4], [3e-4, 1.5e-3, -7e-4], [-6e-4, 2e-4, 9e-4]];
    let c = [1e-3, -2e-3, 4e-4];
    let mut u = [0.0; 3];
    for r in 0..dim {
        u[r] = c[r] + (0..dim).map(|s| a[r][s] * p[s]).sum::<f64>();
    }
    u
}

/// Largest relative error of the linear-field patch test: solved interior
/// values, interior residual and pointwise strain.
pub fn patch_error<const N: usize>(family: ElementFamily) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7 + family as u64);
    let mesh = distorted_box(family, 3, 0.2, true, &mut rng);
    let dim = mesh.dim();
    let mut model = FemModel::<N>::new(mesh.clone(), elastic(), 20.0, 1).unwrap();
    let exact: Vec<f64> = mesh.coords.iter().flat_map(|&p| linear_field(p, dim)[..dim].to_vec()).collect();
    // Boundary values only; the interior comes from the solve.
    let mask = mesh.fixed_mask();
    let boundary: Vec<f64> = exact.iter().zip(&mask).map(|(u, &m)| if m { *u } else { 0.0 }).collect();
    let f = model.forces_from_full(&boundary).unwrap();
    let k = model.tangent_stiffness().unwrap();
    let rhs: Vec<f64> = model.restrict(&f).iter().map(|v| -v).collect();
    let ui = k.factorize().unwrap().solve(&rhs).unwrap();
    let want = model.restrict(&exact);
    let scale = norm(&want);
    let mut err: f64 = 0.0;
    for (a, b) in ui.iter().zip(&want) {
        err = err.max((a - b).abs() / scale);
    }
    // Constant strain at every point and zero interior residual.
    let f = model.forces_from_full(&exact).unwrap();
    let fscale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in model.restrict(&f) {
        err = err.max(v.abs() / fscale);
    }
    let first = model.element_strains(0, &exact)[0];
    for e in 0..mesh.n_elements() {
        for s in model.element_strains(e, &exact) {
            err = err.max((s - first).norm() / first.norm());
        }
    }
    err
}

/// Model loaded well past first yield so that every return branch is active.
pub fn plastic_model<const N: usize>(family: ElementFamily, psi: f64, workers: usize) -> (FemModel<N>, Vec<f64>) {
    let mesh = build_slope_mesh(&SlopeGeometry::default(), family, MeshDensity { refinement: 2, grading: 1.0 }).unwrap();
    let mut model = FemModel::<N>::new(mesh, slope_params(psi), 20.0, workers).unwrap();
    let u = elastic_solution(&mut model, 3.0);
    (model, u)
}

pub fn fd_stiffness_error<const N: usize>(family: ElementFamily, psi: f64, seed: u64) -> (f64, usize) {
    let (mut model, u) = plastic_model::<N>(family, psi, 2);
    model.internal_forces(&u).unwrap();
    let plastic = model.point_results().iter().filter(|r| r.outcome.branch != Branch::Elastic).count();
    let k = model.tangent_stiffness().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..model.n_free()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h = 1e-6 * norm(&u) / norm(&v);
    let shift = |s: f64| -> Vec<f64> { u.iter().zip(&v).map(|(a, b)| a + s * h * b).collect() };
    let fp = model.internal_forces(&shift(1.0)).unwrap();
    let fm = model.internal_forces(&shift(-1.0)).unwrap();
    let kv = k.matvec(&v);
    let diff: Vec<f64> = fp.iter().zip(&fm).zip(&kv).map(|((p, m), k)| (p - m) / (2.0 * h) - k).collect();
    (norm(&diff) / norm(&kv), plastic)
}


/// Whether internal forces and stiffness values are bit-identical for every worker count.
pub fn assembly_deterministic(workers: &[usize]) -> bool {
    let mut reference = None;
    for &w in workers {
        let (mut model, u) = plastic_model::<D3>(ElementFamily::Q2Hex, 10.0, w);
        let f = model.internal_forces(&u).unwrap();
        let k = model.tangent_stiffness().unwrap().values().to_vec();
        let bits: Vec<u64> = f.iter().chain(&k).map(|x| x.to_bits()).collect();
        match &reference {
            None => reference = Some(bits),
            Some(r) if *r != bits => return false,
            Some(_) => {}
        }
    }
    true
}
