//! Compressed-column stiffness storage over the free dofs and its sparse LU.

use std::sync::{Arc, OnceLock};

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Col;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sparsity pattern shared by every stiffness assembled on one mesh. The
/// symbolic factorization is computed once and reused.
#[derive(Debug)]
pub struct Pattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    symbolic: OnceLock<SymbolicLu<usize>>,
}

impl Pattern {
    /// Pattern from per-column row lists (sorted and deduplicated here).
    pub fn from_columns(n: usize, mut cols: Vec<Vec<usize>>) -> Self {
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        Self { n, col_ptr, row_idx, symbolic: OnceLock::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Position of entry `(r, c)` in the value array.
    pub fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.col_ptr[c], self.col_ptr[c + 1]);
        self.row_idx[a..b].binary_search(&r).ok().map(|k| a + k)
    }

    fn symbolic_ref(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx)
    }

    fn symbolic_lu(&self) -> Result<SymbolicLu<usize>> {
        if let Some(s) = self.symbolic.get() {
            return Ok(s.clone());
        }
        let s = SymbolicLu::try_new(self.symbolic_ref()).map_err(|e| Error::LinearSolve(format!("symbolic analysis: {e:?}")))?;
        Ok(self.symbolic.get_or_init(|| s).clone())
    }
}

/// Assembled matrix on the free dofs.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseSystem {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pattern.slot(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.pattern;
        let mut y = vec![0.0; p.n];
        for c in 0..p.n {
            let xc = x[c];
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                y[p.row_idx[k]] += self.values[k] * xc;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = &self.pattern;
        let mut m = DMatrix::zeros(p.n, p.n);
        for c in 0..p.n {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                m[(p.row_idx[k], c)] = self.values[k];
            }
        }
        m
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let p = &self.pattern;
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for c in 0..p.n {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                let r = p.row_idx[k];
                scale = scale.max(self.values[k].abs());
                diff = diff.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    pub fn factorize(&self) -> Result<Factorization> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("stiffness matrix"));
        }
        let sym = self.pattern.symbolic_lu()?;
        let mat = SparseColMatRef::new(self.pattern.symbolic_ref(), &self.values);
        let lu = Lu::try_new_with_symbolic(sym, mat).map_err(|e| Error::LinearSolve(format!("numeric factorization: {e:?}")))?;
        Ok(Factorization { lu, n: self.pattern.n })
    }
}

pub struct Factorization {
    lu: Lu<usize, f64>,
    n: usize,
}

impl Factorization {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::LinearSolve(format!("right-hand side has length {}, expected {}", rhs.len(), self.n)));
        }
        let b = Col::from_fn(self.n, |i| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("singular stiffness matrix (non-finite solution)".into()));
        }
        Ok(out)
    }
}
