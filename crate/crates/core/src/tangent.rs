//! Consistent tangent of the discrete stress-strain operator for each return branch.

use nalgebra::DMatrix;

use crate::constitutive::{Branch, MaterialParams, ReturnOutcome, TrialState};
use crate::error::{Error, Result};
use crate::spectral::{Derivatives, Spectrum};
use crate::tensor_algebra::{is_shear, outer, Kind, SymTensor, Tangent4};

/// Inputs of the tangent: the trial spectrum and the converged return.
#[derive(Clone, Copy, Debug)]
pub struct TangentRequest<'a, const N: usize> {
    pub spectrum: &'a Spectrum<N>,
    pub outcome: &'a ReturnOutcome<N>,
    pub params: &'a MaterialParams,
}

impl<'a, const N: usize> TangentRequest<'a, N> {
    pub fn new(trial: &'a TrialState<N>, outcome: &'a ReturnOutcome<N>, params: &'a MaterialParams) -> Self {
        Self { spectrum: &trial.spectrum, outcome, params }
    }
}

fn mismatch<const N: usize>(branch: Branch, spec: &Spectrum<N>) -> Error {
    Error::BranchMismatch { branch: branch.to_string(), class: spec.class.to_string() }
}

/// Derivative of the stress with respect to the trial strain. The plane-strain
/// variant (`N = 4`) uses the closed-form plane-strain eigenprojection derivatives.
pub fn consistent_tangent<const N: usize>(req: &TangentRequest<'_, N>) -> Result<Tangent4<N>> {
    let p = req.params;
    let out = req.outcome;
    let spec = req.spectrum;
    let branch = out.branch;
    let (k, g, lam) = (p.k(), p.g(), p.lambda());
    let (sf, sp, cf) = (p.sin_phi(), p.sin_psi(), p.cos_phi());
    let h1 = out.h1;
    let id = SymTensor::<N>::identity(Kind::Stress);
    let ii = outer(&id, &id);
    let sig = out.principal;
    let harden = 4.0 * h1 * cf * cf;
    match branch {
        Branch::Elastic => Ok(p.elastic::<N>()),
        Branch::Smooth => {
            let (e1, e2, e3) = match (spec.e1(), spec.e2(), spec.e3()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(mismatch(branch, spec)),
            };
            let Derivatives::Distinct(d) = spec.derivatives()? else {
                return Err(mismatch(branch, spec));
            };
            let num = e1 * (2.0 * g * (1.0 + sf)) - e3 * (2.0 * g * (1.0 - sf)) + id * (2.0 * lam * sf);
            let den = 4.0 * lam * sp * sf + 4.0 * g * (1.0 + sp * sf) + harden;
            let flow = e1 * (2.0 * g * (1.0 + sp)) - e3 * (2.0 * g * (1.0 - sp)) + id * (2.0 * lam * sp);
            Ok(d[0] * sig[0]
                + d[1] * sig[1]
                + d[2] * sig[2]
                + (outer(&e1, &e1) + outer(&e2, &e2) + outer(&e3, &e3)) * (2.0 * g)
                + ii * lam
                - outer(&flow, &num) * (1.0 / den))
        }
        Branch::LeftEdge => {
            let (e12, e3) = spec.e12().zip(spec.e3()).ok_or_else(|| mismatch(branch, spec))?;
            let de3 = match spec.derivatives()? {
                Derivatives::Distinct(d) => d[2],
                Derivatives::TopPair(d) => d,
                Derivatives::BottomPair(_) => return Err(mismatch(branch, spec)),
            };
            let num = e12 * (g * (1.0 + sf)) - e3 * (2.0 * g * (1.0 - sf)) + id * (2.0 * lam * sf);
            let den = 4.0 * lam * sp * sf + g * (1.0 + sp) * (1.0 + sf) + 2.0 * g * (1.0 - sp) * (1.0 - sf) + harden;
            let flow = e12 * (g * (1.0 + sp)) - e3 * (2.0 * g * (1.0 - sp)) + id * (2.0 * lam * sp);
            Ok(de3 * (sig[2] - sig[0]) + outer(&e12, &e12) * g + outer(&e3, &e3) * (2.0 * g) + ii * lam
                - outer(&flow, &num) * (1.0 / den))
        }
        Branch::RightEdge => {
            let (e1, e23) = spec.e1().zip(spec.e23()).ok_or_else(|| mismatch(branch, spec))?;
            let de1 = match spec.derivatives()? {
                Derivatives::Distinct(d) => d[0],
                Derivatives::BottomPair(d) => d,
                Derivatives::TopPair(_) => return Err(mismatch(branch, spec)),
            };
            let num = e1 * (2.0 * g * (1.0 + sf)) - e23 * (g * (1.0 - sf)) + id * (2.0 * lam * sf);
            let den = 4.0 * lam * sp * sf + 2.0 * g * (1.0 + sp) * (1.0 + sf) + g * (1.0 - sp) * (1.0 - sf) + harden;
            let flow = e1 * (2.0 * g * (1.0 + sp)) - e23 * (g * (1.0 - sp)) + id * (2.0 * lam * sp);
            Ok(de1 * (sig[0] - sig[2]) + outer(&e1, &e1) * (2.0 * g) + outer(&e23, &e23) * g + ii * lam
                - outer(&flow, &num) * (1.0 / den))
        }
        Branch::Apex => {
            let ks = k * sp * sf;
            Ok(ii * (k * (1.0 - ks / (ks + h1 * cf * cf))))
        }
    }
}

/// Tangent for a trial state and its return.
pub fn tangent_of<const N: usize>(trial: &TrialState<N>, outcome: &ReturnOutcome<N>, params: &MaterialParams) -> Result<Tangent4<N>> {
    consistent_tangent(&TangentRequest::new(trial, outcome, params))
}

/// Operator norm of a tangent matrix with respect to the tensor (Frobenius)
/// norms of stress and strain.
pub fn operator_norm<const N: usize>(c: &Tangent4<N>) -> f64 {
    let mut m = DMatrix::from_column_slice(N, N, c.as_slice());
    for a in 0..N {
        let w = if is_shear::<N>(a) { std::f64::consts::SQRT_2 } else { 1.0 };
        for b in 0..N {
            m[(a, b)] *= w;
            m[(b, a)] *= w;
        }
    }
    m.singular_values().max()
}
