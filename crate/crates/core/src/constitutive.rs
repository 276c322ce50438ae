//! Implicit Euler step of the Mohr-Coulomb model with nonassociative flow and
//! isotropic hardening: elastic predictor, a priori branch selection on the
//! unified function `q`, scalar root solve for the plastic multiplier and
//! stress reconstruction in the trial eigenbasis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{spectrum, Multiplicity, Projections, Spectrum, TOL_EQ};
use crate::tensor_algebra::{apply, apply_compliance, elastic_stiffness, lame_lambda, Kind, SymTensor, Tangent4};

/// Isotropic hardening `H(ebar)` with `H(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum HardeningModel {
    Perfect,
    Linear {
        /// Slope `H~`.
        slope: f64,
    },
    /// Quadratic growth with initial slope `H~` that saturates at `c - c0`
    /// where its slope reaches zero, then stays constant.
    SaturatedQuadratic {
        slope: f64,
        /// `c - c0`, the total cohesion gain.
        gain: f64,
    },
}

impl HardeningModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HardeningModel::Perfect => Ok(()),
            HardeningModel::Linear { slope } => {
                if slope.is_finite() && slope >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("hardening.slope", format!("must be finite and >= 0, got {slope}")))
                }
            }
            HardeningModel::SaturatedQuadratic { slope, gain } => {
                if !(slope.is_finite() && slope > 0.0) {
                    return Err(Error::param("hardening.slope", format!("must be positive, got {slope}")));
                }
                if !(gain.is_finite() && gain > 0.0) {
                    return Err(Error::param("hardening.gain", format!("c - c0 must be positive, got {gain}")));
                }
                Ok(())
            }
        }
    }

    /// Hardening variable value where the saturated model reaches its plateau.
    pub fn kink(&self) -> Option<f64> {
        match *self {
            HardeningModel::SaturatedQuadratic { slope, gain } => Some(2.0 * gain / slope),
            _ => None,
        }
    }

    pub fn value(&self, e: f64) -> f64 {
        let e = e.max(0.0);
        match *self {
            HardeningModel::Perfect => 0.0,
            HardeningModel::Linear { slope } => slope * e,
            HardeningModel::SaturatedQuadratic { slope, gain } => {
                if e < 2.0 * gain / slope {
                    slope * e - slope * slope * e * e / (4.0 * gain)
                } else {
                    gain
                }
            }
        }
    }

    /// Slope `H'(e)`; the left one-sided value at the saturation kink.
    pub fn slope(&self, e: f64) -> f64 {
        let e = e.max(0.0);
        match *self {
            HardeningModel::Perfect => 0.0,
            HardeningModel::Linear { slope } => slope,
            HardeningModel::SaturatedQuadratic { slope, gain } => {
                if e <= 2.0 * gain / slope {
                    (slope - slope * slope * e / (2.0 * gain)).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Elastic constants, Mohr-Coulomb data and hardening.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    k: f64,
    g: f64,
    c0: f64,
    phi: f64,
    psi: f64,
    hardening: HardeningModel,
    lam: f64,
    sphi: f64,
    cphi: f64,
    spsi: f64,
}

impl MaterialParams {
    /// Angles in radians.
    pub fn new(k: f64, g: f64, c0: f64, phi: f64, psi: f64, hardening: HardeningModel) -> Result<Self> {
        let pos = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        pos("K", k)?;
        pos("G", g)?;
        pos("c0", c0)?;
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(phi > 0.0 && phi < half_pi) {
            return Err(Error::param("phi", format!("friction angle must lie in (0, pi/2), got {phi}")));
        }
        if !(psi > 0.0 && psi < half_pi) {
            return Err(Error::param("psi", format!("dilatancy angle must lie in (0, pi/2), got {psi}")));
        }
        hardening.validate()?;
        Ok(Self {
            k,
            g,
            c0,
            phi,
            psi,
            hardening,
            lam: lame_lambda(k, g),
            sphi: phi.sin(),
            cphi: phi.cos(),
            spsi: psi.sin(),
        })
    }

    /// Young's modulus and Poisson ratio instead of `K`, `G`; angles in degrees.
    pub fn from_young_degrees(e: f64, nu: f64, c0: f64, phi_deg: f64, psi_deg: f64, hardening: HardeningModel) -> Result<Self> {
        let (k, g) = crate::tensor_algebra::moduli_from_young(e, nu)?;
        Self::new(k, g, c0, phi_deg.to_radians(), psi_deg.to_radians(), hardening)
    }

    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn lambda(&self) -> f64 {
        self.lam
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn psi(&self) -> f64 {
        self.psi
    }
    pub fn sin_phi(&self) -> f64 {
        self.sphi
    }
    pub fn cos_phi(&self) -> f64 {
        self.cphi
    }
    pub fn sin_psi(&self) -> f64 {
        self.spsi
    }
    pub fn hardening(&self) -> &HardeningModel {
        &self.hardening
    }

    /// Hydrostatic pressure of the apex for cohesion `c0 + kappa`.
    pub fn apex_pressure(&self, kappa: f64) -> f64 {
        (self.c0 + kappa) * self.cphi / self.sphi
    }

    /// Flow-rule bounds `a = 1 + sin psi`, `b = 1 - sin psi`.
    pub fn flow_bounds(&self) -> (f64, f64) {
        (1.0 + self.spsi, 1.0 - self.spsi)
    }

    pub fn elastic<const N: usize>(&self) -> Tangent4<N> {
        elastic_stiffness::<N>(self.k, self.g).expect("moduli validated at construction")
    }
}

/// Plastic strain and hardening variable at an integration point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointState<const N: usize> {
    pub ep: SymTensor<N>,
    pub ebar: f64,
}

impl<const N: usize> Default for PointState<N> {
    fn default() -> Self {
        Self { ep: SymTensor::zeros(Kind::Strain), ebar: 0.0 }
    }
}

/// Threshold multipliers separating the return branches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub sl: f64,
    pub sr: f64,
    pub la: f64,
    pub ra: f64,
}

impl Thresholds {
    /// `true` for the ordering `sl <= ra <= la <= sr` (left edge reachable).
    pub fn left_case(&self) -> bool {
        self.sl <= self.sr
    }

    /// Upper end of the smooth interval.
    pub fn smooth_end(&self) -> f64 {
        self.sl.min(self.sr)
    }

    /// Start of the apex interval.
    pub fn apex_start(&self) -> f64 {
        self.la.max(self.ra)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialState<const N: usize> {
    /// Total strain of the step.
    pub eps: SymTensor<N>,
    pub prev: PointState<N>,
    pub eps_tr: SymTensor<N>,
    pub sigma_tr: SymTensor<N>,
    /// Spectrum of the trial strain; shared with the trial stress.
    pub spectrum: Spectrum<N>,
    /// Ordered trial principal stresses.
    pub s: [f64; 3],
    pub ebar_tr: f64,
    pub thresholds: Thresholds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Elastic,
    Smooth,
    LeftEdge,
    RightEdge,
    Apex,
}

impl Branch {
    pub const PLASTIC: [Branch; 4] = [Branch::Smooth, Branch::LeftEdge, Branch::RightEdge, Branch::Apex];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Branch::Elastic => "elastic",
            Branch::Smooth => "smooth",
            Branch::LeftEdge => "left-edge",
            Branch::RightEdge => "right-edge",
            Branch::Apex => "apex",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnOutcome<const N: usize> {
    pub sigma: SymTensor<N>,
    /// Ordered principal stresses.
    pub principal: [f64; 3],
    pub dlambda: f64,
    pub branch: Branch,
    pub state: PointState<N>,
    /// `H'` at the updated hardening variable.
    pub h1: f64,
    pub iterations: usize,
}

/// Scalar root solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootConfig {
    pub max_iter: usize,
    /// Run exactly this many safeguarded Newton sweeps instead of iterating to tolerance.
    pub fixed_sweeps: Option<usize>,
    /// Relative tolerance for equal eigenvalues.
    pub tol_eq: f64,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self { max_iter: 100, fixed_sweeps: None, tol_eq: TOL_EQ }
    }
}

/// `f = (1 + sin phi) s1 - (1 - sin phi) s3 - 2 (c0 + kappa) cos phi`.
pub fn yield_value(s1: f64, s3: f64, kappa: f64, p: &MaterialParams) -> f64 {
    (1.0 + p.sphi) * s1 - (1.0 - p.sphi) * s3 - 2.0 * (p.c0 + kappa) * p.cphi
}

/// Principal trial stresses from ordered trial strains.
pub fn principal_trial_stress(e: [f64; 3], p: &MaterialParams) -> [f64; 3] {
    let tr = e[0] + e[1] + e[2];
    [p.lam * tr + 2.0 * p.g * e[0], p.lam * tr + 2.0 * p.g * e[1], p.lam * tr + 2.0 * p.g * e[2]]
}

/// Threshold multipliers for ordered trial principal stresses.
pub fn thresholds(s: [f64; 3], p: &MaterialParams) -> Thresholds {
    let (g, sp) = (p.g, p.spsi);
    Thresholds {
        sl: (s[0] - s[1]) / (2.0 * g * (1.0 + sp)),
        sr: (s[1] - s[2]) / (2.0 * g * (1.0 - sp)),
        la: (s[0] + s[1] - 2.0 * s[2]) / (2.0 * g * (3.0 - sp)),
        ra: (2.0 * s[0] - s[1] - s[2]) / (2.0 * g * (3.0 + sp)),
    }
}

/// Elastic predictor with the default eigenvalue tolerance.
pub fn make_trial<const N: usize>(eps: &SymTensor<N>, prev: &PointState<N>, p: &MaterialParams) -> Result<TrialState<N>> {
    make_trial_with_tol(eps, prev, p, TOL_EQ)
}

pub fn make_trial_with_tol<const N: usize>(
    eps: &SymTensor<N>,
    prev: &PointState<N>,
    p: &MaterialParams,
    tol_eq: f64,
) -> Result<TrialState<N>> {
    let eps = eps.to_kind(Kind::Strain);
    let eps_tr = eps - prev.ep;
    let spectrum = spectrum(&eps_tr, tol_eq)?;
    let sigma_tr = apply(&p.elastic::<N>(), &eps_tr);
    let s = principal_trial_stress(spectrum.values, p);
    Ok(TrialState {
        eps,
        prev: *prev,
        eps_tr,
        sigma_tr,
        thresholds: thresholds(s, p),
        spectrum,
        s,
        ebar_tr: prev.ebar,
    })
}

/// Affine part `L` and slope `A` of `q_X(g) = L - 2 (c0 + h(g)) cos phi - g A`.
fn branch_coeffs(branch: Branch, s: [f64; 3], p: &MaterialParams) -> (f64, f64) {
    let (sf, sp, g, lam) = (p.sphi, p.spsi, p.g, p.lam);
    let base = 4.0 * lam * sp * sf;
    match branch {
        Branch::Elastic | Branch::Smooth => ((1.0 + sf) * s[0] - (1.0 - sf) * s[2], base + 4.0 * g * (1.0 + sp * sf)),
        Branch::LeftEdge => (
            0.5 * (1.0 + sf) * (s[0] + s[1]) - (1.0 - sf) * s[2],
            base + g * (1.0 + sp) * (1.0 + sf) + 2.0 * g * (1.0 - sp) * (1.0 - sf),
        ),
        Branch::RightEdge => (
            (1.0 + sf) * s[0] - 0.5 * (1.0 - sf) * (s[1] + s[2]),
            base + 2.0 * g * (1.0 + sp) * (1.0 + sf) + g * (1.0 - sp) * (1.0 - sf),
        ),
        Branch::Apex => (2.0 / 3.0 * (s[0] + s[1] + s[2]) * sf, 4.0 * p.k * sp * sf),
    }
}

fn hardening_term(gamma: f64, ebar_tr: f64, p: &MaterialParams) -> (f64, f64) {
    let e = ebar_tr + 2.0 * gamma * p.cphi;
    let h = p.hardening.value(e);
    let dh = p.hardening.slope(e) * 2.0 * p.cphi;
    (-2.0 * (p.c0 + h) * p.cphi, -2.0 * dh * p.cphi)
}

/// Branch function `q_X(gamma)` for trial principal stresses `s`.
pub fn q_branch_raw(branch: Branch, gamma: f64, s: [f64; 3], ebar_tr: f64, p: &MaterialParams) -> f64 {
    let (l, a) = branch_coeffs(branch, s, p);
    let (h, _) = hardening_term(gamma, ebar_tr, p);
    l + h - gamma * a
}

fn q_branch_slope_raw(branch: Branch, gamma: f64, s: [f64; 3], ebar_tr: f64, p: &MaterialParams) -> f64 {
    let (_, a) = branch_coeffs(branch, s, p);
    let (_, dh) = hardening_term(gamma, ebar_tr, p);
    dh - a
}

pub fn q_branch<const N: usize>(branch: Branch, gamma: f64, t: &TrialState<N>, p: &MaterialParams) -> f64 {
    q_branch_raw(branch, gamma, t.s, t.ebar_tr, p)
}

pub fn q_branch_slope<const N: usize>(branch: Branch, gamma: f64, t: &TrialState<N>, p: &MaterialParams) -> f64 {
    q_branch_slope_raw(branch, gamma, t.s, t.ebar_tr, p)
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Unified `q` for the case `gamma_sl <= gamma_sr`.
pub fn q_left_form(gamma: f64, s: [f64; 3], ebar_tr: f64, th: &Thresholds, p: &MaterialParams) -> f64 {
    let (g, sp, sf) = (p.g, p.spsi, p.sphi);
    q_branch_raw(Branch::Smooth, gamma, s, ebar_tr, p)
        + g * (1.0 + sp) * (1.0 + sf) * pos(gamma - th.sl)
        + g * (3.0 - sp) * (3.0 - sf) / 3.0 * pos(gamma - th.la)
}

/// Unified `q` for the case `gamma_sr <= gamma_sl`.
pub fn q_right_form(gamma: f64, s: [f64; 3], ebar_tr: f64, th: &Thresholds, p: &MaterialParams) -> f64 {
    let (g, sp, sf) = (p.g, p.spsi, p.sphi);
    q_branch_raw(Branch::Smooth, gamma, s, ebar_tr, p)
        + g * (1.0 - sp) * (1.0 - sf) * pos(gamma - th.sr)
        + g * (3.0 + sp) * (3.0 + sf) / 3.0 * pos(gamma - th.ra)
}

/// The unified, continuous and decreasing function whose root is the plastic multiplier.
pub fn q_unified<const N: usize>(gamma: f64, t: &TrialState<N>, p: &MaterialParams) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", format!("must be nonnegative, got {gamma}")));
    }
    let th = &t.thresholds;
    Ok(if th.left_case() {
        q_left_form(gamma, t.s, t.ebar_tr, th, p)
    } else {
        q_right_form(gamma, t.s, t.ebar_tr, th, p)
    })
}

struct RootResult {
    gamma: f64,
    iterations: usize,
}

/// Safeguarded Newton on a decreasing function with `q(lo) >= 0 >= q(hi)`.
fn solve_root(q: impl Fn(f64) -> (f64, f64), lo: f64, hi: f64, fscale: f64, cfg: &RootConfig) -> Result<RootResult> {
    let (mut lo, mut hi) = (lo, hi);
    let ftol = 1e-12 * fscale;
    let mut x = lo;
    let max_iter = cfg.fixed_sweeps.unwrap_or(cfg.max_iter);
    for it in 0..max_iter {
        let (fx, dfx) = q(x);
        if cfg.fixed_sweeps.is_none() && fx.abs() <= ftol {
            // A final Newton step removes the tolerance-sized error left in x.
            let polished = x - fx / dfx;
            let gamma = if dfx < 0.0 && polished >= lo && polished <= hi { polished } else { x };
            return Ok(RootResult { gamma, iterations: it + 1 });
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if cfg.fixed_sweeps.is_none() && hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            return Ok(RootResult { gamma: x, iterations: it });
        }
        let newton = x - fx / dfx;
        let next = if dfx < 0.0 && newton >= lo && newton <= hi { newton } else { 0.5 * (lo + hi) };
        if cfg.fixed_sweeps.is_none() && (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(RootResult { gamma: next, iterations: it + 1 });
        }
        x = next;
    }
    if cfg.fixed_sweeps.is_some() {
        return Ok(RootResult { gamma: x, iterations: max_iter });
    }
    let (fx, _) = q(x);
    if fx.abs() <= ftol {
        return Ok(RootResult { gamma: x, iterations: max_iter });
    }
    Err(Error::RootNotConverged { lo, hi, iterations: max_iter })
}

/// Root of a decreasing `q` expected in `[lo, cap]`. The initial upper end `hi`
/// comes from a closed-form bound and is pushed right if rounding left `q(hi) > 0`.
fn bracketed_root(q: impl Fn(f64) -> (f64, f64), lo: f64, hi: f64, cap: f64, fscale: f64, cfg: &RootConfig) -> Result<RootResult> {
    let slack = 1e-9 * fscale;
    let ql = q(lo).0;
    if ql <= 0.0 {
        if ql >= -slack {
            return Ok(RootResult { gamma: lo, iterations: 0 });
        }
        return Err(Error::Inconsistent(format!("q({lo:e}) = {ql:e} < 0 at the lower end of the bracket")));
    }
    let mut hi = hi.max(lo);
    for _ in 0..64 {
        let (f, df) = q(hi);
        if f <= 0.0 {
            return solve_root(q, lo, hi, fscale, cfg);
        }
        if hi >= cap {
            break;
        }
        let step = if df < 0.0 { 2.0 * f / -df } else { 0.0 };
        hi = (hi + step.max(4.0 * f64::EPSILON * hi.abs().max(1e-300))).min(cap);
    }
    Err(Error::Inconsistent(format!("no sign change of q on [{lo:e}, {hi:e}]")))
}

/// Principal stresses returned by a branch for multiplier `dl`.
pub fn branch_stresses(branch: Branch, dl: f64, s: [f64; 3], p: &MaterialParams) -> [f64; 3] {
    let (lam, g, sp) = (p.lam, p.g, p.spsi);
    let c1 = 2.0 * lam * sp + 2.0 * g * (1.0 + sp);
    let c2 = 2.0 * lam * sp;
    let c3 = 2.0 * lam * sp - 2.0 * g * (1.0 - sp);
    match branch {
        Branch::Elastic => s,
        Branch::Smooth => [s[0] - dl * c1, s[1] - dl * c2, s[2] - dl * c3],
        Branch::LeftEdge => {
            let m = 0.5 * (s[0] + s[1]) - dl * (2.0 * lam * sp + g * (1.0 + sp));
            [m, m, s[2] - dl * c3]
        }
        Branch::RightEdge => {
            let m = 0.5 * (s[1] + s[2]) - dl * (2.0 * lam * sp - g * (1.0 - sp));
            [s[0] - dl * c1, m, m]
        }
        Branch::Apex => {
            let m = (s[0] + s[1] + s[2]) / 3.0 - 2.0 * p.k * sp * dl;
            [m, m, m]
        }
    }
}

/// Branch selected by the a priori criteria, with the bracket of its root.
pub fn select_branch<const N: usize>(t: &TrialState<N>, p: &MaterialParams) -> (Branch, f64, f64) {
    let s = t.s;
    let e = t.ebar_tr;
    let th = &t.thresholds;
    if q_branch_raw(Branch::Smooth, 0.0, s, e, p) <= 0.0 {
        return (Branch::Elastic, 0.0, 0.0);
    }
    let gmin = th.smooth_end();
    if q_branch_raw(Branch::Smooth, gmin, s, e, p) <= 0.0 {
        return (Branch::Smooth, 0.0, gmin);
    }
    let bound = |b: Branch| {
        let (l, a) = branch_coeffs(b, s, p);
        (l - 2.0 * p.c0 * p.cphi) / a
    };
    if th.left_case() {
        if th.sl < th.la && q_branch_raw(Branch::LeftEdge, th.la, s, e, p) <= 0.0 {
            return (Branch::LeftEdge, th.sl, th.la);
        }
        (Branch::Apex, th.la, bound(Branch::Apex).max(th.la))
    } else {
        if th.sr < th.ra && q_branch_raw(Branch::RightEdge, th.ra, s, e, p) <= 0.0 {
            return (Branch::RightEdge, th.sr, th.ra);
        }
        (Branch::Apex, th.ra, bound(Branch::Apex).max(th.ra))
    }
}

fn rebuild<const N: usize>(branch: Branch, sig: [f64; 3], spec: &Spectrum<N>) -> Result<SymTensor<N>> {
    let mismatch = || Error::BranchMismatch { branch: branch.to_string(), class: spec.class.to_string() };
    Ok(match branch {
        Branch::Elastic => unreachable!("elastic stress is the trial stress"),
        Branch::Smooth => match &spec.projections {
            Projections::Distinct(e) => e[0] * sig[0] + e[1] * sig[1] + e[2] * sig[2],
            _ => return Err(mismatch()),
        },
        Branch::LeftEdge => {
            let (e12, e3) = spec.e12().zip(spec.e3()).ok_or_else(mismatch)?;
            e12 * sig[0] + e3 * sig[2]
        }
        Branch::RightEdge => {
            let (e1, e23) = spec.e1().zip(spec.e23()).ok_or_else(mismatch)?;
            e1 * sig[0] + e23 * sig[2]
        }
        Branch::Apex => SymTensor::identity(Kind::Stress) * sig[0],
    })
}

/// Plastic strain consistent with the total strain and stress.
pub fn update_plastic_strain<const N: usize>(eps: &SymTensor<N>, sigma: &SymTensor<N>, p: &MaterialParams) -> SymTensor<N> {
    eps.to_kind(Kind::Strain) - apply_compliance(p.k, p.g, sigma)
}

/// Select the return branch, solve for the plastic multiplier and rebuild the state.
pub fn classify_and_solve<const N: usize>(t: &TrialState<N>, p: &MaterialParams, cfg: &RootConfig) -> Result<ReturnOutcome<N>> {
    let (branch, lo, hi) = select_branch(t, p);
    if branch == Branch::Elastic {
        return Ok(ReturnOutcome {
            sigma: t.sigma_tr,
            principal: t.s,
            dlambda: 0.0,
            branch,
            state: t.prev,
            h1: p.hardening.slope(t.ebar_tr),
            iterations: 0,
        });
    }
    let fscale = 2.0 * p.c0 * p.cphi;
    let (hi, cap) = match branch {
        Branch::Smooth => {
            let (l, a) = branch_coeffs(Branch::Smooth, t.s, p);
            (hi.min(((l - fscale) / a).max(lo)), hi)
        }
        Branch::Apex => (hi, f64::INFINITY),
        _ => (hi, hi),
    };
    let q = |g: f64| (q_branch(branch, g, t, p), q_branch_slope(branch, g, t, p));
    let root = bracketed_root(q, lo, hi, cap, fscale, cfg).map_err(|e| match e {
        Error::Inconsistent(m) => Error::Inconsistent(format!("q_{branch}: {m}")),
        other => other,
    })?;
    let dl = root.gamma;
    let principal = branch_stresses(branch, dl, t.s, p);
    let sigma = rebuild(branch, principal, &t.spectrum)?;
    let ebar = t.ebar_tr + 2.0 * dl * p.cphi;
    let ep = update_plastic_strain(&t.eps, &sigma, p);
    Ok(ReturnOutcome {
        sigma,
        principal,
        dlambda: dl,
        branch,
        state: PointState { ep, ebar },
        h1: p.hardening.slope(ebar),
        iterations: root.iterations,
    })
}

/// Solve `q_X = 0` for a single branch on `[0, inf)`, ignoring the decision
/// criteria. Returns `None` when `q_X(0) <= 0`.
pub fn solve_branch_unconstrained(branch: Branch, s: [f64; 3], ebar_tr: f64, p: &MaterialParams, cfg: &RootConfig) -> Result<Option<(f64, [f64; 3])>> {
    if branch == Branch::Elastic || q_branch_raw(branch, 0.0, s, ebar_tr, p) <= 0.0 {
        return Ok(None);
    }
    let (l, a) = branch_coeffs(branch, s, p);
    let fscale = 2.0 * p.c0 * p.cphi;
    let q = |g: f64| (q_branch_raw(branch, g, s, ebar_tr, p), q_branch_slope_raw(branch, g, s, ebar_tr, p));
    let root = bracketed_root(q, 0.0, ((l - fscale) / a).max(0.0), f64::INFINITY, fscale, cfg)?;
    Ok(Some((root.gamma, branch_stresses(branch, root.gamma, s, p))))
}

/// Elastic predictor followed by the plastic corrector.
pub fn return_map<const N: usize>(
    eps: &SymTensor<N>,
    prev: &PointState<N>,
    p: &MaterialParams,
    cfg: &RootConfig,
) -> Result<(TrialState<N>, ReturnOutcome<N>)> {
    let t = make_trial_with_tol(eps, prev, p, cfg.tol_eq)?;
    let out = classify_and_solve(&t, p, cfg)?;
    Ok((t, out))
}

/// Multiplicity class implied by a branch for the returned stress.
pub fn branch_multiplicity(branch: Branch) -> Option<Multiplicity> {
    match branch {
        Branch::Elastic => None,
        Branch::Smooth => Some(Multiplicity::Distinct),
        Branch::LeftEdge => Some(Multiplicity::TopPair),
        Branch::RightEdge => Some(Multiplicity::BottomPair),
        Branch::Apex => Some(Multiplicity::Triple),
    }
}
