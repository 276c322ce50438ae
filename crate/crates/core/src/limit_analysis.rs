//! Direct (load-controlled) and indirect (settlement-controlled) incremental
//! limit analysis with semismooth Newton iterations.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Factorization, FemModel};

pub trait LinearSolver {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>>;
}

impl LinearSolver for Factorization {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Factorization::solve(self, rhs)
    }
}

/// Discrete equilibrium `F(u) = zeta l` with history-dependent `F`.
pub trait NonlinearSystem {
    type Solver: LinearSolver;

    fn size(&self) -> usize;

    fn load(&self) -> &[f64];

    /// Internal forces at `u` and a factorized tangent.
    fn linearize(&mut self, u: &[f64]) -> Result<(Vec<f64>, Self::Solver)>;

    /// Accept `u` as converged; returns the load factor recovered from the
    /// support reactions when the system can compute one.
    fn commit(&mut self, u: &[f64]) -> Result<Option<f64>>;
}

impl<const N: usize> NonlinearSystem for FemModel<N> {
    type Solver = Factorization;

    fn size(&self) -> usize {
        self.n_free()
    }

    fn load(&self) -> &[f64] {
        FemModel::load(self)
    }

    fn linearize(&mut self, u: &[f64]) -> Result<(Vec<f64>, Factorization)> {
        let f = self.internal_forces(u)?;
        let k = self.tangent_stiffness()?;
        Ok((f, k.factorize()?))
    }

    fn commit(&mut self, u: &[f64]) -> Result<Option<f64>> {
        FemModel::commit(self, u)?;
        Ok(Some(self.reaction_load_factor(u)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    Indirect,
}

/// Control functional `alpha = b^T u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    /// Settlement of the crest corner, `b = -e_{A,y}`.
    CornerA,
    /// Work of the unit load, `b = l`.
    Load,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub method: Method,
    pub eps_newton: f64,
    pub max_iter: usize,
    /// Initial load increment of the direct method.
    pub dzeta0: f64,
    /// Settlement increment above which the direct method halves its load increment.
    pub dalpha_cap: f64,
    /// Initial settlement increment of the indirect method.
    pub dalpha0: f64,
    /// Load increments at or below this double the settlement increment.
    pub stagnation: f64,
    /// Stop once the control value exceeds this; defaults to 4 (2D) or 5 (3D).
    pub alpha_end: Option<f64>,
    pub control: ControlKind,
    /// Smallest admissible load increment of the direct method.
    pub min_dzeta: f64,
    /// Consecutive halvings of the settlement increment before giving up.
    pub max_retries: usize,
    /// Upper bound on attempted steps.
    pub max_steps: usize,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            method: Method::Indirect,
            eps_newton: 1e-12,
            max_iter: 50,
            dzeta0: 0.5,
            dalpha_cap: 0.5,
            dalpha0: 0.0414,
            stagnation: 5e-3,
            alpha_end: None,
            control: ControlKind::CornerA,
            min_dzeta: 1e-8,
            max_retries: 5,
            max_steps: 1000,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_newton", self.eps_newton),
            ("dzeta0", self.dzeta0),
            ("dalpha_cap", self.dalpha_cap),
            ("dalpha0", self.dalpha0),
            ("stagnation", self.stagnation),
            ("min_dzeta", self.min_dzeta),
            ("alpha_end", self.alpha_end.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be at least 1"));
        }
        Ok(())
    }

    pub fn alpha_end_for(&self, dim: usize) -> f64 {
        self.alpha_end.unwrap_or(if dim == 3 { 5.0 } else { 4.0 })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub zeta: f64,
    pub alpha: f64,
    /// Linear solves (tangent factorizations) performed.
    pub iterations: usize,
    pub converged: bool,
    /// `|du| / (|u_new| + |u_old|)` per iteration.
    pub residuals: Vec<f64>,
    pub wall_time_s: f64,
    /// Load factor from the support reactions of the committed state.
    pub audit_zeta: Option<f64>,
    /// Failure reason of a rejected attempt.
    pub note: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// The control value passed the requested end.
    Reached,
    /// The direct method's load increment fell below its minimum.
    IncrementUnderflow,
    /// The indirect method exhausted its retries.
    RetryLimit,
    /// The attempt budget ran out.
    MaxSteps,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Reached => "settlement limit reached",
            Self::IncrementUnderflow => "load increment underflow",
            Self::RetryLimit => "retry limit exhausted",
            Self::MaxSteps => "step budget exhausted",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadPath {
    pub method: Method,
    /// All attempts in order; rejected ones have `converged == false`.
    pub steps: Vec<StepRecord>,
    pub termination: Termination,
    /// Displacement of the last accepted step.
    pub final_u: Vec<f64>,
}

impl LoadPath {
    pub fn accepted(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(|s| s.converged)
    }

    pub fn failed(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(|s| !s.converged)
    }

    /// Estimate of the limit load factor: the largest accepted `zeta`.
    pub fn zeta_max(&self) -> f64 {
        self.accepted().map(|s| s.zeta).fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }

    /// Accepted `(alpha, zeta)` pairs prefixed with the unloaded state.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, 0.0)).chain(self.accepted().map(|s| (s.alpha, s.zeta))).collect()
    }

    /// `zeta` at control value `alpha` by linear interpolation of the accepted path.
    pub fn zeta_at(&self, alpha: f64) -> Option<f64> {
        let c = self.curve();
        c.windows(2).find(|w| alpha >= w[0].0 && alpha <= w[1].0).map(|w| {
            let t = if w[1].0 > w[0].0 { (alpha - w[0].0) / (w[1].0 - w[0].0) } else { 1.0 };
            w[0].1 + t * (w[1].1 - w[0].1)
        })
    }

    /// CSV with columns `k,zeta,alpha,iters,converged,wall_time_s`; wall times
    /// are written as zero unless `timing` is set, so that repeated runs give
    /// identical files.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut s = String::from("k,zeta,alpha,iters,converged,wall_time_s\n");
        for r in &self.steps {
            let t = if timing { r.wall_time_s } else { 0.0 };
            let _ = writeln!(s, "{},{:.16e},{:.16e},{},{},{:.16e}", r.k, r.zeta, r.alpha, r.iterations, r.converged, t);
        }
        s
    }

    pub fn write_csv(&self, path: &Path, timing: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(timing)).map_err(|e| Error::io(path, e))
    }
}

/// Outcome of one Newton solve.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub note: Option<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn stopping_value(du: &[f64], u_new: &[f64], u_old: &[f64]) -> f64 {
    let num = norm(du);
    if num == 0.0 {
        return 0.0;
    }
    num / (norm(u_new) + norm(u_old))
}

/// Semismooth Newton for `F(u) = zeta l` from `u0`. Failures inside the
/// iteration (constitutive or linear-solver errors, non-finite iterates) are
/// reported as nonconvergence.
pub fn newton_zeta<S: NonlinearSystem>(sys: &mut S, zeta: f64, u0: &[f64], cfg: &ControlConfig) -> (Vec<f64>, NewtonReport) {
    let mut u = u0.to_vec();
    let mut report = NewtonReport { converged: false, iterations: 0, residuals: Vec::new(), note: None };
    for _ in 0..cfg.max_iter {
        let step = (|| -> Result<Vec<f64>> {
            let (f, k) = sys.linearize(&u)?;
            let rhs: Vec<f64> = sys.load().iter().zip(&f).map(|(l, f)| zeta * l - f).collect();
            k.solve(&rhs)
        })();
        let du = match step {
            Ok(du) => du,
            Err(e) => {
                report.note = Some(e.to_string());
                return (u, report);
            }
        };
        report.iterations += 1;
        let u_new: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
        let crit = stopping_value(&du, &u_new, &u);
        report.residuals.push(crit);
        u = u_new;
        if !crit.is_finite() {
            report.note = Some("non-finite iterate".into());
            return (u, report);
        }
        if crit <= cfg.eps_newton {
            report.converged = true;
            return (u, report);
        }
    }
    report.note = Some(format!("no convergence in {} iterations", cfg.max_iter));
    (u, report)
}

/// Newton for the pair `F(u) = zeta l`, `b^T u = alpha`. A degenerate
/// control (`|b^T w|` negligible) is returned as an error; other failures are
/// reported as nonconvergence.
pub fn newton_alpha<S: NonlinearSystem>(
    sys: &mut S,
    alpha: f64,
    u0: &[f64],
    zeta0: f64,
    b: &[f64],
    cfg: &ControlConfig,
) -> Result<(Vec<f64>, f64, NewtonReport)> {
    let mut u = u0.to_vec();
    let mut zeta = zeta0;
    let mut report = NewtonReport { converged: false, iterations: 0, residuals: Vec::new(), note: None };
    let bnorm = norm(b);
    for _ in 0..cfg.max_iter {
        let step = (|| -> Result<(Vec<f64>, Vec<f64>)> {
            let (f, k) = sys.linearize(&u)?;
            let l = sys.load();
            let rhs: Vec<f64> = l.iter().zip(&f).map(|(l, f)| zeta * l - f).collect();
            Ok((k.solve(&rhs)?, k.solve(l)?))
        })();
        let (v, w) = match step {
            Ok(x) => x,
            Err(e) => {
                report.note = Some(e.to_string());
                return Ok((u, zeta, report));
            }
        };
        report.iterations += 1;
        let bw = dot(b, &w);
        let threshold = 1e-14 * bnorm * norm(&w);
        if !(bw.abs() > threshold) {
            return Err(Error::SingularControl { bw, threshold });
        }
        let bu: f64 = dot(b, &u) + dot(b, &v);
        let dz = (alpha - bu) / bw;
        let du: Vec<f64> = v.iter().zip(&w).map(|(v, w)| v + dz * w).collect();
        let u_new: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
        let crit = stopping_value(&du, &u_new, &u);
        report.residuals.push(crit);
        u = u_new;
        zeta += dz;
        if !(crit.is_finite() && zeta.is_finite()) {
            report.note = Some("non-finite iterate".into());
            return Ok((u, zeta, report));
        }
        if crit <= cfg.eps_newton {
            report.converged = true;
            return Ok((u, zeta, report));
        }
    }
    report.note = Some(format!("no convergence in {} iterations", cfg.max_iter));
    Ok((u, zeta, report))
}

/// Accepted history used for extrapolated initial guesses.
struct History {
    params: Vec<f64>,
    zetas: Vec<f64>,
    us: Vec<Vec<f64>>,
}

impl History {
    fn new(n: usize) -> Self {
        Self { params: vec![0.0], zetas: vec![0.0], us: vec![vec![0.0; n]] }
    }

    /// Linear extrapolation in the step parameter from the last two accepted
    /// states; the first step starts from the unloaded state.
    fn predict(&self, param: f64) -> (Vec<f64>, f64) {
        let m = self.params.len();
        let last = &self.us[m - 1];
        if m < 2 {
            return (last.clone(), self.zetas[m - 1]);
        }
        let denom = self.params[m - 1] - self.params[m - 2];
        if denom == 0.0 {
            return (last.clone(), self.zetas[m - 1]);
        }
        let t = (param - self.params[m - 1]) / denom;
        let u = last.iter().zip(&self.us[m - 2]).map(|(a, b)| a + t * (a - b)).collect();
        let z = self.zetas[m - 1] + t * (self.zetas[m - 1] - self.zetas[m - 2]);
        (u, z)
    }

    fn push(&mut self, param: f64, zeta: f64, u: Vec<f64>) {
        self.params.push(param);
        self.zetas.push(zeta);
        self.us.push(u);
        if self.us.len() > 2 {
            self.params.remove(0);
            self.zetas.remove(0);
            self.us.remove(0);
        }
    }
}

/// Callback invoked after every accepted step with the committed displacement.
pub type Observer<'a, S> = &'a mut dyn FnMut(&S, &StepRecord, &[f64]) -> Result<()>;

pub fn run_direct<S: NonlinearSystem>(sys: &mut S, b: &[f64], alpha_end: f64, cfg: &ControlConfig) -> Result<LoadPath> {
    run_direct_observed(sys, b, alpha_end, cfg, &mut |_, _, _| Ok(()))
}

/// Prescribed load factors: keep the increment after a converged step whose
/// settlement increment stays below the cap, halve it otherwise or after a
/// failed attempt.
pub fn run_direct_observed<S: NonlinearSystem>(
    sys: &mut S,
    b: &[f64],
    alpha_end: f64,
    cfg: &ControlConfig,
    observer: Observer<'_, S>,
) -> Result<LoadPath> {
    cfg.validate()?;
    let mut hist = History::new(sys.size());
    let mut steps = Vec::new();
    let (mut zeta_last, mut alpha_last) = (0.0, 0.0);
    let mut dz = cfg.dzeta0;
    let mut k = 1;
    let termination = loop {
        if steps.len() >= cfg.max_steps {
            break Termination::MaxSteps;
        }
        let zeta = zeta_last + dz;
        let (u0, _) = hist.predict(zeta);
        let start = Instant::now();
        let (u, rep) = newton_zeta(sys, zeta, &u0, cfg);
        let mut rec = StepRecord {
            k,
            zeta,
            alpha: dot(b, &u),
            iterations: rep.iterations,
            converged: rep.converged,
            residuals: rep.residuals,
            wall_time_s: 0.0,
            audit_zeta: None,
            note: rep.note,
        };
        if rep.converged {
            rec.audit_zeta = sys.commit(&u)?;
            rec.wall_time_s = start.elapsed().as_secs_f64();
            observer(sys, &rec, &u)?;
            if !(rec.alpha - alpha_last < cfg.dalpha_cap) {
                dz *= 0.5;
            }
            zeta_last = zeta;
            alpha_last = rec.alpha;
            hist.push(zeta, zeta, u);
            steps.push(rec);
            k += 1;
            if alpha_last >= alpha_end {
                break Termination::Reached;
            }
        } else {
            rec.wall_time_s = start.elapsed().as_secs_f64();
            steps.push(rec);
            dz *= 0.5;
        }
        if dz < cfg.min_dzeta {
            break Termination::IncrementUnderflow;
        }
    };
    let final_u = hist.us.last().cloned().unwrap_or_default();
    Ok(LoadPath { method: Method::Direct, steps, termination, final_u })
}

pub fn run_indirect<S: NonlinearSystem>(sys: &mut S, b: &[f64], alpha_end: f64, cfg: &ControlConfig) -> Result<LoadPath> {
    run_indirect_observed(sys, b, alpha_end, cfg, &mut |_, _, _| Ok(()))
}

/// Prescribed control values: keep the increment while the load factor still
/// moves by more than the stagnation threshold, double it otherwise. A failed
/// attempt halves the increment and retries.
pub fn run_indirect_observed<S: NonlinearSystem>(
    sys: &mut S,
    b: &[f64],
    alpha_end: f64,
    cfg: &ControlConfig,
    observer: Observer<'_, S>,
) -> Result<LoadPath> {
    cfg.validate()?;
    if b.len() != sys.size() {
        return Err(Error::Inconsistent(format!("control vector has length {}, expected {}", b.len(), sys.size())));
    }
    let mut hist = History::new(sys.size());
    let mut steps = Vec::new();
    let (mut zeta_last, mut alpha_last) = (0.0, 0.0);
    let mut da = cfg.dalpha0;
    let mut retries = 0;
    let mut k = 1;
    let termination = loop {
        if steps.len() >= cfg.max_steps {
            break Termination::MaxSteps;
        }
        let alpha = alpha_last + da;
        let (u0, z0) = hist.predict(alpha);
        let start = Instant::now();
        let (u, zeta, rep) = newton_alpha(sys, alpha, &u0, z0, b, cfg)?;
        let mut rec = StepRecord {
            k,
            zeta,
            alpha,
            iterations: rep.iterations,
            converged: rep.converged,
            residuals: rep.residuals,
            wall_time_s: 0.0,
            audit_zeta: None,
            note: rep.note,
        };
        if rep.converged {
            rec.audit_zeta = sys.commit(&u)?;
            rec.wall_time_s = start.elapsed().as_secs_f64();
            observer(sys, &rec, &u)?;
            if (zeta - zeta_last).abs() <= cfg.stagnation {
                da *= 2.0;
            }
            zeta_last = zeta;
            alpha_last = alpha;
            hist.push(alpha, zeta, u);
            steps.push(rec);
            retries = 0;
            k += 1;
            if alpha_last >= alpha_end {
                break Termination::Reached;
            }
        } else {
            rec.wall_time_s = start.elapsed().as_secs_f64();
            steps.push(rec);
            retries += 1;
            if retries > cfg.max_retries {
                break Termination::RetryLimit;
            }
            da *= 0.5;
        }
    };
    let final_u = hist.us.last().cloned().unwrap_or_default();
    Ok(LoadPath { method: Method::Indirect, steps, termination, final_u })
}

/// Indirect method through prescribed increasing control values. A step that
/// fails is split at its midpoint, at most `max_retries` times in a row.
pub fn run_indirect_at<S: NonlinearSystem>(sys: &mut S, b: &[f64], alphas: &[f64], cfg: &ControlConfig) -> Result<LoadPath> {
    cfg.validate()?;
    if b.len() != sys.size() {
        return Err(Error::Inconsistent(format!("control vector has length {}, expected {}", b.len(), sys.size())));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) || alphas.first().is_some_and(|&a| a <= 0.0) {
        return Err(Error::param("alphas", "control values must be positive and strictly increasing"));
    }
    let mut hist = History::new(sys.size());
    let mut steps = Vec::new();
    let mut targets: Vec<f64> = alphas.iter().rev().copied().collect();
    let mut alpha_last = 0.0;
    let mut retries = 0;
    let termination = loop {
        let Some(&alpha) = targets.last() else { break Termination::Reached };
        if steps.len() >= cfg.max_steps {
            break Termination::MaxSteps;
        }
        let (u0, z0) = hist.predict(alpha);
        let start = Instant::now();
        let (u, zeta, rep) = newton_alpha(sys, alpha, &u0, z0, b, cfg)?;
        let mut rec = StepRecord {
            k: steps.len() + 1,
            zeta,
            alpha,
            iterations: rep.iterations,
            converged: rep.converged,
            residuals: rep.residuals,
            wall_time_s: 0.0,
            audit_zeta: None,
            note: rep.note,
        };
        if rep.converged {
            rec.audit_zeta = sys.commit(&u)?;
            targets.pop();
            alpha_last = alpha;
            hist.push(alpha, zeta, u);
            retries = 0;
        } else {
            retries += 1;
            if retries > cfg.max_retries {
                rec.wall_time_s = start.elapsed().as_secs_f64();
                steps.push(rec);
                break Termination::RetryLimit;
            }
            targets.push(0.5 * (alpha_last + alpha));
        }
        rec.wall_time_s = start.elapsed().as_secs_f64();
        steps.push(rec);
    };
    let final_u = hist.us.last().cloned().unwrap_or_default();
    Ok(LoadPath { method: Method::Indirect, steps, termination, final_u })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent softening springs `F_i(u) = c_i tanh(u_i / s_i)` under the
    /// load `l_i`; the limit load factor is `min c_i / l_i`.
    struct Springs {
        cap: Vec<f64>,
        scale: Vec<f64>,
        load: Vec<f64>,
        commits: usize,
        fail_at: Option<(f64, usize)>,
    }

    struct Diag(Vec<f64>);

    impl LinearSolver for Diag {
        fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
            let x: Vec<f64> = rhs.iter().zip(&self.0).map(|(r, d)| r / d).collect();
            if x.iter().all(|v| v.is_finite()) {
                Ok(x)
            } else {
                Err(Error::LinearSolve("zero pivot".into()))
            }
        }
    }

    impl NonlinearSystem for Springs {
        type Solver = Diag;
        fn size(&self) -> usize {
            self.cap.len()
        }
        fn load(&self) -> &[f64] {
            &self.load
        }
        fn linearize(&mut self, u: &[f64]) -> Result<(Vec<f64>, Diag)> {
            if let Some((limit, ref mut left)) = self.fail_at {
                if u[0] > limit && *left > 0 {
                    *left -= 1;
                    return Err(Error::Inconsistent("injected failure".into()));
                }
            }
            let f = (0..u.len()).map(|i| self.cap[i] * (u[i] / self.scale[i]).tanh()).collect();
            let d = (0..u.len()).map(|i| self.cap[i] / self.scale[i] / (u[i] / self.scale[i]).cosh().powi(2)).collect();
            Ok((f, Diag(d)))
        }
        fn commit(&mut self, _u: &[f64]) -> Result<Option<f64>> {
            self.commits += 1;
            Ok(None)
        }
    }

    fn springs() -> Springs {
        Springs { cap: vec![3.8, 9.0], scale: vec![0.3, 0.2], load: vec![1.0, 1.0], commits: 0, fail_at: None }
    }

    fn cfg() -> ControlConfig {
        ControlConfig { eps_newton: 1e-12, ..Default::default() }
    }

    #[test]
    fn linear_regime_newton() {
        let mut s = Springs { cap: vec![1e9], scale: vec![1e9], load: vec![2.0], commits: 0, fail_at: None };
        let (u, rep) = newton_zeta(&mut s, 0.5, &[0.0], &cfg());
        assert!(rep.converged);
        // One correction solves the linear problem; the second solve confirms it.
        assert_eq!(rep.iterations, 2);
        assert_eq!(rep.residuals[0], 1.0);
        assert!(rep.residuals[1] <= 1e-12);
        assert!((u[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn beyond_limit_fails() {
        let mut s = springs();
        let (_, rep) = newton_zeta(&mut s, 4.0, &[0.0, 0.0], &cfg());
        assert!(!rep.converged);
        assert!(rep.note.is_some());
        assert!(rep.iterations <= 50);
    }

    #[test]
    fn alpha_newton_solves_pair() {
        let mut s = springs();
        let b = [1.0, 0.0];
        let (u, zeta, rep) = newton_alpha(&mut s, 0.4, &[0.0, 0.0], 0.0, &b, &cfg()).unwrap();
        assert!(rep.converged);
        assert!((u[0] - 0.4).abs() < 1e-12);
        assert!((zeta - 3.8 * (0.4f64 / 0.3).tanh()).abs() < 1e-10);
        assert!((9.0 * (u[1] / 0.2).tanh() - zeta).abs() < 1e-9);
        // Matches the direct method at the same load factor.
        let (ud, rep) = newton_zeta(&mut s, zeta, &[0.0, 0.0], &cfg());
        assert!(rep.converged);
        assert!((ud[0] - u[0]).abs() < 1e-10);
    }

    #[test]
    fn singular_control_detected() {
        let mut s = springs();
        let b = [0.0, 0.0];
        assert!(matches!(newton_alpha(&mut s, 0.1, &[0.0, 0.0], 0.0, &b, &cfg()), Err(Error::SingularControl { .. })));
    }

    #[test]
    fn direct_control_logic() {
        let mut s = springs();
        let b = [1.0, 0.0];
        let path = run_direct(&mut s, &b, 1.5, &cfg()).unwrap();
        assert!(path.failed().count() > 0);
        assert_eq!(s.commits, path.accepted().count());
        let mut dz = 0.5;
        let mut last = (0.0, 0.0);
        for (i, r) in path.steps.iter().enumerate() {
            let zeta_prev = last.0;
            assert!((r.zeta - (zeta_prev + dz)).abs() < 1e-15, "step {i}");
            if r.converged {
                assert!(r.residuals.last().unwrap() <= &1e-12);
                assert!(r.alpha > last.1);
                assert!(r.zeta < 3.8);
                if r.alpha - last.1 >= 0.5 {
                    dz *= 0.5;
                }
                last = (r.zeta, r.alpha);
            } else {
                dz *= 0.5;
            }
        }
        assert!(path.zeta_max() > 3.7);
        assert!(matches!(path.termination, Termination::Reached | Termination::IncrementUnderflow));
    }

    #[test]
    fn indirect_at_prescribed_values() {
        let b = [1.0, 0.0];
        let alphas = [0.05, 0.1, 0.3, 0.7, 1.2];
        let path = run_indirect_at(&mut springs(), &b, &alphas, &cfg()).unwrap();
        assert_eq!(path.termination, Termination::Reached);
        let got: Vec<f64> = path.accepted().map(|r| r.alpha).collect();
        let want: Vec<f64> = got.iter().copied().filter(|a| alphas.contains(a)).collect();
        assert_eq!(want, alphas);
        for r in path.accepted() {
            assert!((r.zeta - 3.8 * (r.alpha / 0.3).tanh()).abs() < 1e-9);
        }
        assert!(run_indirect_at(&mut springs(), &b, &[0.2, 0.1], &cfg()).is_err());
    }

    #[test]
    fn indirect_control_logic() {
        let mut s = springs();
        let b = [1.0, 0.0];
        let path = run_indirect(&mut s, &b, 1.5, &cfg()).unwrap();
        assert_eq!(path.termination, Termination::Reached);
        assert_eq!(path.failed().count(), 0);
        let mut da = 0.0414;
        let mut last = (0.0, 0.0);
        for r in path.accepted() {
            assert!((r.alpha - (last.1 + da)).abs() < 1e-12);
            assert!((r.zeta - 3.8 * (r.alpha / 0.3).tanh()).abs() < 1e-9);
            if (r.zeta - last.0).abs() <= 5e-3 {
                da *= 2.0;
            }
            last = (r.zeta, r.alpha);
        }
        assert!(path.accepted().count() > 5);
        let direct = run_direct(&mut springs(), &b, 1.5, &cfg()).unwrap();
        for r in direct.accepted() {
            if let Some(z) = path.zeta_at(r.alpha) {
                assert!((z - r.zeta).abs() < 0.05 * 3.8);
            }
        }
    }

    #[test]
    fn indirect_retries_after_failure() {
        let mut s = springs();
        s.fail_at = Some((0.2, 3));
        let path = run_indirect(&mut s, &[1.0, 0.0], 1.0, &cfg()).unwrap();
        assert_eq!(path.failed().count(), 3);
        assert_eq!(path.termination, Termination::Reached);
        let mut s = springs();
        s.fail_at = Some((0.2, 100));
        let path = run_indirect(&mut s, &[1.0, 0.0], 1.0, &cfg()).unwrap();
        assert_eq!(path.termination, Termination::RetryLimit);
        assert!(path.steps.iter().rev().take(6).all(|r| !r.converged));
    }

    #[test]
    fn extrapolation_exact_for_linear_history() {
        let mut h = History::new(1);
        assert_eq!(h.predict(1.0), (vec![0.0], 0.0));
        h.push(1.0, 2.0, vec![3.0]);
        h.push(2.0, 4.0, vec![6.0]);
        let (u, z) = h.predict(3.5);
        assert!((u[0] - 10.5).abs() < 1e-14 && (z - 7.0).abs() < 1e-14);
    }

    #[test]
    fn csv_has_full_precision_and_no_timing_by_default() {
        let path = run_indirect(&mut springs(), &[1.0, 0.0], 0.2, &cfg()).unwrap();
        let csv = path.to_csv(false);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("k,zeta,alpha,iters,converged,wall_time_s"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 6);
        let zeta: f64 = row[1].parse().unwrap();
        assert_eq!(zeta, path.steps[0].zeta);
        assert_eq!(row[5].parse::<f64>().unwrap(), 0.0);
        assert_eq!(csv, run_indirect(&mut springs(), &[1.0, 0.0], 0.2, &cfg()).unwrap().to_csv(false));
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = ControlConfig { eps_newton: 0.0, ..Default::default() };
        assert!(run_direct(&mut springs(), &[1.0, 0.0], 1.0, &bad).is_err());
    }
}
