//! Run orchestration: builds the model from a configuration, runs the chosen
//! method and writes the outputs only once the run has succeeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{Problem, RunConfig};
use crate::constitutive::{return_map, MaterialParams, PointState, RootConfig};
use crate::error::Error;
use crate::fem::vtk::write_vtk;
use crate::fem::{FemModel, Mesh};
use crate::limit_analysis::{run_direct_observed, run_indirect_observed, ControlKind, LoadPath, Method, StepRecord, Termination};
use crate::tensor_algebra::{Kind, SymTensor3, D3, PS};

/// Environment variable overriding `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "MOHRCOULOMB_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("configuration error: {0}")]
    Config(Error),
    #[error("solver failure: {0}")]
    Solver(Error),
}

impl DriverError {
    /// Process exit code: 1 for configuration errors, 2 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Config(_) => 1,
            DriverError::Solver(_) => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub problem: Problem,
    pub method: Option<Method>,
    pub zeta_max: f64,
    pub accepted_steps: usize,
    pub failed_steps: usize,
    pub total_iterations: usize,
    pub termination: Option<Termination>,
    pub nodes: usize,
    pub integration_points: usize,
    /// Largest relative gap between a step's load factor and its reaction audit.
    pub audit_max_rel: f64,
    pub wall_time_s: f64,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem = \"{}\"", format!("{:?}", self.problem).to_lowercase());
        if let Some(m) = self.method {
            let _ = writeln!(s, "method = \"{}\"", format!("{m:?}").to_lowercase());
        }
        let _ = writeln!(s, "zeta_max = {:.16e}", self.zeta_max);
        let _ = writeln!(s, "accepted_steps = {}", self.accepted_steps);
        let _ = writeln!(s, "failed_steps = {}", self.failed_steps);
        let _ = writeln!(s, "total_iterations = {}", self.total_iterations);
        if let Some(t) = self.termination {
            let _ = writeln!(s, "termination = \"{t}\"");
        }
        let _ = writeln!(s, "nodes = {}", self.nodes);
        let _ = writeln!(s, "integration_points = {}", self.integration_points);
        let _ = writeln!(s, "audit_max_rel = {:.3e}", self.audit_max_rel);
        let _ = writeln!(s, "wall_time_s = {:.3}", self.wall_time_s);
        s
    }
}

/// Output directory after applying the environment override.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => cfg.output.dir.clone(),
    }
}

/// Staging directory whose files are moved into place on success and
/// discarded otherwise.
struct Staging {
    dir: PathBuf,
    target: PathBuf,
    files: Vec<String>,
}

impl Staging {
    fn new(target: &Path) -> Result<Self, DriverError> {
        let dir = target.join(format!(".staging-{}", std::process::id()));
        std::fs::create_dir_all(&dir).map_err(|e| DriverError::Config(Error::io(&dir, e)))?;
        Ok(Self { dir, target: target.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn publish(mut self) -> Result<Vec<String>, DriverError> {
        for f in &self.files {
            let (from, to) = (self.dir.join(f), self.target.join(f));
            std::fs::rename(&from, &to).map_err(|e| DriverError::Solver(Error::io(&to, e)))?;
        }
        let _ = std::fs::remove_dir_all(&self.dir);
        Ok(std::mem::take(&mut self.files))
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.dir);
    }
}

/// Run a validated configuration. `workers = 0` uses every core.
pub fn run(cfg: &RunConfig, workers: usize) -> Result<RunSummary, DriverError> {
    cfg.validate().map_err(DriverError::Config)?;
    let params = cfg.material.params().map_err(DriverError::Config)?;
    let out = output_dir(cfg);
    let start = Instant::now();
    let mut summary = match cfg.problem {
        Problem::Point => {
            let rows = run_point(cfg, &params).map_err(DriverError::Solver)?;
            let mut stage = Staging::new(&out)?;
            write(&stage.path("stress_path.csv"), &rows)?;
            let mut s = RunSummary {
                problem: Problem::Point,
                method: None,
                zeta_max: 0.0,
                accepted_steps: cfg.point.as_ref().map_or(0, |p| p.steps),
                failed_steps: 0,
                total_iterations: 0,
                termination: None,
                nodes: 0,
                integration_points: 1,
                audit_max_rel: 0.0,
                wall_time_s: 0.0,
                output_dir: out.clone(),
                files: Vec::new(),
            };
            s.wall_time_s = start.elapsed().as_secs_f64();
            write(&stage.path("summary.toml"), &s.to_text())?;
            s.files = stage.publish()?;
            return Ok(s);
        }
        Problem::Slope => {
            let mesh = cfg.mesh.as_ref().expect("validated").build().map_err(DriverError::Config)?;
            let mut stage = Staging::new(&out)?;
            let s = if mesh.dim() == 2 {
                run_slope::<PS>(cfg, mesh, params, workers, &mut stage)?
            } else {
                run_slope::<D3>(cfg, mesh, params, workers, &mut stage)?
            };
            (s, stage)
        }
    };
    summary.0.wall_time_s = start.elapsed().as_secs_f64();
    summary.0.output_dir = out;
    let text = summary.0.to_text();
    write(&summary.1.path("summary.toml"), &text)?;
    summary.0.files = summary.1.publish()?;
    Ok(summary.0)
}

fn write(path: &Path, text: &str) -> Result<(), DriverError> {
    std::fs::write(path, text).map_err(|e| DriverError::Solver(Error::io(path, e)))
}

fn point_fields<const N: usize>(model: &FemModel<N>) -> (Vec<f64>, Vec<f64>) {
    let r = model.point_results();
    (r.iter().map(|p| p.outcome.dlambda).collect(), r.iter().map(|p| p.outcome.state.ebar).collect())
}

fn run_slope<const N: usize>(
    cfg: &RunConfig,
    mesh: Mesh,
    params: MaterialParams,
    workers: usize,
    stage: &mut Staging,
) -> Result<RunSummary, DriverError> {
    let (nodes, points, dim) = (mesh.n_nodes(), mesh.n_points(), mesh.dim());
    let mut model = FemModel::<N>::new(mesh, params, cfg.material.specific_weight, workers).map_err(DriverError::Config)?;
    let b = match cfg.control.control {
        ControlKind::CornerA => model.corner_control().map_err(DriverError::Config)?,
        ControlKind::Load => model.load().to_vec(),
    };
    let alpha_end = cfg.control.alpha_end_for(dim);
    let every = cfg.output.vtk_every_step;
    let mut snapshots: Vec<PathBuf> = Vec::new();
    let stage_dir = stage.dir.clone();
    let mut observer = |m: &FemModel<N>, rec: &StepRecord, u: &[f64]| -> crate::error::Result<()> {
        if every {
            let name = format!("step_{:04}.vtk", rec.k);
            let (dl, eb) = point_fields(m);
            write_vtk(&stage_dir.join(&name), m.mesh(), &m.expand(u), &dl, &eb)?;
            snapshots.push(PathBuf::from(name));
        }
        Ok(())
    };
    let path: LoadPath = match cfg.control.method {
        Method::Direct => run_direct_observed(&mut model, &b, alpha_end, &cfg.control, &mut observer),
        Method::Indirect => run_indirect_observed(&mut model, &b, alpha_end, &cfg.control, &mut observer),
    }
    .map_err(DriverError::Solver)?;
    for s in &snapshots {
        stage.files.push(s.to_string_lossy().into_owned());
    }
    if matches!(path.termination, Termination::RetryLimit | Termination::MaxSteps) {
        let last = path.steps.last().map(|r| format!("step {}: {}", r.k, r.note.clone().unwrap_or_default())).unwrap_or_default();
        return Err(DriverError::Solver(Error::Inconsistent(format!("{} ({last})", path.termination))));
    }
    path.write_csv(&stage.path("load_path.csv"), cfg.output.timing).map_err(DriverError::Solver)?;
    if cfg.output.vtk {
        let (dl, eb) = point_fields(&model);
        let file = stage.path("final.vtk");
        write_vtk(&file, model.mesh(), &model.expand(&path.final_u), &dl, &eb).map_err(DriverError::Solver)?;
    }
    let audit_max_rel = path
        .accepted()
        .filter_map(|r| r.audit_zeta.map(|a| (a - r.zeta).abs() / r.zeta.abs().max(f64::MIN_POSITIVE)))
        .fold(0.0, f64::max);
    Ok(RunSummary {
        problem: Problem::Slope,
        method: Some(cfg.control.method),
        zeta_max: path.zeta_max(),
        accepted_steps: path.accepted().count(),
        failed_steps: path.failed().count(),
        total_iterations: path.total_iterations(),
        termination: Some(path.termination),
        nodes,
        integration_points: points,
        audit_max_rel,
        wall_time_s: 0.0,
        output_dir: PathBuf::new(),
        files: Vec::new(),
    })
}

/// Stress path of a single point under proportional total strain.
pub fn run_point(cfg: &RunConfig, params: &MaterialParams) -> crate::error::Result<String> {
    let p = cfg.point.as_ref().ok_or_else(|| Error::config("point", "missing"))?;
    let mut state = PointState::<D3>::default();
    let mut s = String::from("step,e11,e22,e33,g12,g23,g13,s11,s22,s33,s12,s23,s13,branch,dlambda,ebar\n");
    for step in 1..=p.steps {
        let t = step as f64 / p.steps as f64;
        let e: Vec<f64> = p.strain.iter().map(|v| v * t).collect();
        let eps = SymTensor3::from_slice(&e, Kind::Strain);
        let (_, out) = return_map(&eps, &state, params, &RootConfig::default())?;
        let sv = out.sigma.stress_vector();
        let _ = write!(s, "{step}");
        for v in e.iter().chain(sv.iter()) {
            let _ = write!(s, ",{v:.16e}");
        }
        let _ = writeln!(s, ",{},{:.16e},{:.16e}", out.branch, out.dlambda, out.state.ebar);
        state = out.state;
    }
    Ok(s)
}

/// Export the configured mesh as text and VTK into the output directory.
pub fn export_mesh(cfg: &RunConfig) -> Result<Vec<PathBuf>, DriverError> {
    cfg.validate().map_err(DriverError::Config)?;
    let mesh_cfg = cfg.mesh.as_ref().ok_or_else(|| DriverError::Config(Error::config("mesh", "required")))?;
    let mesh = mesh_cfg.build().map_err(DriverError::Config)?;
    let out = output_dir(cfg);
    let mut stage = Staging::new(&out)?;
    mesh.save(&stage.path("mesh.txt")).map_err(DriverError::Solver)?;
    let zeros = vec![0.0; mesh.n_points()];
    write_vtk(&stage.path("mesh.vtk"), &mesh, &vec![0.0; mesh.n_dofs()], &zeros, &zeros).map_err(DriverError::Solver)?;
    Ok(stage.publish()?.into_iter().map(|f| out.join(f)).collect())
}
