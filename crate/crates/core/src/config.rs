//! Run configuration (TOML), benchmark presets and the validation report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constitutive::{HardeningModel, MaterialParams};
use crate::error::{Error, Result};
use crate::fem::{build_slope_mesh, ElementFamily, MeshDensity, SlopeGeometry};
use crate::limit_analysis::{ControlConfig, ControlKind, Method};
use crate::tensor_algebra::moduli_from_young;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardeningKind {
    Perfect,
    Linear,
    SaturatedQuadratic,
}

/// Elastic moduli as `(young, poisson)` or `(bulk, shear)` in kPa; angles in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub young: Option<f64>,
    pub poisson: Option<f64>,
    pub bulk: Option<f64>,
    pub shear: Option<f64>,
    /// Initial cohesion.
    pub c0: f64,
    /// Saturated cohesion of the quadratic hardening model.
    pub c: Option<f64>,
    pub phi: f64,
    pub psi: f64,
    #[serde(default = "default_hardening")]
    pub hardening: HardeningKind,
    /// Initial hardening slope.
    pub h_tilde: Option<f64>,
    /// Specific weight `rho g` in kN/m^3.
    #[serde(default = "default_weight")]
    pub specific_weight: f64,
}

fn default_hardening() -> HardeningKind {
    HardeningKind::Perfect
}

fn default_weight() -> f64 {
    20.0
}

impl MaterialConfig {
    /// `(K, G)` from whichever pair was given.
    pub fn moduli(&self) -> Result<(f64, f64)> {
        match (self.young, self.poisson, self.bulk, self.shear) {
            (Some(e), Some(nu), None, None) => moduli_from_young(e, nu).map_err(|e| Error::config("material.young", e.to_string())),
            (None, None, Some(k), Some(g)) => Ok((k, g)),
            _ => Err(Error::config("material", "give exactly one of the pairs (young, poisson) or (bulk, shear)")),
        }
    }

    pub fn hardening_model(&self) -> Result<HardeningModel> {
        let need_h = || self.h_tilde.ok_or_else(|| Error::config("material.h_tilde", "required by this hardening model"));
        match self.hardening {
            HardeningKind::Perfect => {
                if self.h_tilde.is_some() {
                    return Err(Error::config("material.h_tilde", "not used by perfect plasticity"));
                }
                Ok(HardeningModel::Perfect)
            }
            HardeningKind::Linear => Ok(HardeningModel::Linear { slope: need_h()? }),
            HardeningKind::SaturatedQuadratic => {
                let c = self.c.ok_or_else(|| Error::config("material.c", "required by saturated-quadratic hardening"))?;
                Ok(HardeningModel::SaturatedQuadratic { slope: need_h()?, gain: c - self.c0 })
            }
        }
    }

    pub fn params(&self) -> Result<MaterialParams> {
        let (k, g) = self.moduli()?;
        let h = self.hardening_model()?;
        if !(self.specific_weight.is_finite() && self.specific_weight > 0.0) {
            return Err(Error::config("material.specific_weight", "must be positive"));
        }
        MaterialParams::new(k, g, self.c0, self.phi.to_radians(), self.psi.to_radians(), h).map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(format!("material.{name}"), reason),
            other => Error::config("material", other.to_string()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub family: ElementFamily,
    pub refinement: usize,
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default)]
    pub geometry: SlopeGeometry,
    /// Read the mesh from this file instead of generating it.
    pub file: Option<PathBuf>,
}

fn default_grading() -> f64 {
    1.0
}

impl MeshConfig {
    pub fn density(&self) -> MeshDensity {
        MeshDensity { refinement: self.refinement, grading: self.grading }
    }

    pub fn build(&self) -> Result<crate::fem::Mesh> {
        match &self.file {
            Some(path) => crate::fem::Mesh::load(path),
            None => build_slope_mesh(&self.geometry, self.family, self.density()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Final-state VTK file.
    pub vtk: bool,
    /// VTK file after every accepted step.
    pub vtk_every_step: bool,
    /// Record wall times in the load-path CSV (makes it run-dependent).
    pub timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("output"), vtk: true, vtk_every_step: false, timing: false }
    }
}

/// Strain path at a single material point, applied in equal increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDriverConfig {
    /// Final total strain `(11, 22, 33, 12, 23, 13)` with engineering shears.
    pub strain: [f64; 6],
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Slope,
    Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_problem")]
    pub problem: Problem,
    pub material: MaterialConfig,
    pub mesh: Option<MeshConfig>,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub point: Option<PointDriverConfig>,
}

fn default_problem() -> Problem {
    Problem::Slope
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string().trim_end().to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<document>".to_string() } else { path }, e.into_inner().to_string().trim_end().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.material.params()?;
        self.control.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(format!("control.{name}"), reason),
            other => other,
        })?;
        match self.problem {
            Problem::Slope => {
                let mesh = self.mesh.as_ref().ok_or_else(|| Error::config("mesh", "required for slope problems"))?;
                if mesh.file.is_none() {
                    if mesh.refinement < 1 {
                        return Err(Error::config("mesh.refinement", "must be at least 1"));
                    }
                    if !(mesh.grading.is_finite() && mesh.grading >= 1.0) {
                        return Err(Error::config("mesh.grading", "must be >= 1"));
                    }
                    mesh.geometry.validate().map_err(|e| Error::config("mesh.geometry", e.to_string()))?;
                }
            }
            Problem::Point => {
                let p = self.point.as_ref().ok_or_else(|| Error::config("point", "required for point problems"))?;
                if p.steps == 0 {
                    return Err(Error::config("point.steps", "must be at least 1"));
                }
                if p.strain.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("point.strain", "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Human-readable summary of derived quantities, mesh statistics and warnings.
    pub fn report(&self) -> Result<String> {
        let p = self.material.params()?;
        let mut s = String::new();
        let _ = writeln!(s, "bulk modulus K      = {:.6e} kPa", p.k());
        let _ = writeln!(s, "shear modulus G     = {:.6e} kPa", p.g());
        let _ = writeln!(s, "Lame lambda         = {:.6e} kPa", p.lambda());
        let _ = writeln!(s, "apex pressure c0 cot(phi) = {:.6e} kPa", p.apex_pressure(0.0));
        let _ = writeln!(s, "hardening           = {:?}", p.hardening());
        if self.problem == Problem::Slope {
            let mesh_cfg = self.mesh.as_ref().expect("validated");
            let mesh = mesh_cfg.build()?;
            let _ = writeln!(s, "element family      = {}", mesh.family);
            let _ = writeln!(s, "nodes               = {}", mesh.n_nodes());
            let _ = writeln!(s, "elements            = {}", mesh.n_elements());
            let _ = writeln!(s, "integration points  = {}", mesh.n_points());
            let _ = writeln!(s, "dofs (free)         = {} ({})", mesh.n_dofs(), mesh.n_dofs() - mesh.fixed.len());
            let _ = writeln!(s, "method              = {:?}", self.control.method);
            let _ = writeln!(s, "control end value   = {}", self.control.alpha_end_for(mesh.dim()));
        }
        for w in self.warnings() {
            let _ = writeln!(s, "warning: {w}");
        }
        Ok(s)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.material.psi > self.material.phi {
            w.push(format!("dilatancy angle psi = {} exceeds friction angle phi = {} (unusual dilatancy)", self.material.psi, self.material.phi));
        }
        w
    }
}

fn slope_material(hardening: bool) -> MaterialConfig {
    MaterialConfig {
        young: Some(20000.0),
        poisson: Some(0.49),
        bulk: None,
        shear: None,
        c0: if hardening { 40.0 } else { 50.0 },
        c: hardening.then_some(50.0),
        phi: 20.0,
        psi: 20.0,
        hardening: if hardening { HardeningKind::SaturatedQuadratic } else { HardeningKind::Perfect },
        h_tilde: hardening.then_some(10000.0),
        specific_weight: 20.0,
    }
}

fn slope_preset(family: ElementFamily, refinement: usize, hardening: bool, method: Method, dir: &str) -> RunConfig {
    RunConfig {
        problem: Problem::Slope,
        material: slope_material(hardening),
        mesh: Some(MeshConfig { family, refinement, grading: 1.0, geometry: SlopeGeometry::default(), file: None }),
        control: ControlConfig { method, control: ControlKind::CornerA, ..Default::default() },
        output: OutputConfig { dir: PathBuf::from(dir), ..Default::default() },
        point: None,
    }
}

pub const PRESETS: [&str; 8] = [
    "slope2d-assoc-hardening",
    "slope2d-assoc-hardening-direct",
    "slope2d-paper-scale",
    "slope3d-q1",
    "slope3d-q2",
    "slope3d-q1-paper-coarse",
    "slope3d-q2-paper-coarse",
    "point-driver",
];

/// Benchmark configurations. Desk presets use meshes a few thousand nodes
/// large; the paper-scale ones approximate the published mesh sizes.
pub fn preset(name: &str) -> Result<RunConfig> {
    let cfg = match name {
        "slope2d-assoc-hardening" => slope_preset(ElementFamily::Q2Quad, 16, true, Method::Indirect, "output/slope2d-assoc-hardening"),
        "slope2d-assoc-hardening-direct" => {
            slope_preset(ElementFamily::Q2Quad, 16, true, Method::Direct, "output/slope2d-assoc-hardening-direct")
        }
        "slope2d-paper-scale" => slope_preset(ElementFamily::Q2Quad, 43, true, Method::Indirect, "output/slope2d-paper-scale"),
        "slope3d-q1" => slope_preset(ElementFamily::Q1Hex, 4, false, Method::Direct, "output/slope3d-q1"),
        "slope3d-q2" => slope_preset(ElementFamily::Q2Hex, 4, false, Method::Direct, "output/slope3d-q2"),
        "slope3d-q1-paper-coarse" => slope_preset(ElementFamily::Q1Hex, 9, false, Method::Direct, "output/slope3d-q1-paper-coarse"),
        "slope3d-q2-paper-coarse" => slope_preset(ElementFamily::Q2Hex, 9, false, Method::Direct, "output/slope3d-q2-paper-coarse"),
        "point-driver" => RunConfig {
            problem: Problem::Point,
            material: MaterialConfig { psi: 10.0, ..slope_material(true) },
            mesh: None,
            control: ControlConfig::default(),
            output: OutputConfig { dir: PathBuf::from("output/point-driver"), vtk: false, ..Default::default() },
            point: Some(PointDriverConfig { strain: [6e-3, -2e-3, -4e-3, 8e-3, 0.0, 2e-3], steps: 50 }),
        },
        _ => return Err(Error::config("preset", format!("unknown preset '{name}'; available: {}", PRESETS.join(", ")))),
    };
    Ok(cfg)
}

/// Preset as a TOML document with every option and its default explained.
pub fn reference_toml(cfg: &RunConfig) -> String {
    const HEADER: &str = "\
# Run configuration.
#
# problem           \"slope\" (default) or \"point\" (single material point strain path)
#
# [material]        moduli in kPa, angles in degrees
#   young, poisson  Young's modulus and Poisson ratio, or
#   bulk, shear     bulk and shear moduli (give exactly one pair)
#   c0              initial cohesion
#   c               saturated cohesion (saturated-quadratic hardening only)
#   phi, psi        friction and dilatancy angles
#   hardening       \"perfect\" (default), \"linear\" or \"saturated-quadratic\"
#   h_tilde         initial hardening slope (linear, saturated-quadratic)
#   specific_weight rho g in kN/m^3 (default 20)
#
# [mesh]            family: q1-quad, q2-quad, q1-hex, q2-hex
#   refinement      element layers over the slope height (element size y2 / refinement)
#   grading         largest/smallest element ratio, refined toward the slope toe (default 1)
#   file            optional mesh file to read instead of generating one
# [mesh.geometry]   x1 = 15 (in front of the toe), x2 = 10 (slope run), x3 = 15 (behind
#                   the crest), y1 = 10 (foundation), y2 = 10 (slope height), z = 10 (3D depth)
#
# [control]
#   method          \"indirect\" (default) or \"direct\"
#   eps_newton      Newton stopping tolerance on |du|/(|u_new|+|u_old|) (default 1e-12)
#   max_iter        Newton iteration cap (default 50)
#   dzeta0          initial load increment, direct method (default 0.5)
#   dalpha_cap      settlement increment that halves the load increment (default 0.5)
#   dalpha0         initial settlement increment, indirect method (default 0.0414)
#   stagnation      load increment at or below which the settlement increment doubles (default 5e-3)
#   alpha_end       stop when the control value exceeds this (default 4 in 2D, 5 in 3D)
#   control         \"corner-a\" (crest settlement, default) or \"load\" (b = l)
#   min_dzeta       smallest load increment before the direct method stops (default 1e-8)
#   max_retries     halvings of the settlement increment after failures (default 5)
#   max_steps       attempted step budget (default 1000)
#
# [output]
#   dir             output directory (overridden by MOHRCOULOMB_OUTPUT_DIR)
#   vtk             write the final state as VTK (default true)
#   vtk_every_step  write a VTK file per accepted step (default false)
#   timing          write wall times to the CSV (default false keeps runs identical)
#
# [point]           strain = final strain (11,22,33,12,23,13), steps = number of increments
";
    format!("{HEADER}\n{}", cfg.to_toml())
}
