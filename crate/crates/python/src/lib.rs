use std::path::PathBuf;

use mohrcoulomb::config::{self, HardeningKind, MaterialConfig, RunConfig};
use mohrcoulomb::constitutive::{return_map, MaterialParams, PointState, RootConfig};
use mohrcoulomb::driver::{self, DriverError};
use mohrcoulomb::tangent::tangent_of;
use mohrcoulomb::tensor_algebra::{Kind, SymTensor3};
use mohrcoulomb::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn driver_err(e: DriverError) -> PyErr {
    match e {
        DriverError::Config(e) => value_err(e),
        DriverError::Solver(e) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_hardening(s: &str) -> PyResult<HardeningKind> {
    match s {
        "perfect" => Ok(HardeningKind::Perfect),
        "linear" => Ok(HardeningKind::Linear),
        "saturated-quadratic" => Ok(HardeningKind::SaturatedQuadratic),
        _ => Err(PyValueError::new_err(format!("unknown hardening '{s}'"))),
    }
}

/// Mohr-Coulomb material. Moduli in kPa, angles in degrees.
#[pyclass(module = "pymohrcoulomb", frozen)]
struct Material {
    params: MaterialParams,
    apex: f64,
}

#[pymethods]
impl Material {
    #[new]
    #[pyo3(signature = (*, c0, phi, psi, young=None, poisson=None, bulk=None, shear=None, hardening="perfect", c=None, h_tilde=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        c0: f64,
        phi: f64,
        psi: f64,
        young: Option<f64>,
        poisson: Option<f64>,
        bulk: Option<f64>,
        shear: Option<f64>,
        hardening: &str,
        c: Option<f64>,
        h_tilde: Option<f64>,
    ) -> PyResult<Self> {
        let cfg = MaterialConfig {
            young,
            poisson,
            bulk,
            shear,
            c0,
            c,
            phi,
            psi,
            hardening: parse_hardening(hardening)?,
            h_tilde,
            specific_weight: 20.0,
        };
        let params = cfg.params().map_err(value_err)?;
        Ok(Self { params, apex: c0 / phi.to_radians().tan() })
    }

    #[getter]
    fn bulk(&self) -> f64 {
        self.params.k()
    }

    #[getter]
    fn shear(&self) -> f64 {
        self.params.g()
    }

    /// Initial apex pressure `c0 cot(phi)`.
    #[getter]
    fn apex_pressure(&self) -> f64 {
        self.apex
    }

    /// Return mapping of a 3D strain `[e11, e22, e33, g12, g23, g13]` (engineering shears).
    #[pyo3(signature = (strain, plastic_strain=None, ebar=0.0))]
    fn return_map<'py>(
        &self,
        py: Python<'py>,
        strain: [f64; 6],
        plastic_strain: Option<[f64; 6]>,
        ebar: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let (eps, prev) = inputs(strain, plastic_strain, ebar);
        let (_, out) = return_map(&eps, &prev, &self.params, &RootConfig::default()).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("stress", out.sigma.stress_vector().as_slice().to_vec())?;
        d.set_item("principal", out.principal.to_vec())?;
        d.set_item("branch", out.branch.to_string())?;
        d.set_item("dlambda", out.dlambda)?;
        d.set_item("plastic_strain", out.state.ep.strain_vector().as_slice().to_vec())?;
        d.set_item("ebar", out.state.ebar)?;
        Ok(d)
    }

    /// Consistent tangent as a 6x6 Voigt matrix mapping engineering strains to stresses.
    #[pyo3(signature = (strain, plastic_strain=None, ebar=0.0))]
    fn tangent(&self, strain: [f64; 6], plastic_strain: Option<[f64; 6]>, ebar: f64) -> PyResult<Vec<Vec<f64>>> {
        let (eps, prev) = inputs(strain, plastic_strain, ebar);
        let (trial, out) = return_map(&eps, &prev, &self.params, &RootConfig::default()).map_err(value_err)?;
        let c = tangent_of(&trial, &out, &self.params).map_err(value_err)?;
        Ok((0..6).map(|i| (0..6).map(|j| c[(i, j)]).collect()).collect())
    }
}

fn inputs(strain: [f64; 6], plastic_strain: Option<[f64; 6]>, ebar: f64) -> (SymTensor3, PointState<6>) {
    let eps = SymTensor3::from_slice(&strain, Kind::Strain);
    let ep = plastic_strain.map_or(SymTensor3::zeros(Kind::Strain), |p| SymTensor3::from_slice(&p, Kind::Strain));
    (eps, PointState { ep, ebar })
}

/// Names of the benchmark presets.
#[pyfunction]
fn presets() -> Vec<&'static str> {
    config::PRESETS.to_vec()
}

/// Documented TOML text of a preset.
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    Ok(config::reference_toml(&config::preset(name).map_err(value_err)?))
}

/// Derived quantities and mesh statistics of a TOML configuration.
#[pyfunction]
fn validate(config_toml: &str) -> PyResult<String> {
    let cfg = RunConfig::from_toml(config_toml).map_err(value_err)?;
    cfg.validate().map_err(value_err)?;
    cfg.report().map_err(value_err)
}

/// Run a TOML configuration and return the summary as a dict.
#[pyfunction]
#[pyo3(signature = (config_toml, output_dir=None, workers=0))]
fn run<'py>(py: Python<'py>, config_toml: &str, output_dir: Option<PathBuf>, workers: usize) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = RunConfig::from_toml(config_toml).map_err(value_err)?;
    if let Some(dir) = output_dir {
        cfg.output.dir = dir;
    }
    let s = py.detach(|| driver::run(&cfg, workers)).map_err(driver_err)?;
    let d = PyDict::new(py);
    d.set_item("zeta_max", s.zeta_max)?;
    d.set_item("accepted_steps", s.accepted_steps)?;
    d.set_item("failed_steps", s.failed_steps)?;
    d.set_item("total_iterations", s.total_iterations)?;
    d.set_item("termination", s.termination.map(|t| t.to_string()))?;
    d.set_item("nodes", s.nodes)?;
    d.set_item("integration_points", s.integration_points)?;
    d.set_item("output_dir", s.output_dir)?;
    d.set_item("files", s.files)?;
    Ok(d)
}

#[pymodule]
fn pymohrcoulomb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Material>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
