//! Mohr-Coulomb elastoplasticity with a subdifferential-based implicit return
//! mapping, its consistent tangent, and direct/indirect incremental limit
//! analysis of slopes by the semismooth Newton method.

pub mod error;
pub mod fem;
pub mod limit_analysis;
pub mod config;
pub mod constitutive;
pub mod driver;
pub mod spectral;
pub mod tangent;
pub mod tensor_algebra;

pub use error::{Error, Result};
