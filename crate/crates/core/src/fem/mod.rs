//! Finite element discretization of the slope problem.

pub mod element;
pub mod mesh;
pub mod model;
pub mod sparse;
pub mod vtk;

pub use element::ElementFamily;
pub use mesh::{build_slope_mesh, Mesh, MeshDensity, SlopeGeometry};
pub use model::{FemModel, PointResult};
pub use sparse::{Factorization, SparseSystem};
