//! Boundary element solver for 3D linear elastostatics.
//!
//! Collocation and symmetric Galerkin discretizations on flat triangles,
//! regularized double-layer and hypersingular operators with the boundary
//! line integrals needed on open surfaces, and a Chebyshev-interpolation
//! fast multipole method.

pub mod analytic;
pub mod assembly;
pub mod error;
pub mod fmm;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod problem;
pub mod quadrature;
pub mod solver;

pub use error::{BemError, Result};
pub use geometry::{BcTag, Edge, EdgeSet, Element, Mat3, TriangleMesh, Vec3};
pub use kernels::MaterialParams;
pub use linalg::{DenseMatrix, LinearMap};
