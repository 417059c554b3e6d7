//! Discontinuous Galerkin solvers for heterogeneous anisotropic diffusion
//! `-div(kappa grad u) = f` on triangulated rectangles.

pub mod bench;
pub mod cli;
pub mod coeffs;
pub mod error;
pub mod errors;
pub mod forms;
pub mod hybrid;
pub mod linalg;
pub mod mesh;
pub mod refelem;
pub mod study;

pub use error::{Error, Result};
