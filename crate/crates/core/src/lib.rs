//! Standard and constraint-force formulations of PDE inverse problems on
//! spectral Galerkin discretizations.

pub mod basis;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod optimize;
pub mod pce;
pub mod sensitivity;
pub mod solvers;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
