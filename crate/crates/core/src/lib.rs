//! Periodic cell problems and homogenized macroscale solvers for
//! thermo-poroelastic media.

pub mod cell_elastic;
pub mod cell_flow;
pub mod cell_thermal;
pub mod discretize;
pub mod error;
pub mod kernel;
pub mod linsolve;
pub mod macro_biot;
pub mod microcell;
mod par;
pub mod sparse;
pub mod toolkit;

pub use error::{Error, Phase, Result};
