//! Iterative solvers for the assembled cell systems.

mod cg;
mod config;
pub mod dense;
mod parabolic;
mod stokes;

pub use cg::{pcg, pcg_observed, project, CgOutcome};
pub use config::{Preconditioner, SolverConfig};
pub use parabolic::{march_heat, march_stokes, HeatTrajectory, StokesTrajectory, TimeGrid};
pub use stokes::{leray_project, solve_saddle, solve_stokes, StokesSolution};

use crate::discretize::{AssembledSystem, CellField, FieldKind, FieldMeta};
use crate::error::Result;
use crate::par;

/// Shifts each kernel component so its weighted mean vanishes.
pub fn normalize(sys: &AssembledSystem, x: &mut [f64]) {
    for (z, c) in sys.kernel.iter().zip(&sys.constraints) {
        let cz = par::dot(c, z);
        if cz > 0.0 {
            let shift = par::dot(c, x) / cz;
            par::axpy(-shift, z, x);
        }
    }
}

/// Solves `K x = rhs` on the constraint-reduced space.
pub fn solve_vector(sys: &AssembledSystem, rhs: &[f64], cfg: &SolverConfig) -> Result<CgOutcome> {
    cfg.validate()?;
    let diag = sys.operator.diagonal();
    let mut out = pcg(|x, y| sys.operator.matvec_into(x, y), rhs, Some(&diag), &sys.kernel, cfg)?;
    normalize(sys, &mut out.x);
    Ok(out)
}

/// Dof-space solution, and the bordered scalar when the system has one.
pub fn solve_dofs(sys: &AssembledSystem, cfg: &SolverConfig) -> Result<(CgOutcome, Option<f64>)> {
    match &sys.border {
        None => Ok((solve_vector(sys, &sys.rhs, cfg)?, None)),
        Some(border) => {
            // Block elimination: y = K⁺g, then U = (r + c s) y with
            // s = r gᵀy / (1 - c gᵀy).
            let mut out = solve_vector(sys, &border.g, cfg)?;
            let gy = par::dot(&border.g, &out.x);
            let s = border.r * gy / (1.0 - border.c * gy);
            let scale = border.r + border.c * s;
            out.x.iter_mut().for_each(|v| *v *= scale);
            Ok((out, Some(s)))
        }
    }
}

/// Solves an assembled SPD system and returns the zero-extended field.
pub fn solve_spd(sys: &AssembledSystem, cfg: &SolverConfig) -> Result<CellField> {
    let (out, border) = solve_dofs(sys, cfg)?;
    Ok(to_field(sys, &out.x, out.iterations, out.residual, border))
}

pub fn to_field(sys: &AssembledSystem, x: &[f64], iterations: usize, residual: f64, border: Option<f64>) -> CellField {
    let kind = if sys.dofs.block() == 3 {
        FieldKind::VectorNode
    } else {
        FieldKind::ScalarNode
    };
    CellField {
        kind,
        support: sys.support.into(),
        n: sys.n,
        values: sys.dofs.scatter(x),
        pressure: None,
        meta: FieldMeta {
            problem: sys.problem.clone(),
            fingerprint: sys.fingerprint.clone(),
            iterations,
            residual,
            bordered: border,
        },
    }
}
