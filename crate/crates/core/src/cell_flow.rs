//! Fluid cell problems: permeability, dynamic permeability kernel and the
//! inviscid added-mass matrix.

use serde::{Deserialize, Serialize};

use crate::cell_elastic::Mat3;
use crate::cell_thermal::gradient_integral;
use crate::discretize::{assemble_scalar_laplace, assemble_stokes, PeriodicGrid, ScalarBc};
use crate::error::{Error, Phase, Result};
use crate::kernel::TimeKernel;
use crate::linsolve::{leray_project, march_stokes, solve_spd, solve_stokes, SolverConfig, TimeGrid};
use crate::microcell::VoxelCell;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCoefficients {
    pub m: f64,
    pub b2: Option<Mat3>,
    pub b1: Option<TimeKernel>,
    pub b3: Mat3,
}

/// Time schedule for unsteady Stokes marching.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowSchedule {
    /// Steps from `τ0ρ_f h²/(50 μ1)` growing by 2% after a ramp; stops once
    /// the kinetic norm falls below `1e-5` of its start.
    Auto,
    Grid(TimeGrid),
}

/// `B2` column `i` is `∫_{Y_f} U^i` for the steady Stokes problem forced by `e_i`.
pub fn solve_b2(cell: &VoxelCell, mu1: f64, cfg: &SolverConfig) -> Result<Mat3> {
    let cols = par::map_range(3, |i| -> Result<[f64; 3]> {
        let sys = assemble_stokes(cell, mu1, i, true)?;
        let (_, sol) = solve_stokes(&sys, cfg)?;
        Ok(sys.flux(&sol.u))
    });
    let mut b = [[0.0; 3]; 3];
    for (i, col) in cols.into_iter().enumerate() {
        let col = col?;
        for j in 0..3 {
            b[j][i] = col[j];
        }
    }
    Ok(b)
}

/// `B1(t)` column `i` is `∫_{Y_f} V^i(t)` for the unsteady problem started
/// from the projected datum `e_i/(τ0 ρ_f)`. The `t = 0` sample is the exact
/// integral of the datum, `(m/(τ0 ρ_f)) I`.
pub fn solve_b1(
    cell: &VoxelCell,
    mu1: f64,
    tau0: f64,
    rho_f: f64,
    schedule: &FlowSchedule,
    cfg: &SolverConfig,
) -> Result<TimeKernel> {
    if !(tau0 > 0.0 && rho_f > 0.0) {
        return Err(Error::Parameter(format!(
            "unsteady kernel needs tau0 > 0 and rho_f > 0, got {tau0}, {rho_f}"
        )));
    }
    let rho = tau0 * rho_f;
    let h = 1.0 / cell.n() as f64;
    let (grid, stop) = match schedule {
        FlowSchedule::Auto => (
            TimeGrid::ramp_geometric(rho * h * h / (50.0 * mu1), 50, 1.02, 50.0 * rho / mu1)?,
            Some(1e-5),
        ),
        FlowSchedule::Grid(g) => (g.clone(), None),
    };
    let runs = par::map_range(3, |i| -> Result<_> {
        let sys = assemble_stokes(cell, mu1, i, true)?;
        let datum: Vec<f64> = sys.unit_forcing(i).iter().map(|v| v / rho).collect();
        let v0 = leray_project(&sys, &datum, cfg)?;
        let div = sys.divergence(&v0).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if div * sys.h * rho > 10.0 * cfg.rel_tolerance {
            return Err(Error::Consistency(format!("projected initial state keeps divergence {div:e}")));
        }
        march_stokes(&sys, rho, &v0, &grid, cfg, stop)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let longest = (0..3).max_by_key(|&i| runs[i].times.len()).unwrap_or(0);
    let steps = runs[longest].times.len();
    let times = runs[longest].times.clone();
    let m = cell.porosity();
    let mut values = vec![0.0; 9 * steps];
    for k in 0..steps {
        for (i, run) in runs.iter().enumerate() {
            for j in 0..3 {
                values[9 * k + 3 * j + i] = if k == 0 {
                    if i == j {
                        m / rho
                    } else {
                        0.0
                    }
                } else {
                    run.flux.get(k).map_or(0.0, |f| f[j])
                };
            }
        }
    }
    TimeKernel::new(times, 9, values)
}

/// `B3 = Σ ⟨∇R_i⟩_{Y_f} ⊗ e_i` with `ΔR_i = 0` in `Y_f`, `∂R_i/∂n = n·e_i` on γ.
pub fn solve_b3(cell: &VoxelCell, cfg: &SolverConfig) -> Result<Mat3> {
    if cell.count(Phase::Fluid) == 0 {
        return Ok([[0.0; 3]; 3]);
    }
    let grid = PeriodicGrid::new(cell);
    let cols = par::map_range(3, |i| -> Result<[f64; 3]> {
        let mut g = [0.0; 3];
        g[i] = 1.0;
        let sys = match assemble_scalar_laplace(cell, Phase::Fluid, ScalarBc::NeumannFlux(g)) {
            Err(Error::NeumannIncompatible { flux, .. }) => {
                return Err(Error::Geometry(format!("interface is not closed: net Neumann flux {flux:e}")))
            }
            other => other?,
        };
        let field = solve_spd(&sys, cfg)?;
        Ok(gradient_integral(&grid, &field, Phase::Fluid))
    });
    let mut b = [[0.0; 3]; 3];
    for (i, col) in cols.into_iter().enumerate() {
        let col = col?;
        for j in 0..3 {
            b[j][i] = col[j];
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcell::{build_cell, GeometrySpec};

    fn cfg() -> SolverConfig {
        SolverConfig::with_tolerance(1e-11)
    }

    #[test]
    fn b3_laminate_is_diag_m_0_0() {
        let cell = build_cell(&GeometrySpec::laminate(0, 0.5, 8)).unwrap();
        let b3 = solve_b3(&cell, &cfg()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == 0 && j == 0 { 0.5 } else { 0.0 };
                assert!((b3[i][j] - want).abs() < 1e-10, "{b3:?}");
            }
        }
    }

    #[test]
    fn b2_linear_in_inverse_viscosity() {
        let cell = build_cell(&GeometrySpec::channel(0, 0.5, 8)).unwrap();
        let b = solve_b2(&cell, 1.0, &cfg()).unwrap();
        let b2 = solve_b2(&cell, 2.0, &cfg()).unwrap();
        assert!((b[0][0] - 2.0 * b2[0][0]).abs() < 1e-9 * b[0][0]);
        assert!(b[1][1].abs() < 1e-12, "{b:?}");
    }
}
