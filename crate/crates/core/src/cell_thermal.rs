//! Thermal correctors of the skeleton and heat relaxation in the pores.

use serde::{Deserialize, Serialize};

use crate::cell_elastic::Mat3;
use crate::discretize::element::reference;
use crate::discretize::{assemble_scalar_laplace, CellField, FieldKind, PeriodicGrid, ScalarBc};
use crate::error::{Error, Phase, Result};
use crate::kernel::TimeKernel;
use crate::linsolve::{march_heat, solve_spd, solve_vector, SolverConfig, TimeGrid};
use crate::microcell::VoxelCell;
use crate::par;

/// Fluid heat-exchange parameters entering the relaxation problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatParams {
    pub tau0: f64,
    pub c_pf: f64,
    pub kappa1: f64,
    pub mu1: f64,
}

impl HeatParams {
    /// `ϰ1 μ1 / (τ0 c_pf)`
    pub fn diffusivity(&self) -> f64 {
        self.kappa1 * self.mu1 / (self.tau0 * self.c_pf)
    }
}

/// Time schedule for kernel marching.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// Steps of `h²/(6D)`, then geometric growth; stops once the kernel falls
    /// below `1e-6·m` or after 50 unit-length diffusion times.
    Auto,
    Grid(TimeGrid),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseStatus {
    Solved,
    EmptyPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalCoefficients {
    pub btheta: Mat3,
    pub b_kernel: Option<TimeKernel>,
    pub c_theta_f: Option<f64>,
}

/// `ΔΘ_i = 0` in `Y_s`, `∂Θ_i/∂n = -e_i·n` on γ, zero mean.
pub fn solve_theta_corrector(cell: &VoxelCell, i: usize, cfg: &SolverConfig) -> Result<CellField> {
    if i > 2 {
        return Err(Error::Parameter(format!("direction {i} out of range")));
    }
    if !cell.solid_connected() {
        return Err(Error::Disconnected {
            phase: Phase::Solid,
            hint: "effective conductivity needs a connected skeleton".into(),
        });
    }
    let mut g = [0.0; 3];
    g[i] = -1.0;
    let sys = match assemble_scalar_laplace(cell, Phase::Solid, ScalarBc::NeumannFlux(g)) {
        Err(Error::NeumannIncompatible { flux, .. }) => {
            return Err(Error::Geometry(format!("interface is not closed: net Neumann flux {flux:e}")))
        }
        other => other?,
    };
    let mut field = solve_spd(&sys, cfg)?;
    field.meta.problem = format!("Theta{}", i + 1);
    Ok(field)
}

/// `∫_{phase} ∇u` of a nodal scalar field.
pub fn gradient_integral(grid: &PeriodicGrid, field: &CellField, phase: Phase) -> [f64; 3] {
    let r = reference();
    let h = grid.h();
    let mut out = [0.0; 3];
    for e in 0..grid.num_elements() {
        if grid.element_phase(e) != phase {
            continue;
        }
        for (a, &node) in grid.element_nodes(e).iter().enumerate() {
            let u = field.values[node];
            for (k, o) in out.iter_mut().enumerate() {
                *o += h * h * r.grad[a][k] * u;
            }
        }
    }
    out
}

/// `B^θ = κ0s((1-m) I + Σ ⟨∇Θ_i⟩_{Y_s} ⊗ e_i)`; column `i` holds `⟨∇Θ_i⟩`.
pub fn assemble_btheta(cell: &VoxelCell, correctors: &[CellField], kappa0s: f64) -> Result<Mat3> {
    if correctors.len() != 3 {
        return Err(Error::Consistency(format!("expected 3 thermal correctors, got {}", correctors.len())));
    }
    let fp = cell.fingerprint();
    if correctors.iter().any(|c| c.meta.fingerprint != fp || c.kind != FieldKind::ScalarNode) {
        return Err(Error::Consistency("thermal corrector was not solved on this cell".into()));
    }
    let grid = PeriodicGrid::new(cell);
    let m = cell.porosity();
    let mut b = [[0.0; 3]; 3];
    for (i, c) in correctors.iter().enumerate() {
        let g = gradient_integral(&grid, c, Phase::Solid);
        for j in 0..3 {
            b[j][i] = kappa0s * (if i == j { 1.0 - m } else { 0.0 } + g[j]);
        }
    }
    Ok(b)
}

pub fn solve_btheta(cell: &VoxelCell, kappa0s: f64, cfg: &SolverConfig) -> Result<Mat3> {
    let fields = par::map_range(3, |i| solve_theta_corrector(cell, i, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    assemble_btheta(cell, &fields, kappa0s)
}

fn check_heat(p: &HeatParams, need_tau: bool) -> Result<()> {
    if need_tau && p.tau0 <= 0.0 {
        return Err(Error::Parameter(
            "relaxation kernel needs tau0 > 0; for tau0 = 0 use the quasi-static c_theta_f path".into(),
        ));
    }
    for (name, v) in [("kappa1", p.kappa1), ("mu1", p.mu1)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if need_tau && !(p.c_pf > 0.0 && p.c_pf.is_finite()) {
        return Err(Error::Parameter(format!("c_pf must be positive, got {}", p.c_pf)));
    }
    Ok(())
}

/// `b^θ_f(t) = ∫_{Y_f} Θ(t)` for `τ0 c_pf ∂_tΘ = ϰ1 μ1 ΔΘ`, `Θ(0) = 1` in
/// `Y_f`, `Θ = 0` on γ. The sample at `t = 0` is exactly `m`.
pub fn solve_relaxation_kernel(cell: &VoxelCell, p: &HeatParams, schedule: &Schedule, cfg: &SolverConfig) -> Result<TimeKernel> {
    check_heat(p, true)?;
    let m = cell.porosity();
    if m == 0.0 {
        return Err(Error::EmptyPhase(Phase::Fluid));
    }
    let sys = assemble_scalar_laplace(cell, Phase::Fluid, ScalarBc::Dirichlet)?;
    let d = p.diffusivity();
    let h = 1.0 / cell.n() as f64;
    let (grid, stop) = match schedule {
        Schedule::Auto => (TimeGrid::ramp_geometric(h * h / (6.0 * d), 50, 1.02, 50.0 / d)?, Some(1e-6 * m)),
        Schedule::Grid(g) => (g.clone(), None),
    };
    if sys.is_empty() {
        let times = grid.times()[..2.min(grid.len())].to_vec();
        let mut values = vec![m];
        values.resize(times.len(), 0.0);
        return TimeKernel::scalar(times, values);
    }
    let traj = march_heat(&sys, d, &sys.weights, m, &sys.weights, &grid, cfg, stop)?;
    TimeKernel::scalar(traj.times, traj.values)
}

/// `c^θ_f = ∫_{Y_f} Θ_0` with `ϰ1 μ1 ΔΘ_0 = 1` in `Y_f`, `Θ_0 = 0` on γ.
pub fn solve_c_theta_f(cell: &VoxelCell, kappa1: f64, mu1: f64, cfg: &SolverConfig) -> Result<(f64, PhaseStatus)> {
    check_heat(
        &HeatParams {
            tau0: 0.0,
            c_pf: 0.0,
            kappa1,
            mu1,
        },
        false,
    )?;
    if cell.count(Phase::Fluid) == 0 {
        return Ok((0.0, PhaseStatus::EmptyPhase));
    }
    let sys = assemble_scalar_laplace(cell, Phase::Fluid, ScalarBc::Dirichlet)?;
    if sys.is_empty() {
        return Ok((0.0, PhaseStatus::Solved));
    }
    let rhs: Vec<f64> = sys.weights.iter().map(|w| -w / (kappa1 * mu1)).collect();
    let out = solve_vector(&sys, &rhs, cfg)?;
    Ok((par::dot(&sys.weights, &out.x), PhaseStatus::Solved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcell::{build_cell, GeometrySpec};

    fn cfg() -> SolverConfig {
        SolverConfig::with_tolerance(1e-12)
    }

    #[test]
    fn full_solid_conductivity_is_isotropic() {
        let cell = build_cell(&GeometrySpec::laminate(0, 0.0, 6)).unwrap();
        let b = solve_btheta(&cell, 2.0, &cfg()).unwrap();
        assert_eq!(b, [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]);
    }

    #[test]
    fn laminate_tangential_corrector_vanishes() {
        let cell = build_cell(&GeometrySpec::laminate(0, 0.5, 8)).unwrap();
        let t2 = solve_theta_corrector(&cell, 1, &cfg()).unwrap();
        assert!(t2.max_abs() < 1e-14);
        let t1 = solve_theta_corrector(&cell, 0, &cfg()).unwrap();
        let g = gradient_integral(&PeriodicGrid::new(&cell), &t1, Phase::Solid);
        assert!((g[0] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn c_theta_f_scales_inversely() {
        let cell = build_cell(&GeometrySpec::laminate(2, 0.5, 8)).unwrap();
        let (c1, _) = solve_c_theta_f(&cell, 1.0, 1.0, &cfg()).unwrap();
        let (c2, _) = solve_c_theta_f(&cell, 2.0, 1.0, &cfg()).unwrap();
        assert!(c1 < 0.0);
        assert!((c2 - 0.5 * c1).abs() < 1e-12 * c1.abs());
        let solid = build_cell(&GeometrySpec::laminate(2, 0.0, 8)).unwrap();
        assert_eq!(solve_c_theta_f(&solid, 1.0, 1.0, &cfg()).unwrap(), (0.0, PhaseStatus::EmptyPhase));
    }

    #[test]
    fn tau_zero_is_redirected() {
        let cell = build_cell(&GeometrySpec::laminate(2, 0.5, 8)).unwrap();
        let p = HeatParams {
            tau0: 0.0,
            c_pf: 1.0,
            kappa1: 1.0,
            mu1: 1.0,
        };
        let err = solve_relaxation_kernel(&cell, &p, &Schedule::Auto, &cfg()).unwrap_err();
        assert!(err.to_string().contains("c_theta_f"));
    }
}
