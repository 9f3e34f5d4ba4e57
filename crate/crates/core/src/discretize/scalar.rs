use super::element::{reference, scalar_mass, scalar_stiffness};
use super::{
    assemble_load, assemble_operator, interface_moments, kernel_and_constraints, node_weights, AssembledSystem,
    DofMap, PeriodicGrid,
};
use crate::error::{Error, Phase, Result};
use crate::microcell::VoxelCell;

/// Boundary data for a Laplace problem posed on one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarBc {
    /// `∂u/∂n = g·n` on γ, `n` outward from the phase; pure Neumann with a
    /// mean-zero constraint.
    NeumannFlux([f64; 3]),
    /// `u = 0` on γ with no source (operator and mass only).
    Dirichlet,
    /// `Δu = f` in the phase, `u = 0` on γ.
    DirichletSource(f64),
}

/// Stiffness `∫∇u·∇φ` on `phase`. Dirichlet variants restrict to nodes
/// interior to the phase and carry the consistent mass matrix; the
/// right-hand side is then `-f ∫φ`.
pub fn assemble_scalar_laplace(cell: &VoxelCell, phase: Phase, bc: ScalarBc) -> Result<AssembledSystem> {
    if cell.count(phase) == 0 {
        return Err(Error::EmptyPhase(phase));
    }
    let grid = PeriodicGrid::new(cell);
    let h = grid.h();
    let neumann = matches!(bc, ScalarBc::NeumannFlux(_));
    let dofs = if neumann {
        DofMap::touching(&grid, phase, 1)
    } else {
        DofMap::interior(&grid, phase, 1)
    };
    let operator = assemble_operator(&grid, phase, &dofs, &scalar_stiffness(h));
    let weights = node_weights(&grid, phase, &dofs);
    let (rhs, kernel, constraints, mass, label) = match bc {
        ScalarBc::NeumannFlux(g) => {
            let mom = interface_moments(&grid, phase);
            let rhs: Vec<f64> = (0..dofs.len())
                .map(|d| {
                    let nd = dofs.node(d);
                    (0..3).map(|k| g[k] * mom[3 * nd + k]).sum()
                })
                .collect();
            let (kernel, constraints) = kernel_and_constraints(&grid, phase, &dofs, &weights);
            let scale: f64 = rhs.iter().map(|v| v.abs()).sum();
            for z in &kernel {
                let flux: f64 = z.iter().zip(&rhs).map(|(a, b)| a * b).sum();
                if flux.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::NeumannIncompatible {
                        flux,
                        limit: 1e-12 * scale,
                    });
                }
            }
            (rhs, kernel, constraints, None, format!("neumann{g:?}"))
        }
        ScalarBc::Dirichlet | ScalarBc::DirichletSource(_) => {
            let f = if let ScalarBc::DirichletSource(f) = bc { f } else { 0.0 };
            let load: Vec<f64> = reference().load.iter().map(|v| v * h * h * h).collect();
            let rhs = assemble_load(&grid, phase, &dofs, &load).iter().map(|v| -f * v).collect();
            let mass = assemble_operator(&grid, phase, &dofs, &scalar_mass(h));
            (rhs, Vec::new(), Vec::new(), Some(mass), format!("dirichlet-source({f})"))
        }
    };
    Ok(AssembledSystem {
        problem: label,
        fingerprint: cell.fingerprint(),
        n: cell.n(),
        support: phase,
        operator,
        rhs,
        dofs,
        weights,
        kernel,
        constraints,
        mass,
        border: None,
    })
}

#[cfg(test)]
/// `∫_{phase} ∂_k φ` per scalar dof, for the volume route of Neumann loads.
pub(crate) fn gradient_load(grid: &PeriodicGrid, phase: Phase, dofs: &DofMap, k: usize) -> Vec<f64> {
    let r = reference();
    let h = grid.h();
    let fe: Vec<f64> = (0..8).map(|a| h * h * r.grad[a][k]).collect();
    assemble_load(grid, phase, dofs, &fe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcell::{build_cell, GeometrySpec};

    #[test]
    fn full_solid_neumann_has_empty_interface() {
        let cell = build_cell(&GeometrySpec::laminate(0, 0.0, 6)).unwrap();
        let sys = assemble_scalar_laplace(&cell, Phase::Solid, ScalarBc::NeumannFlux([-1.0, 0.0, 0.0])).unwrap();
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        assert_eq!(sys.kernel.len(), 1);
    }

    #[test]
    fn face_and_volume_neumann_loads_agree() {
        let cell = build_cell(&GeometrySpec::sphere([0.5, 0.45, 0.5], 0.3, Phase::Solid, 8)).unwrap();
        let grid = PeriodicGrid::new(&cell);
        for phase in [Phase::Solid, Phase::Fluid] {
            for k in 0..3 {
                let mut g = [0.0; 3];
                g[k] = 1.0;
                let sys = assemble_scalar_laplace(&cell, phase, ScalarBc::NeumannFlux(g)).unwrap();
                let vol = gradient_load(&grid, phase, &sys.dofs, k);
                for (a, b) in sys.rhs.iter().zip(&vol) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn empty_phase_is_reported() {
        let cell = build_cell(&GeometrySpec::laminate(1, 0.0, 4)).unwrap();
        assert!(matches!(
            assemble_scalar_laplace(&cell, Phase::Fluid, ScalarBc::DirichletSource(1.0)),
            Err(Error::EmptyPhase(Phase::Fluid))
        ));
    }
}
