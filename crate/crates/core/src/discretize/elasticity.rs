use super::element::{elastic_matrix, reference};
use super::{
    assemble_load, assemble_operator, interface_moments, kernel_and_constraints, node_weights, AssembledSystem,
    Border, DofMap, PeriodicGrid,
};
use crate::error::{Error, Phase, Result};
use crate::microcell::VoxelCell;

/// Right-hand side family of the solid-skeleton corrector problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElasticLoad {
    /// Macroscopic strain `J^ij` (0-based indices).
    EigenStrain(usize, usize),
    /// Unit volumetric eigenstrain weighted by `η0`.
    UnitDilation,
    /// Unit pore pressure acting as traction `1/m` on the interface.
    PorePressure { m: f64 },
    /// Pore pressure with the nonlocal mean-dilation coupling.
    BorderedNonlocal { m: f64 },
}

impl ElasticLoad {
    pub fn name(&self) -> String {
        match self {
            ElasticLoad::EigenStrain(i, j) => format!("U{}{}", i + 1, j + 1),
            ElasticLoad::UnitDilation => "U0".into(),
            ElasticLoad::PorePressure { .. } => "U1".into(),
            ElasticLoad::BorderedNonlocal { .. } => "U2".into(),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

pub(crate) fn check_porosity(cell: &VoxelCell, m: f64) -> Result<()> {
    if m == 0.0 || cell.porosity() == 0.0 {
        return Err(Error::Parameter("pore-pressure correctors undefined for zero porosity".into()));
    }
    if (m - cell.porosity()).abs() > 1e-15 {
        return Err(Error::Consistency(format!(
            "porosity {m} does not match the cell porosity {}",
            cell.porosity()
        )));
    }
    Ok(())
}

/// `∫_{Y_s} div φ` per vector dof.
pub fn divergence_load(grid: &PeriodicGrid, dofs: &DofMap) -> Vec<f64> {
    let r = reference();
    let h = grid.h();
    let fe: Vec<f64> = (0..24).map(|k| h * h * r.grad[k / 3][k % 3]).collect();
    assemble_load(grid, Phase::Solid, dofs, &fe)
}

/// Displacement-form weak problem on the solid phase:
/// `∫ λ0 D(U):D(φ) + η0 div U div φ = ℓ(φ)`, kernel = rigid translations.
pub fn assemble_elasticity(cell: &VoxelCell, lambda0: f64, eta0: f64, load: ElasticLoad) -> Result<AssembledSystem> {
    check_positive("lambda0", lambda0)?;
    check_positive("eta0", eta0)?;
    if cell.count(Phase::Solid) == 0 {
        return Err(Error::EmptyPhase(Phase::Solid));
    }
    if !cell.solid_connected() {
        return Err(Error::Disconnected {
            phase: Phase::Solid,
            hint: "effective elastic tensors need a connected skeleton".into(),
        });
    }
    let grid = PeriodicGrid::new(cell);
    let h = grid.h();
    let dofs = DofMap::touching(&grid, Phase::Solid, 3);
    let operator = assemble_operator(&grid, Phase::Solid, &dofs, &elastic_matrix(lambda0, eta0, h));
    let r = reference();
    let mut border = None;
    let rhs = match load {
        ElasticLoad::EigenStrain(i, j) => {
            if i > 2 || j > 2 {
                return Err(Error::Parameter(format!("strain indices ({i}, {j}) out of range")));
            }
            let mut jm = [[0.0; 3]; 3];
            jm[i][j] += 0.5;
            jm[j][i] += 0.5;
            let fe: Vec<f64> = (0..24)
                .map(|k| {
                    let (a, q) = (k / 3, k % 3);
                    -lambda0 * h * h * (0..3).map(|s| jm[q][s] * r.grad[a][s]).sum::<f64>()
                })
                .collect();
            assemble_load(&grid, Phase::Solid, &dofs, &fe)
        }
        ElasticLoad::UnitDilation => divergence_load(&grid, &dofs).iter().map(|g| -eta0 * g).collect(),
        ElasticLoad::PorePressure { m } => {
            check_porosity(cell, m)?;
            let mom = interface_moments(&grid, Phase::Solid);
            dofs.gather(&mom).iter().map(|g| -g / m).collect()
        }
        ElasticLoad::BorderedNonlocal { m } => {
            check_porosity(cell, m)?;
            if m > 0.9 {
                return Err(Error::Parameter(format!(
                    "nonlocal corrector requires porosity <= 0.9, got {m}"
                )));
            }
            let g = divergence_load(&grid, &dofs);
            let rr = 1.0 / (1.0 - m) - 1.0 / m;
            let rhs = g.iter().map(|v| rr * v).collect();
            border = Some(Border {
                g,
                c: eta0 / (1.0 - m),
                r: rr,
            });
            rhs
        }
    };
    let weights = node_weights(&grid, Phase::Solid, &dofs);
    let (kernel, constraints) = kernel_and_constraints(&grid, Phase::Solid, &dofs, &weights);
    Ok(AssembledSystem {
        problem: load.name(),
        fingerprint: cell.fingerprint(),
        n: cell.n(),
        support: Phase::Solid,
        operator,
        rhs,
        dofs,
        weights,
        kernel,
        constraints,
        mass: None,
        border,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcell::{build_cell, GeometrySpec};

    #[test]
    fn full_solid_eigenstrain_has_zero_load() {
        let cell = build_cell(&GeometrySpec::laminate(0, 0.0, 4)).unwrap();
        let sys = assemble_elasticity(&cell, 1.0, 1.0, ElasticLoad::EigenStrain(0, 0)).unwrap();
        assert!(sys.rhs.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(sys.kernel.len(), 3);
        assert!(sys.operator.symmetry_defect() < 1e-14);
    }

    #[test]
    fn interface_traction_equals_volume_divergence() {
        let cell = build_cell(&GeometrySpec::sphere([0.4, 0.5, 0.55], 0.3, Phase::Fluid, 8)).unwrap();
        let grid = PeriodicGrid::new(&cell);
        let dofs = DofMap::touching(&grid, Phase::Solid, 3);
        let face = dofs.gather(&interface_moments(&grid, Phase::Solid));
        let vol = divergence_load(&grid, &dofs);
        let diff = face.iter().zip(&vol).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-15, "{diff}");
    }

    #[test]
    fn parameter_and_geometry_errors() {
        let cell = build_cell(&GeometrySpec::laminate(0, 0.5, 8)).unwrap();
        assert!(matches!(
            assemble_elasticity(&cell, 0.0, 1.0, ElasticLoad::UnitDilation),
            Err(Error::Parameter(_))
        ));
        let pore = build_cell(&GeometrySpec::sphere([0.5; 3], 0.3, Phase::Solid, 8)).unwrap();
        assert!(matches!(
            assemble_elasticity(&pore, 1.0, 1.0, ElasticLoad::UnitDilation),
            Err(Error::Disconnected { .. })
        ));
        let solid = build_cell(&GeometrySpec::laminate(0, 0.0, 8)).unwrap();
        let err = assemble_elasticity(&solid, 1.0, 1.0, ElasticLoad::PorePressure { m: 0.0 }).unwrap_err();
        assert!(err.to_string().contains("zero porosity"));
    }
}
