//! Periodic discretizations on the voxel grid: trilinear hexahedra for the
//! elliptic problems and a marker-and-cell grid for Stokes.

mod elasticity;
pub mod element;
mod field;
pub mod grid;
mod scalar;
mod stokes;

pub use elasticity::{assemble_elasticity, divergence_load, ElasticLoad};
pub use field::{CellField, FieldKind, FieldMeta, Support};
pub use grid::{DofMap, PeriodicGrid};
pub use scalar::{assemble_scalar_laplace, ScalarBc};
pub use stokes::{assemble_stokes, StokesSystem};

use crate::error::Phase;
use crate::par;
use crate::sparse::CsrMatrix;
use grid::dof_components;

/// Rank-one border of the nonlocal pore-pressure problem: unknowns `(U, s)`
/// with `K U - c s g = r g` and `-c gᵀU + c s = 0`.
#[derive(Debug, Clone)]
pub struct Border {
    pub g: Vec<f64>,
    pub c: f64,
    pub r: f64,
}

/// A symmetric system on the dofs of one phase.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub problem: String,
    pub fingerprint: String,
    pub n: usize,
    pub support: Phase,
    pub operator: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    /// Nodal integration weights `∫ φ_a` over the support, per dof.
    pub weights: Vec<f64>,
    /// Unit-indicator basis of the operator kernel (disjoint supports).
    pub kernel: Vec<Vec<f64>>,
    /// Constraint rows `c·x = 0` fixing the kernel component (weighted means).
    pub constraints: Vec<Vec<f64>>,
    pub mass: Option<CsrMatrix>,
    pub border: Option<Border>,
}

impl AssembledSystem {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn with_rhs(&self, rhs: Vec<f64>, problem: impl Into<String>) -> Self {
        assert_eq!(rhs.len(), self.len());
        Self {
            problem: problem.into(),
            rhs,
            ..self.clone()
        }
    }
}

/// Row-wise assembly of a uniform element matrix `ke` (`8*block` square,
/// row-major) over the elements of `phase`.
pub(crate) fn assemble_operator(grid: &PeriodicGrid, phase: Phase, dofs: &DofMap, ke: &[f64]) -> CsrMatrix {
    let b = dofs.block();
    let w = 8 * b;
    debug_assert_eq!(ke.len(), w * w);
    let rows = par::map_range(dofs.len(), |row| {
        let (dof, p) = (row / b, row % b);
        let node = dofs.node(dof);
        let mut entries = Vec::with_capacity(27 * b);
        for (e, a) in grid.node_elements(node) {
            if grid.element_phase(e) != phase {
                continue;
            }
            let nodes = grid.element_nodes(e);
            for (bl, &nb) in nodes.iter().enumerate() {
                if let Some(dq) = dofs.dof(nb) {
                    for q in 0..b {
                        entries.push((dq * b + q, ke[(a * b + p) * w + bl * b + q]));
                    }
                }
            }
        }
        entries
    });
    CsrMatrix::from_rows(dofs.len(), rows)
}

/// Assembles the element-uniform load `fe` (length `8*block`) over `phase`.
pub(crate) fn assemble_load(grid: &PeriodicGrid, phase: Phase, dofs: &DofMap, fe: &[f64]) -> Vec<f64> {
    let b = dofs.block();
    par::map_range(dofs.len(), |row| {
        let (dof, p) = (row / b, row % b);
        grid.node_elements(dofs.node(dof))
            .iter()
            .filter(|&&(e, _)| grid.element_phase(e) == phase)
            .map(|&(_, a)| fe[a * b + p])
            .sum()
    })
}

/// `∫_γ φ_a n` per grid node (3 components), `n` the outward normal of `phase`.
pub(crate) fn interface_moments(grid: &PeriodicGrid, phase: Phase) -> Vec<f64> {
    let h = grid.h();
    let mut out = vec![0.0; 3 * grid.num_nodes()];
    for e in 0..grid.num_elements() {
        if grid.element_phase(e) != phase {
            continue;
        }
        let nodes = grid.element_nodes(e);
        for d in 0..3 {
            for side in [0usize, 1] {
                let mut step = [0isize; 3];
                step[d] = if side == 1 { 1 } else { -1 };
                if grid.element_phase(grid.offset(e, step)) == phase {
                    continue;
                }
                let sign = if side == 1 { 1.0 } else { -1.0 };
                for (a, &nd) in nodes.iter().enumerate() {
                    if grid::LOCAL[a][d] == side {
                        out[3 * nd + d] += sign * h * h * 0.25;
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn node_weights(grid: &PeriodicGrid, phase: Phase, dofs: &DofMap) -> Vec<f64> {
    let h = grid.h();
    let fe = vec![h * h * h / 8.0; 8 * dofs.block()];
    assemble_load(grid, phase, dofs, &fe)
}

/// Kernel indicators and weighted-mean constraint rows, one per connected
/// component and vector component.
pub(crate) fn kernel_and_constraints(
    grid: &PeriodicGrid,
    phase: Phase,
    dofs: &DofMap,
    weights: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (label, count) = dof_components(grid, dofs, phase);
    let b = dofs.block();
    let mut kernel = Vec::new();
    let mut constraints = Vec::new();
    for c in 0..count {
        for p in 0..b {
            let mut z = vec![0.0; dofs.len()];
            let mut w = vec![0.0; dofs.len()];
            for (d, &l) in label.iter().enumerate() {
                if l == c {
                    z[d * b + p] = 1.0;
                    w[d * b + p] = weights[d * b + p];
                }
            }
            kernel.push(z);
            constraints.push(w);
        }
    }
    (kernel, constraints)
}
