//! Solid-skeleton corrector problems and the effective elastic coefficients.

use nalgebra::{Matrix3, Matrix6};
use serde::{Deserialize, Serialize};

use crate::discretize::element::reference;
use crate::discretize::{assemble_elasticity, CellField, ElasticLoad, FieldKind, PeriodicGrid};
use crate::error::{Error, Phase, Result};
use crate::linsolve::{solve_spd, SolverConfig};
use crate::microcell::VoxelCell;
use crate::par;

/// Index pairs of the 6x6 ordering 11, 22, 33, 23, 13, 12 (0-based).
pub const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

pub type Mat3 = [[f64; 3]; 3];

/// `J^ij = (e_i⊗e_j + e_j⊗e_i)/2`
pub fn j_basis(i: usize, j: usize) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    m[i][j] += 0.5;
    m[j][i] += 0.5;
    m
}

/// Fourth-rank tensor with minor symmetries as a 6x6 matrix, entry
/// `(I, K) = T_{ij kl}` for `I = (ij)`, `K = (kl)`, no Voigt factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor4(pub [[f64; 6]; 6]);

impl SymTensor4 {
    /// `Σ J^ij ⊗ J^ij`, the identity on symmetric tensors.
    pub fn identity() -> Self {
        let mut m = [[0.0; 6]; 6];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = if k < 3 { 1.0 } else { 0.5 };
        }
        Self(m)
    }

    pub fn zero() -> Self {
        Self([[0.0; 6]; 6])
    }

    pub fn matrix(&self) -> Matrix6<f64> {
        Matrix6::from_fn(|i, j| self.0[i][j])
    }

    pub fn flat(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.len() != 36 {
            return Err(Error::Parameter(format!("expected 36 tensor entries, got {}", v.len())));
        }
        let mut m = [[0.0; 6]; 6];
        for (k, x) in v.iter().enumerate() {
            m[k / 6][k % 6] = *x;
        }
        Ok(Self(m))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                worst = worst.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        worst / scale
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.matrix();
        let sym = (m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Component `T_{ijkl}` for arbitrary indices.
    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0[pair_index(i, j)][pair_index(k, l)]
    }

    /// Tensor of the geometry whose axis `k` is the old axis `perm[k]`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let mut m = [[0.0; 6]; 6];
        for (a, &(i, j)) in PAIRS.iter().enumerate() {
            for (b, &(k, l)) in PAIRS.iter().enumerate() {
                m[a][b] = self.component(perm[i], perm[j], perm[k], perm[l]);
            }
        }
        Self(m)
    }
}

pub fn pair_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) => 3,
        (0, 2) => 4,
        (0, 1) => 5,
        _ => panic!("index out of range"),
    }
}

pub fn mat3_min_eigenvalue(m: &Mat3) -> f64 {
    let a = Matrix3::from_fn(|i, j| 0.5 * (m[i][j] + m[j][i]));
    a.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn mat3_permuted(m: &Mat3, perm: [usize; 3]) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[perm[i]][perm[j]];
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ElasticCorrectors {
    pub lambda0: f64,
    pub eta0: f64,
    pub m: f64,
    pub fingerprint: String,
    /// `U^ij` in the order of [`PAIRS`].
    pub uij: Vec<CellField>,
    pub u0: CellField,
    /// Absent at zero porosity.
    pub u1: Option<CellField>,
    /// Absent at zero porosity or when `m > 0.9`.
    pub u2: Option<CellField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticCoefficients {
    pub a0_tensor: SymTensor4,
    pub a1_tensor: SymTensor4,
    pub b0: Mat3,
    pub b1: Mat3,
    pub c0: Mat3,
    pub a0_tilde: f64,
    pub a0: f64,
    pub a1: f64,
    /// `None` when the nonlocal corrector was not computed (`m > 0.9`).
    pub a2: Option<f64>,
}

fn solve(cell: &VoxelCell, lambda0: f64, eta0: f64, load: ElasticLoad, cfg: &SolverConfig) -> Result<CellField> {
    solve_spd(&assemble_elasticity(cell, lambda0, eta0, load)?, cfg)
}

pub fn solve_uij(cell: &VoxelCell, lambda0: f64, eta0: f64, i: usize, j: usize, cfg: &SolverConfig) -> Result<CellField> {
    solve(cell, lambda0, eta0, ElasticLoad::EigenStrain(i, j), cfg)
}

pub fn solve_u0(cell: &VoxelCell, lambda0: f64, eta0: f64, cfg: &SolverConfig) -> Result<CellField> {
    solve(cell, lambda0, eta0, ElasticLoad::UnitDilation, cfg)
}

pub fn solve_u1(cell: &VoxelCell, lambda0: f64, eta0: f64, m: f64, cfg: &SolverConfig) -> Result<CellField> {
    solve(cell, lambda0, eta0, ElasticLoad::PorePressure { m }, cfg)
}

pub fn solve_u2(cell: &VoxelCell, lambda0: f64, eta0: f64, m: f64, cfg: &SolverConfig) -> Result<CellField> {
    solve(cell, lambda0, eta0, ElasticLoad::BorderedNonlocal { m }, cfg)
}

/// Solves all ten correctors concurrently.
pub fn solve_all(cell: &VoxelCell, lambda0: f64, eta0: f64, cfg: &SolverConfig) -> Result<ElasticCorrectors> {
    let m = cell.porosity();
    let mut jobs: Vec<ElasticLoad> = PAIRS.iter().map(|&(i, j)| ElasticLoad::EigenStrain(i, j)).collect();
    jobs.push(ElasticLoad::UnitDilation);
    if m > 0.0 {
        jobs.push(ElasticLoad::PorePressure { m });
        if m <= 0.9 {
            jobs.push(ElasticLoad::BorderedNonlocal { m });
        }
    }
    let mut fields = par::map_jobs(&jobs, |&load| solve(cell, lambda0, eta0, load, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let uij: Vec<CellField> = fields.by_ref().take(6).collect();
    let u0 = fields.next().expect("U0 job");
    let u1 = fields.next();
    let u2 = fields.next();
    Ok(ElasticCorrectors {
        lambda0,
        eta0,
        m,
        fingerprint: cell.fingerprint(),
        uij,
        u0,
        u1,
        u2,
    })
}

/// `∫_{Y_s} D(y, U)` of a nodal vector field.
pub fn strain_integral(grid: &PeriodicGrid, field: &CellField) -> Mat3 {
    let r = reference();
    let h = grid.h();
    let mut d = [[0.0; 3]; 3];
    for e in 0..grid.num_elements() {
        if grid.element_phase(e) != Phase::Solid {
            continue;
        }
        for (a, &node) in grid.element_nodes(e).iter().enumerate() {
            for p in 0..3 {
                let u = field.values[3 * node + p];
                if u == 0.0 {
                    continue;
                }
                for q in 0..3 {
                    let g = h * h * r.grad[a][q] * u;
                    d[p][q] += 0.5 * g;
                    d[q][p] += 0.5 * g;
                }
            }
        }
    }
    d
}

fn trace(m: &Mat3) -> f64 {
    m[0][0] + m[1][1] + m[2][2]
}

pub fn assemble_elastic_coefficients(cell: &VoxelCell, c: &ElasticCorrectors) -> Result<ElasticCoefficients> {
    let fp = cell.fingerprint();
    let all = c.uij.iter().chain([&c.u0]).chain(c.u1.iter()).chain(c.u2.iter());
    for f in all {
        if f.meta.fingerprint != fp || f.kind != FieldKind::VectorNode {
            return Err(Error::Consistency(format!(
                "corrector {} was not solved on this cell",
                f.meta.problem
            )));
        }
    }
    if c.fingerprint != fp || (c.m - cell.porosity()).abs() > 1e-15 {
        return Err(Error::Consistency("corrector set belongs to a different cell".into()));
    }
    if c.uij.len() != 6 {
        return Err(Error::Consistency(format!("expected 6 strain correctors, got {}", c.uij.len())));
    }
    let m = cell.porosity();
    let grid = PeriodicGrid::new(cell);
    let mut a1 = SymTensor4::zero();
    let mut c0 = [[0.0; 3]; 3];
    for (kl, field) in c.uij.iter().enumerate() {
        let d = strain_integral(&grid, field);
        for (ij, &(i, j)) in PAIRS.iter().enumerate() {
            a1.0[ij][kl] = d[i][j];
        }
        let (k, l) = PAIRS[kl];
        c0[k][l] = trace(&d);
        c0[l][k] = trace(&d);
    }
    let mut a0_tensor = SymTensor4::identity();
    for i in 0..6 {
        for j in 0..6 {
            a0_tensor.0[i][j] += a1.0[i][j];
        }
    }
    let b0 = strain_integral(&grid, &c.u0);
    let a0_tilde = trace(&b0);
    let (b1, a1s) = match &c.u1 {
        Some(u1) => {
            let b1 = strain_integral(&grid, u1);
            (b1, trace(&b1))
        }
        None if m == 0.0 => ([[0.0; 3]; 3], 0.0),
        None => return Err(Error::Consistency("pore-pressure corrector missing".into())),
    };
    let a2 = match &c.u2 {
        Some(u2) => Some(trace(&strain_integral(&grid, u2))),
        None if m == 0.0 => Some(0.0),
        None => None,
    };
    Ok(ElasticCoefficients {
        a0_tensor,
        a1_tensor: a1,
        b0,
        b1,
        c0,
        a0_tilde,
        a0: a0_tilde + 1.0 - m,
        a1: a1s,
        a2,
    })
}

pub fn elastic_coefficients(cell: &VoxelCell, lambda0: f64, eta0: f64, cfg: &SolverConfig) -> Result<ElasticCoefficients> {
    assemble_elastic_coefficients(cell, &solve_all(cell, lambda0, eta0, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcell::{build_cell, GeometrySpec};

    fn cfg() -> SolverConfig {
        SolverConfig::with_tolerance(1e-12)
    }

    #[test]
    fn j_basis_traces() {
        for i in 0..3 {
            for j in 0..3 {
                let t = trace(&j_basis(i, j));
                assert_eq!(t, if i == j { 1.0 } else { 0.0 });
                assert_eq!(j_basis(i, j), j_basis(j, i));
            }
        }
    }

    #[test]
    fn full_solid_is_identity() {
        let cell = build_cell(&GeometrySpec::laminate(0, 0.0, 6)).unwrap();
        let co = elastic_coefficients(&cell, 1.0, 1.0, &cfg()).unwrap();
        assert_eq!(co.a0_tensor, SymTensor4::identity());
        assert_eq!(co.a2, Some(0.0));
        assert_eq!(co.a0, 1.0);
    }

    #[test]
    fn laminate_u0_is_piecewise_linear() {
        let (l0, e0) = (1.5, 0.7);
        let cell = build_cell(&GeometrySpec::laminate(0, 0.5, 8)).unwrap();
        let u0 = solve_u0(&cell, l0, e0, &cfg()).unwrap();
        let slope = -e0 / (l0 + e0);
        let h = 1.0 / 8.0;
        // solid occupies x in [0.5, 1]; along x the slope is constant
        for node in 0..512 {
            let x = node % 8;
            if (4..8).contains(&x) {
                // the node after x = 7 is the periodic image x = 0
                let next = node - x + (x + 1) % 8;
                let du = u0.get(next, 0) - u0.get(node, 0);
                assert!((du - slope * h).abs() < 1e-9, "x={x} du={du}");
            }
            assert!(u0.get(node, 1).abs() < 1e-12 && u0.get(node, 2).abs() < 1e-12);
        }
        let co = elastic_coefficients(&cell, l0, e0, &cfg()).unwrap();
        assert!((co.b0[0][0] - 0.5 * slope).abs() < 1e-9);
        assert!((co.a0 - co.a0_tilde - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tensor_permutation_roundtrip() {
        let mut t = SymTensor4::identity();
        t.0[0][1] = 0.3;
        t.0[1][0] = 0.3;
        let p = t.permuted([1, 2, 0]).permuted([2, 0, 1]);
        assert_eq!(p, t);
    }
}
