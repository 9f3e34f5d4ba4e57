//! Dense direct solves with Lagrange multipliers, used as brute-force oracles
//! at small resolution.

use nalgebra::{DMatrix, DVector};

use crate::discretize::{AssembledSystem, StokesSystem};
use crate::error::{Error, Result};

fn lu_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::Consistency("dense oracle matrix is singular".into()))
}

/// Solves the system with its mean constraints (and border, if any) by LU.
/// Returns the dof vector and the bordered scalar.
pub fn solve_spd_dense(sys: &AssembledSystem) -> Result<(Vec<f64>, Option<f64>)> {
    let n = sys.len();
    let nb = usize::from(sys.border.is_some());
    let nc = sys.constraints.len();
    let size = n + nb + nc;
    let mut a = DMatrix::zeros(size, size);
    let mut b = DVector::zeros(size);
    a.view_mut((0, 0), (n, n)).copy_from(&sys.operator.to_dense());
    for (k, c) in sys.constraints.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            a[(n + nb + k, i)] = v;
            a[(i, n + nb + k)] = v;
        }
    }
    match &sys.border {
        Some(border) => {
            for (i, &g) in border.g.iter().enumerate() {
                a[(i, n)] = -border.c * g;
                a[(n, i)] = -border.c * g;
                b[i] = border.r * g;
            }
            a[(n, n)] = border.c;
        }
        None => b.rows_mut(0, n).copy_from_slice(&sys.rhs),
    }
    let x = lu_solve(a, b)?;
    let s = sys.border.as_ref().map(|_| x[n]);
    Ok((x.rows(0, n).iter().copied().collect(), s))
}

/// Dense solve of `(αI + μL) u + G p = f`, `Gᵀu = 0`, zero-mean pressure.
pub fn solve_stokes_dense(sys: &StokesSystem, alpha: f64, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nf = sys.num_faces();
    let np = sys.num_cells();
    let nk = sys.pressure_components.len();
    let size = nf + np + nk;
    let mut a = DMatrix::zeros(size, size);
    let lap = sys.laplacian.to_dense();
    for i in 0..nf {
        for j in 0..nf {
            a[(i, j)] = sys.mu * lap[(i, j)];
        }
        a[(i, i)] += alpha;
        for (j, v) in sys.grad.row(i) {
            a[(i, nf + j)] = v;
            a[(nf + j, i)] = v;
        }
    }
    for (k, comp) in sys.pressure_components.iter().enumerate() {
        for &s in comp {
            a[(nf + np + k, nf + s)] = 1.0;
            a[(nf + s, nf + np + k)] = 1.0;
        }
    }
    let mut b = DVector::zeros(size);
    b.rows_mut(0, nf).copy_from_slice(f);
    let x = lu_solve(a, b)?;
    Ok((
        x.rows(0, nf).iter().copied().collect(),
        x.rows(nf, np).iter().copied().collect(),
    ))
}

/// One dense backward-Euler step `(M + τ K) x = rhs`.
pub fn heat_step_dense(sys: &AssembledSystem, tau: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let mass = sys
        .mass
        .as_ref()
        .ok_or_else(|| Error::Configuration("heat step needs a mass matrix".into()))?;
    let a = mass.to_dense() + sys.operator.to_dense() * tau;
    Ok(lu_solve(a, DVector::from_column_slice(rhs))?.iter().copied().collect())
}
