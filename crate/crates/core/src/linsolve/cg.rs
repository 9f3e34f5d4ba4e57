use super::config::{Preconditioner, SolverConfig};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative true residual `‖b - A x‖ / ‖b‖` at exit.
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Removes the components along the (mutually orthogonal) kernel vectors.
pub fn project(kernel: &[Vec<f64>], v: &mut [f64]) {
    for z in kernel {
        let zz = par::dot(z, z);
        if zz > 0.0 {
            let c = par::dot(z, v) / zz;
            par::axpy(-c, z, v);
        }
    }
}

/// Preconditioned conjugate gradients for a symmetric operator that is
/// positive definite on the complement of `kernel`.
pub fn pcg<A>(apply: A, b: &[f64], diag: Option<&[f64]>, kernel: &[Vec<f64>], cfg: &SolverConfig) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
{
    pcg_observed(apply, b, diag, kernel, cfg, None, |_| {})
}

pub fn pcg_observed<A, O>(
    apply: A,
    b: &[f64],
    diag: Option<&[f64]>,
    kernel: &[Vec<f64>],
    cfg: &SolverConfig,
    x0: Option<&[f64]>,
    mut observe: O,
) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    O: FnMut(&[f64]),
{
    let n = b.len();
    let mut rhs = b.to_vec();
    project(kernel, &mut rhs);
    let bnorm = par::norm(&rhs);
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            history: vec![0.0],
        });
    }
    let inv_diag: Option<Vec<f64>> = match (cfg.preconditioner, diag) {
        (Preconditioner::Diagonal, Some(d)) => {
            Some(d.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect())
        }
        _ => None,
    };
    let precondition = |r: &[f64], z: &mut [f64]| {
        match &inv_diag {
            Some(inv) => par::fill_indexed(z, |i| inv[i] * r[i]),
            None => z.copy_from_slice(r),
        }
        project(kernel, z);
    };

    let mut x = match x0 {
        Some(x0) => {
            let mut x = x0.to_vec();
            project(kernel, &mut x);
            x
        }
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, x.clone());
    let tol = cfg.rel_tolerance;
    let mut iterations = 0;

    // A few restarts guard against drift between recurrence and true residual.
    for _restart in 0..4 {
        apply(&x, &mut ax);
        par::fill_indexed(&mut r, |i| rhs[i] - ax[i]);
        project(kernel, &mut r);
        let mut rnorm = par::norm(&r) / bnorm;
        if history.is_empty() {
            history.push(rnorm);
        }
        if rnorm < best.0 {
            best = (rnorm, x.clone());
        }
        if rnorm <= tol {
            return Ok(CgOutcome {
                x,
                iterations,
                residual: rnorm,
                history,
            });
        }
        let mut z = vec![0.0; n];
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = par::dot(&r, &z);
        let mut ap = vec![0.0; n];
        while iterations < cfg.max_iterations {
            apply(&p, &mut ap);
            project(kernel, &mut ap);
            let pap = par::dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            par::axpy(alpha, &p, &mut x);
            par::axpy(-alpha, &ap, &mut r);
            iterations += 1;
            observe(&x);
            rnorm = par::norm(&r) / bnorm;
            history.push(rnorm);
            if rnorm < best.0 {
                best = (rnorm, x.clone());
            }
            if rnorm <= tol {
                break;
            }
            precondition(&r, &mut z);
            let rz_new = par::dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            par::xpby(&z, beta, &mut p);
        }
        if iterations >= cfg.max_iterations {
            break;
        }
    }
    apply(&x, &mut ax);
    par::fill_indexed(&mut r, |i| rhs[i] - ax[i]);
    project(kernel, &mut r);
    let residual = par::norm(&r) / bnorm;
    if residual <= tol {
        return Ok(CgOutcome {
            x,
            iterations,
            residual,
            history,
        });
    }
    Err(Error::NonConvergence {
        iterations,
        residual: best.0.min(residual),
        best: if residual <= best.0 { x } else { best.1 },
        history,
    })
}
