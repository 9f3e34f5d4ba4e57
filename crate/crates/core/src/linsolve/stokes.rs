use super::cg::{pcg, pcg_observed, project};
use super::config::SolverConfig;
use crate::discretize::{CellField, FieldKind, FieldMeta, StokesSystem, Support};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// `‖f - A u - G p‖ / ‖f‖`
    pub momentum_residual: f64,
    /// `h · max|div u| / max|A⁻¹f|`
    pub divergence: f64,
    pub history: Vec<f64>,
}

fn pressure_kernel(sys: &StokesSystem) -> Vec<Vec<f64>> {
    sys.pressure_components
        .iter()
        .map(|comp| {
            let mut z = vec![0.0; sys.num_cells()];
            for &s in comp {
                z[s] = 1.0;
            }
            z
        })
        .collect()
}

fn inner_config(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        rel_tolerance: (cfg.rel_tolerance * 1e-3).max(1e-13),
        ..*cfg
    }
}

fn relative_divergence(sys: &StokesSystem, u: &[f64], umax: f64) -> f64 {
    if umax == 0.0 {
        return 0.0;
    }
    let dmax = sys.divergence(u).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    dmax * sys.h / umax
}

/// Uzawa iteration, conjugate gradients on the pressure Schur complement, for
/// `(α I + μ L) u + G p = f`, `Gᵀ u = 0`. Each Schur product needs one inner
/// diagonally preconditioned CG solve.
pub fn solve_saddle(
    sys: &StokesSystem,
    alpha: f64,
    f: &[f64],
    cfg: &SolverConfig,
    guess: Option<&[f64]>,
) -> Result<StokesSolution> {
    cfg.validate()?;
    let mu = sys.mu;
    let diag: Vec<f64> = sys.laplacian.diagonal().iter().map(|d| alpha + mu * d).collect();
    let lap = &sys.laplacian;
    let apply = |x: &[f64], y: &mut [f64]| {
        lap.matvec_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = mu * *yi + alpha * xi;
        }
    };
    let icfg = inner_config(cfg);
    let mut inner_iterations = 0;
    let mut solve_a = |rhs: &[f64], x0: Option<&[f64]>| -> Result<Vec<f64>> {
        let out = pcg_observed(apply, rhs, Some(&diag), &[], &icfg, x0, |_| {})?;
        inner_iterations += out.iterations;
        Ok(out.x)
    };

    let kernel = pressure_kernel(sys);
    let mut p = vec![0.0; sys.num_cells()];
    let mut u = solve_a(f, guess)?;
    let mut r = sys.grad_t.matvec(&u);
    project(&kernel, &mut r);
    // Residuals are measured against the unconstrained velocity `A⁻¹f`.
    let reference = {
        let un = par::norm(&u);
        if un > 0.0 {
            un / sys.h
        } else {
            1.0
        }
    };
    let umax0 = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut rel = par::norm(&r) / reference;
    let mut history = vec![rel];
    let mut outer = 0usize;
    let tol = cfg.rel_tolerance;
    let mut d = r.clone();
    let mut rr = par::dot(&r, &r);
    let mut best_at = (rel, 0usize);
    while rel > tol {
        if outer >= cfg.max_iterations {
            return Err(Error::NonConvergence {
                iterations: outer,
                residual: rel,
                best: u,
                history,
            });
        }
        let gd = sys.grad.matvec(&d);
        let w = solve_a(&gd, None)?;
        let mut q = sys.grad_t.matvec(&w);
        project(&kernel, &mut q);
        let dq = par::dot(&d, &q);
        if !(dq > 0.0) {
            return Err(Error::NonConvergence {
                iterations: outer,
                residual: rel,
                best: u,
                history,
            });
        }
        let a = rr / dq;
        par::axpy(a, &d, &mut p);
        par::axpy(-a, &w, &mut u);
        par::axpy(-a, &q, &mut r);
        outer += 1;
        rel = par::norm(&r) / reference;
        history.push(rel);
        if rel <= best_at.0 * 1e-3 {
            best_at = (rel, outer);
        }
        if outer - best_at.1 >= 100 {
            return Err(Error::NonConvergence {
                iterations: outer,
                residual: rel,
                best: u,
                history,
            });
        }
        let rr_new = par::dot(&r, &r);
        par::xpby(&r, rr_new / rr, &mut d);
        rr = rr_new;
    }
    sys.project_pressure(&mut p);
    // Recompute the velocity from the final pressure.
    let gp = sys.grad.matvec(&p);
    let rhs: Vec<f64> = f.iter().zip(&gp).map(|(a, b)| a - b).collect();
    let u = solve_a(&rhs, Some(&u))?;
    let mut au = vec![0.0; u.len()];
    apply(&u, &mut au);
    let fnorm = par::norm(f).max(f64::MIN_POSITIVE);
    let momentum_residual = par::norm(&rhs.iter().zip(&au).map(|(a, b)| a - b).collect::<Vec<_>>()) / fnorm;
    let divergence = relative_divergence(sys, &u, umax0);
    Ok(StokesSolution {
        u,
        p,
        outer_iterations: outer,
        inner_iterations,
        momentum_residual,
        divergence,
        history,
    })
}

/// Steady Stokes cell problem with the system's own forcing.
pub fn solve_stokes(sys: &StokesSystem, cfg: &SolverConfig) -> Result<(CellField, StokesSolution)> {
    if sys.num_cells() == sys.n.pow(3) {
        return Err(Error::Geometry("steady flow needs a solid wall somewhere in the cell".into()));
    }
    let sol = solve_saddle(sys, 0.0, &sys.forcing, cfg, None)?;
    let (values, pressure) = sys.scatter(&sol.u, &sol.p);
    let field = CellField {
        kind: FieldKind::FaceVelocity,
        support: Support::Fluid,
        n: sys.n,
        values,
        pressure: Some(pressure),
        meta: FieldMeta {
            problem: "stokes".into(),
            fingerprint: sys.fingerprint.clone(),
            iterations: sol.outer_iterations,
            residual: sol.momentum_residual,
            bordered: None,
        },
    };
    Ok((field, sol))
}

/// Discrete Leray projection `v - G φ` with `GᵀG φ = Gᵀ v`.
pub fn leray_project(sys: &StokesSystem, v: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    let kernel = pressure_kernel(sys);
    let b = sys.grad_t.matvec(v);
    let apply = |x: &[f64], y: &mut [f64]| sys.grad_t.matvec_into(&sys.grad.matvec(x), y);
    let phi = pcg(apply, &b, None, &kernel, &inner_config(cfg))?;
    let g = sys.grad.matvec(&phi.x);
    Ok(v.iter().zip(&g).map(|(a, b)| a - b).collect())
}
