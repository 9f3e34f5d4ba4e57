use super::cg::{pcg_observed, CgOutcome};
use super::config::SolverConfig;
use super::stokes::solve_saddle;
use crate::discretize::{AssembledSystem, StokesSystem};
use crate::error::{Error, Result};
use crate::par;
use crate::sparse::CsrMatrix;

/// Strictly increasing time nodes starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::Parameter("time grid must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("time nodes must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn uniform(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && horizon >= dt) {
            return Err(Error::Parameter(format!("invalid uniform grid dt={dt}, horizon={horizon}")));
        }
        let steps = (horizon / dt - 1e-9).ceil() as usize;
        Self::from_times((0..=steps).map(|k| k as f64 * dt).collect())
    }

    /// `ramp` uniform steps of `dt`, then steps growing by `growth` per step
    /// until `horizon` is reached.
    pub fn ramp_geometric(dt: f64, ramp: usize, growth: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && growth >= 1.0 && horizon >= dt) {
            return Err(Error::Parameter(format!(
                "invalid geometric grid dt={dt}, growth={growth}, horizon={horizon}"
            )));
        }
        let mut times = vec![0.0];
        let mut t = 0.0;
        let mut step = dt;
        let mut k = 0;
        while t < horizon * (1.0 - 1e-12) {
            t += step;
            times.push(t);
            k += 1;
            if k >= ramp {
                step *= growth;
            }
        }
        Self::from_times(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }
}

#[derive(Debug, Clone)]
pub struct HeatTrajectory {
    pub times: Vec<f64>,
    /// Functional `ℓ·Θ` per time node (the first entry is supplied by the caller).
    pub values: Vec<f64>,
    /// `sqrt(Θᵀ M Θ)` per step after the first.
    pub l2: Vec<f64>,
    pub last: Vec<f64>,
    pub iterations: usize,
}

/// Backward Euler for `M Θ' + D K Θ = 0`. The first step uses `initial_load`
/// as `M Θ_0`, so the initial state may be given by its exact moments.
#[allow(clippy::too_many_arguments)]
pub fn march_heat(
    sys: &AssembledSystem,
    diffusivity: f64,
    initial_load: &[f64],
    initial_value: f64,
    functional: &[f64],
    grid: &TimeGrid,
    cfg: &SolverConfig,
    stop_below: Option<f64>,
) -> Result<HeatTrajectory> {
    let mass = sys
        .mass
        .as_ref()
        .ok_or_else(|| Error::Configuration("parabolic marching needs a mass matrix".into()))?;
    let mut times = vec![0.0];
    let mut values = vec![initial_value];
    let mut l2 = Vec::new();
    let mut rhs = initial_load.to_vec();
    let mut theta = vec![0.0; rhs.len()];
    let mut cached: Option<(f64, CsrMatrix)> = None;
    let mut iterations = 0;
    for (k, dt) in grid.steps().enumerate() {
        if cached.as_ref().map(|c| c.0) != Some(dt) {
            cached = Some((dt, mass.combine(1.0, &sys.operator, dt * diffusivity)));
        }
        let op = &cached.as_ref().expect("cached step matrix").1;
        let diag = op.diagonal();
        let CgOutcome { x, iterations: it, .. } =
            pcg_observed(|x, y| op.matvec_into(x, y), &rhs, Some(&diag), &[], cfg, Some(&theta), |_| {})?;
        iterations += it;
        theta = x;
        rhs = mass.matvec(&theta);
        let value = par::dot(functional, &theta);
        times.push(grid.times()[k + 1]);
        values.push(value);
        l2.push(par::dot(&theta, &rhs).max(0.0).sqrt());
        if stop_below.is_some_and(|thr| value.abs() <= thr) {
            break;
        }
    }
    Ok(HeatTrajectory {
        times,
        values,
        l2,
        last: theta,
        iterations,
    })
}

#[derive(Debug, Clone)]
pub struct StokesTrajectory {
    pub times: Vec<f64>,
    /// `∫_{Y_f} V` after each step (the first entry is the projected initial state).
    pub flux: Vec<[f64; 3]>,
    pub l2: Vec<f64>,
    pub last: Vec<f64>,
}

/// Backward Euler for `ρ V' + μ L V + G Q = 0`, `Gᵀ V = 0` from a projected
/// initial state.
pub fn march_stokes(
    sys: &StokesSystem,
    rho: f64,
    v0: &[f64],
    grid: &TimeGrid,
    cfg: &SolverConfig,
    stop_below: Option<f64>,
) -> Result<StokesTrajectory> {
    let vol = sys.h.powi(3);
    let l2 = |v: &[f64]| (vol * par::dot(v, v)).sqrt();
    let mut v = v0.to_vec();
    let mut out = StokesTrajectory {
        times: vec![0.0],
        flux: vec![sys.flux(&v)],
        l2: vec![l2(&v)],
        last: Vec::new(),
    };
    let initial = out.l2[0];
    for (k, dt) in grid.steps().enumerate() {
        let alpha = rho / dt;
        let f: Vec<f64> = v.iter().map(|x| alpha * x).collect();
        let sol = solve_saddle(sys, alpha, &f, cfg, Some(&v))?;
        v = sol.u;
        out.times.push(grid.times()[k + 1]);
        out.flux.push(sys.flux(&v));
        out.l2.push(l2(&v));
        if stop_below.is_some_and(|thr| *out.l2.last().unwrap() <= thr * initial) {
            break;
        }
    }
    out.last = v;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_shape() {
        let g = TimeGrid::ramp_geometric(0.1, 3, 2.0, 2.0).unwrap();
        let steps: Vec<f64> = g.steps().collect();
        assert!((steps[0] - 0.1).abs() < 1e-15 && (steps[2] - 0.1).abs() < 1e-15);
        assert!((steps[3] - 0.2).abs() < 1e-15 && (steps[4] - 0.4).abs() < 1e-15);
        assert!(*g.times().last().unwrap() >= 2.0);
        assert!(TimeGrid::from_times(vec![0.0, 1.0, 1.0]).is_err());
    }
}
