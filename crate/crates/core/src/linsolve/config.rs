use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
    pub time_step: f64,
    pub horizon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-9,
            max_iterations: 20_000,
            preconditioner: Preconditioner::Diagonal,
            time_step: 1e-3,
            horizon: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            rel_tolerance: tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance <= 1e-2) {
            return Err(Error::Parameter(format!(
                "rel_tolerance {} must lie in (0, 1e-2]",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be positive".into()));
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(Error::Parameter(format!("time step {} must be positive", self.time_step)));
        }
        if !(self.horizon >= self.time_step) {
            return Err(Error::Parameter(format!(
                "horizon {} is shorter than the time step {}",
                self.horizon, self.time_step
            )));
        }
        Ok(())
    }
}
