use serde::{Deserialize, Serialize};

use crate::cell_elastic::ElasticCoefficients;
use crate::error::{Error, Result};
use crate::kernel::{ExpSum, TimeKernel};

/// Exponential-sum representation of a sampled kernel entry, with the data
/// needed to decide whether a run may outlast the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModes {
    pub fit: ExpSum,
    pub horizon: f64,
    /// Last sample relative to the largest one.
    pub tail: f64,
}

impl KernelModes {
    pub fn from_kernel(kernel: &TimeKernel, entry: usize, modes: usize) -> Result<Self> {
        let v = kernel.entry(entry);
        let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let tail = if peak > 0.0 { v.last().unwrap().abs() / peak } else { 0.0 };
        Ok(Self {
            fit: ExpSum::fit(kernel, entry, modes)?,
            horizon: kernel.horizon(),
            tail,
        })
    }

    /// Analytic kernel with no horizon.
    pub fn exact(fit: ExpSum) -> Self {
        Self {
            fit,
            horizon: f64::INFINITY,
            tail: 0.0,
        }
    }

    pub fn covers(&self, t: f64) -> Result<()> {
        if t > self.horizon * (1.0 + 1e-12) && self.tail > 1e-4 {
            return Err(Error::Configuration(format!(
                "kernel history exhausted: run horizon {t} exceeds the kernel horizon {} while the kernel is still at {:.2e} of its peak; compute a longer kernel",
                self.horizon, self.tail
            )));
        }
        Ok(())
    }
}

/// Effective coefficients contracted with `e1` for the 1-D column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroCoefficients {
    pub m: f64,
    /// `A^s_0` component 1111.
    pub a0_1111: f64,
    pub b0: f64,
    pub b1: f64,
    pub c0: f64,
    /// Trace of `B^s_0`.
    pub a0_tilde: f64,
    pub a0: f64,
    pub a1: f64,
    pub btheta: f64,
    pub b2: Option<f64>,
    pub b3: Option<f64>,
    pub b1_kernel: Option<KernelModes>,
    pub b_theta_kernel: Option<KernelModes>,
    pub c_theta_f: Option<f64>,
    pub fluid_connected: bool,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

impl MacroCoefficients {
    /// Contract the elastic family; thermal and flow entries start empty.
    pub fn from_elastic(m: f64, e: &ElasticCoefficients, btheta_11: f64, fluid_connected: bool) -> Self {
        Self {
            m,
            a0_1111: e.a0_tensor.0[0][0],
            b0: e.b0[0][0],
            b1: e.b1[0][0],
            c0: e.c0[0][0],
            a0_tilde: e.a0_tilde,
            a0: e.a0,
            a1: e.a1,
            btheta: btheta_11,
            b2: None,
            b3: None,
            b1_kernel: None,
            b_theta_kernel: None,
            c_theta_f: None,
            fluid_connected,
        }
    }

    /// Check the reciprocity identities between the pressure coefficients and
    /// impose them exactly.
    pub fn reconciled(&self, lambda0: f64, eta0: f64) -> Result<Self> {
        let m = self.m;
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::Consistency(format!(
                "macroscale model needs both phases, porosity is {m}"
            )));
        }
        let tol = 1e-6;
        let c0 = lambda0 * self.b0 / eta0;
        let b1 = self.b0 / (m * eta0);
        let a1 = self.a0_tilde / (m * eta0);
        let a0 = self.a0_tilde + 1.0 - m;
        let checks = [
            ("C0 = lambda0 B0 / eta0", self.c0, c0),
            ("B1 = B0 / (m eta0)", self.b1, b1),
            ("a1 = a0_tilde / (m eta0)", self.a1, a1),
            ("a0 = a0_tilde + 1 - m", self.a0, a0),
        ];
        for (name, have, want) in checks {
            if !close(have, want, tol) {
                return Err(Error::Consistency(format!(
                    "coefficients violate {name}: {have:e} vs {want:e}; were they computed with lambda0 = {lambda0}, eta0 = {eta0}?"
                )));
            }
        }
        if a1 == 0.0 {
            return Err(Error::Consistency("a1 vanishes; pressure closure undefined".into()));
        }
        if self.btheta <= 0.0 {
            return Err(Error::Consistency(format!("Btheta_11 = {} is not positive", self.btheta)));
        }
        Ok(Self {
            c0,
            b1,
            a1,
            a0,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MacroCoefficients {
        let m = 0.5;
        let a0_tilde = -0.25;
        let b0 = -0.1;
        MacroCoefficients {
            m,
            a0_1111: 1.2,
            b0,
            b1: b0 / m,
            c0: b0,
            a0_tilde,
            a0: a0_tilde + 1.0 - m,
            a1: a0_tilde / m,
            btheta: 0.5,
            b2: None,
            b3: None,
            b1_kernel: None,
            b_theta_kernel: None,
            c_theta_f: None,
            fluid_connected: true,
        }
    }

    #[test]
    fn reconcile_accepts_consistent_and_rejects_foreign() {
        let c = sample();
        assert!(c.reconciled(1.0, 1.0).is_ok());
        let err = c.reconciled(2.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
        let mut bad = c.clone();
        bad.m = 0.0;
        assert!(bad.reconciled(1.0, 1.0).is_err());
    }

    #[test]
    fn kernel_horizon_rule() {
        let k = KernelModes {
            fit: ExpSum::single(1.0, 1.0),
            horizon: 2.0,
            tail: 0.1,
        };
        assert!(k.covers(1.5).is_ok());
        assert!(matches!(k.covers(3.0), Err(Error::Configuration(_))));
        let decayed = KernelModes { tail: 1e-9, ..k };
        assert!(decayed.covers(30.0).is_ok());
    }
}
