use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Fluid viscosity limit `μ1`; `Infinite` selects the single-velocity regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Viscosity {
    Finite(f64),
    Infinite,
}

impl Viscosity {
    pub fn is_infinite(self) -> bool {
        matches!(self, Viscosity::Infinite)
    }

    pub fn value(self) -> f64 {
        match self {
            Viscosity::Finite(v) => v,
            Viscosity::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Viscosity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Viscosity::Finite(v) => s.serialize_f64(*v),
            Viscosity::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Viscosity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_infinite() && v > 0.0 => Ok(Viscosity::Infinite),
            Raw::Num(v) => Ok(Viscosity::Finite(v)),
            Raw::Text(t) if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") => Ok(Viscosity::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("mu1 must be a number or \"inf\", got {t:?}"))),
        }
    }
}

/// Dimensionless limits entering the homogenized systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeParameters {
    pub tau0: f64,
    pub mu1: Viscosity,
    pub lambda0: f64,
    pub eta0: f64,
    pub beta0f: f64,
    pub beta0s: f64,
    pub kappa0s: f64,
    pub kappa1: f64,
    pub rho_f: f64,
    pub rho_s: f64,
    pub c_pf: f64,
    pub c_ps: f64,
}

impl Default for RegimeParameters {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            mu1: Viscosity::Infinite,
            lambda0: 1.0,
            eta0: 1.0,
            beta0f: 0.5,
            beta0s: 0.5,
            kappa0s: 1.0,
            kappa1: 1.0,
            rho_f: 1.0,
            rho_s: 2.0,
            c_pf: 1.0,
            c_ps: 1.0,
        }
    }
}

impl RegimeParameters {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = [
            ("tau0", self.tau0),
            ("beta0f", self.beta0f),
            ("beta0s", self.beta0s),
            ("kappa0s", self.kappa0s),
            ("kappa1", self.kappa1),
            ("rho_f", self.rho_f),
            ("rho_s", self.rho_s),
            ("c_pf", self.c_pf),
            ("c_ps", self.c_ps),
        ];
        for (name, v) in finite_nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if !(self.lambda0.is_finite() && self.lambda0 > 0.0) {
            return Err(Error::Parameter(format!("lambda0 must lie in (0, inf), got {}", self.lambda0)));
        }
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            return Err(Error::Parameter(format!("eta0 must be positive and finite, got {}", self.eta0)));
        }
        if let Viscosity::Finite(v) = self.mu1 {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("mu1 must be nonnegative, got {v}")));
            }
        }
        if self.rho_f <= 0.0 || self.rho_s <= 0.0 {
            return Err(Error::Parameter("densities must be positive".into()));
        }
        Ok(())
    }

    pub fn rho_hat(&self, m: f64) -> f64 {
        m * self.rho_f + (1.0 - m) * self.rho_s
    }

    pub fn cp_hat(&self, m: f64) -> f64 {
        m * self.c_pf + (1.0 - m) * self.c_ps
    }
}

/// Darcy-law sub-cases of the two-velocity regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DarcyLaw {
    /// Memory convolution with `B1(μ1, t)`.
    Memory,
    /// Instantaneous law with `B2(μ1)`.
    Algebraic,
    /// Inviscid law with `B3`.
    Inviscid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Single-velocity thermo-poroelasticity, `μ1 = ∞`.
    I,
    /// Isolated pores.
    II,
    /// Two-velocity flow.
    III(DarcyLaw),
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::I => write!(f, "I"),
            Regime::II => write!(f, "II"),
            Regime::III(DarcyLaw::Memory) => write!(f, "III(a)"),
            Regime::III(DarcyLaw::Algebraic) => write!(f, "III(b)"),
            Regime::III(DarcyLaw::Inviscid) => write!(f, "III(c)"),
        }
    }
}

/// How the fluid temperature `θ^f` follows the skeleton temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThermalClosure {
    /// `θ^f = mϑ`.
    Equilibrium,
    /// Relaxation-kernel convolution.
    Kernel,
    /// `θ^f = mϑ − c^θ_f Ψ`, for `τ0 = 0`.
    Quasistatic,
    /// Time integral of the heat source, for `μ1 = 0`.
    Inviscid,
}

/// Regime table. Disconnected pores take precedence over every viscosity limit;
/// an inviscid fluid without relaxation time is rejected in every regime.
pub fn select_regime(params: &RegimeParameters, fluid_connected: bool) -> Result<Regime> {
    params.validate()?;
    if params.mu1 == Viscosity::Finite(0.0) && params.tau0 == 0.0 {
        return Err(Error::Parameter("mu1 = 0 needs tau0 > 0".into()));
    }
    if !fluid_connected {
        return Ok(Regime::II);
    }
    match params.mu1 {
        Viscosity::Infinite => Ok(Regime::I),
        Viscosity::Finite(0.0) => Ok(Regime::III(DarcyLaw::Inviscid)),
        Viscosity::Finite(_) if params.tau0 == 0.0 => Ok(Regime::III(DarcyLaw::Algebraic)),
        Viscosity::Finite(_) => Ok(Regime::III(DarcyLaw::Memory)),
    }
}

pub fn thermal_closure(regime: Regime, params: &RegimeParameters) -> Result<ThermalClosure> {
    if regime == Regime::I || params.mu1.is_infinite() {
        return Ok(ThermalClosure::Equilibrium);
    }
    let mu = params.mu1.value();
    if mu == 0.0 {
        if params.tau0 == 0.0 {
            return Err(Error::Parameter("mu1 = 0 needs tau0 > 0".into()));
        }
        return Ok(ThermalClosure::Inviscid);
    }
    if params.tau0 == 0.0 {
        Ok(ThermalClosure::Quasistatic)
    } else {
        Ok(ThermalClosure::Kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(tau0: f64, mu1: Viscosity) -> RegimeParameters {
        RegimeParameters {
            tau0,
            mu1,
            ..Default::default()
        }
    }

    #[test]
    fn regime_table() {
        assert_eq!(select_regime(&with(1.0, Viscosity::Infinite), true).unwrap(), Regime::I);
        assert_eq!(
            select_regime(&with(0.0, Viscosity::Finite(3.0)), true).unwrap(),
            Regime::III(DarcyLaw::Algebraic)
        );
        assert_eq!(
            select_regime(&with(1.0, Viscosity::Finite(0.0)), true).unwrap(),
            Regime::III(DarcyLaw::Inviscid)
        );
        assert_eq!(
            select_regime(&with(1.0, Viscosity::Finite(2.0)), true).unwrap(),
            Regime::III(DarcyLaw::Memory)
        );
        assert_eq!(select_regime(&with(1.0, Viscosity::Infinite), false).unwrap(), Regime::II);
        assert!(select_regime(&with(0.0, Viscosity::Finite(0.0)), true).is_err());
    }

    #[test]
    fn viscosity_json() {
        let v: Viscosity = serde_json::from_str("\"inf\"").unwrap();
        assert!(v.is_infinite());
        let v: Viscosity = serde_json::from_str("2.5").unwrap();
        assert_eq!(v, Viscosity::Finite(2.5));
        assert_eq!(serde_json::to_string(&Viscosity::Infinite).unwrap(), "\"inf\"");
        assert!(serde_json::from_str::<Viscosity>("\"fast\"").is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = RegimeParameters::default();
        p.lambda0 = 0.0;
        assert!(p.validate().is_err());
        let mut p = RegimeParameters::default();
        p.kappa1 = f64::INFINITY;
        assert!(p.validate().is_err());
    }
}
