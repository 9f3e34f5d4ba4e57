use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named spatial profiles on the column `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldPreset {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    GaussianPulse {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
}

fn one() -> u32 {
    1
}

impl FieldPreset {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FieldPreset::Zero => 0.0,
            FieldPreset::Constant { value } => value,
            FieldPreset::GaussianPulse { amplitude, center, width } => {
                amplitude * (-((x - center) / width).powi(2)).exp()
            }
            FieldPreset::Sine { amplitude, mode } => amplitude * (mode as f64 * std::f64::consts::PI * x).sin(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            FieldPreset::Zero => true,
            FieldPreset::Constant { value } => value == 0.0,
            FieldPreset::GaussianPulse { amplitude, .. } | FieldPreset::Sine { amplitude, .. } => amplitude == 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let FieldPreset::GaussianPulse { width, .. } = self {
            if !(*width > 0.0) {
                return Err(Error::Parameter(format!("gaussian-pulse width must be positive, got {width}")));
            }
        }
        Ok(())
    }
}

/// Space profile switched on at `t = 0` and optionally off after `until`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Forcing {
    #[serde(flatten)]
    pub profile: FieldPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<f64>,
}

impl Forcing {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn steady(profile: FieldPreset) -> Self {
        Self { profile, until: None }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self.until {
            Some(end) if t > end => 0.0,
            _ => self.profile.eval(x),
        }
    }
}

/// Initial skeleton displacement, velocity and temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InitialData {
    #[serde(default)]
    pub displacement: FieldPreset,
    #[serde(default)]
    pub velocity: FieldPreset,
    #[serde(default)]
    pub temperature: FieldPreset,
    /// Initial `⟨q⟩_Ω`, held fixed by the closure.
    #[serde(default)]
    pub mean_q: f64,
    /// Renormalization constant `β`.
    #[serde(default)]
    pub beta: f64,
}

impl InitialData {
    pub fn is_zero(&self) -> bool {
        self.displacement.is_zero()
            && self.velocity.is_zero()
            && self.temperature.is_zero()
            && self.mean_q == 0.0
            && self.beta == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_and_evaluate() {
        let f: Forcing = serde_json::from_str(r#"{"kind":"sine","amplitude":2.0}"#).unwrap();
        assert!((f.eval(0.5, 0.0) - 2.0).abs() < 1e-15);
        let g: Forcing = serde_json::from_str(r#"{"kind":"constant","value":1.5,"until":0.2}"#).unwrap();
        assert_eq!(g.eval(0.3, 0.1), 1.5);
        assert_eq!(g.eval(0.3, 0.3), 0.0);
        let p = FieldPreset::GaussianPulse {
            amplitude: 1.0,
            center: 0.5,
            width: 0.1,
        };
        assert_eq!(p.eval(0.5), 1.0);
        assert!(FieldPreset::GaussianPulse { amplitude: 1.0, center: 0.5, width: 0.0 }.validate().is_err());
        let z: Forcing = serde_json::from_str(r#"{"kind":"zero"}"#).unwrap();
        assert!(z.profile.is_zero());
    }
}
