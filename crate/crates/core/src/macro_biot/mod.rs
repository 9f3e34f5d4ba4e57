//! Homogenized 1-D thermo-poroelastic columns in the three viscosity regimes.

mod coeffs;
mod forcing;
mod params;
mod scheme;

pub use coeffs::{KernelModes, MacroCoefficients};
pub use forcing::{FieldPreset, Forcing, InitialData};
pub use params::{select_regime, thermal_closure, DarcyLaw, Regime, RegimeParameters, ThermalClosure, Viscosity};
pub use scheme::{
    audit_energy, first_increase, step_regime_i, step_regime_ii, step_regime_iii, DarcyForm, EnergyParts, MacroConfig,
    MacroModel, MacroRun, MacroState, ReducedCoefficients, RegimeHistory, CSV_HEADER,
};
