//! Cell campaign through coefficient files to macroscale runs.

use std::sync::OnceLock;

use poro_homog::macro_biot::{RegimeParameters, Viscosity};
use poro_homog::microcell::{build_cell, GeometrySpec, VoxelCell};
use poro_homog::toolkit::{
    run_scenario, solve_cells, CampaignOutcome, CampaignParams, FamilyStatus, LoadedCoefficients, Scenario, Which,
};
use poro_homog::linsolve::SolverConfig;
use poro_homog::{Error, Phase};

fn params() -> CampaignParams {
    CampaignParams {
        regime: RegimeParameters {
            mu1: Viscosity::Finite(1.0),
            ..Default::default()
        },
        solver: SolverConfig::with_tolerance(1e-10),
        which: Which::All,
    }
}

fn channel() -> VoxelCell {
    build_cell(&GeometrySpec::channel(0, 0.25, 16)).unwrap()
}

fn campaign() -> &'static CampaignOutcome {
    static OUT: OnceLock<CampaignOutcome> = OnceLock::new();
    OUT.get_or_init(|| solve_cells(&channel(), &params()).unwrap())
}

#[test]
fn channel_campaign_solves_every_family() {
    let out = campaign();
    assert!(out.failure.is_none());
    assert_eq!(out.exit_code(), 0);
    for (name, status) in &out.coefficients.set.provenance.families {
        assert_eq!(status, &FamilyStatus::Solved, "{name}");
    }
    let set = &out.coefficients.set;
    assert_eq!(set.m, 0.25);
    let b2 = set.b2.unwrap();
    assert!((b2[0][0] - 3.0 / 2048.0).abs() < 1e-9);
    let k = out.coefficients.b1_kernel.as_ref().unwrap();
    // B1(0) = m / (tau0 rho_f) along the slit
    assert!((k.sample(0)[0] - 0.25).abs() < 1e-9);
}

#[test]
fn fitted_flow_kernel_integrates_to_permeability() {
    let out = campaign();
    let c = out
        .coefficients
        .macro_coefficients(&params().regime, 0, 8)
        .unwrap();
    let fit = &c.b1_kernel.as_ref().unwrap().fit;
    let b2 = c.b2.unwrap();
    assert!(fit.weights.len() <= 8);
    assert!(
        (fit.integral() - b2).abs() < 0.03 * b2,
        "fit integral {} vs B2 {b2}",
        fit.integral()
    );
}

#[test]
fn coefficient_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = campaign();
    let path = out.coefficients.write(dir.path()).unwrap();
    let back = LoadedCoefficients::read(&path).unwrap();
    assert_eq!(back.set.canonical_json().unwrap(), out.coefficients.set.canonical_json().unwrap());
    let k0 = out.coefficients.b1_kernel.as_ref().unwrap();
    let k1 = back.b1_kernel.as_ref().unwrap();
    assert_eq!(k0.times(), k1.times());
    assert_eq!(k0.entry(0), k1.entry(0));
}

#[test]
fn memory_regime_run_from_files_dissipates_energy() {
    let dir = tempfile::tempdir().unwrap();
    campaign().coefficients.write(dir.path()).unwrap();
    let scenario = r#"{"params": {"mu1": 1.0}, "coefficients": "coefficients.json", "nx": 16, "dt": 0.01, "horizon": 0.3,
            "initial": {"displacement": {"kind": "sine", "amplitude": 0.01},
                         "temperature": {"kind": "gaussian-pulse", "amplitude": 1.0, "center": 0.5, "width": 0.1}}}"#;
    let file = dir.path().join("scenario.json");
    std::fs::write(&file, scenario).unwrap();
    let out = run_scenario(&Scenario::load(&file).unwrap()).unwrap();
    assert_eq!(out.manifest.regime, "III(a)");
    assert_eq!(out.manifest.thermal_closure, "kernel");
    assert_eq!(out.manifest.steps, 30);
    assert!(out.manifest.energy_nonincreasing, "{:?}", out.manifest.energy);
    assert!(out.manifest.energy[30] < out.manifest.energy[0]);
    assert_eq!(
        out.manifest.cell_fingerprint.as_deref(),
        Some(channel().fingerprint().as_str())
    );
    // one header plus 31 states of 17 nodes
    assert_eq!(out.csv.lines().count(), 1 + 31 * 17);
}

#[test]
fn scenario_parameters_must_match_the_campaign() {
    let dir = tempfile::tempdir().unwrap();
    campaign().coefficients.write(dir.path()).unwrap();
    let file = dir.path().join("scenario.json");
    std::fs::write(
        &file,
        r#"{"params": {"mu1": 1.0, "lambda0": 2.0}, "coefficients": "coefficients.json", "nx": 8, "dt": 0.01, "horizon": 0.1}"#,
    )
    .unwrap();
    let err = run_scenario(&Scenario::load(&file).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Configuration(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn isolated_pores_skip_permeability_and_select_regime_two() {
    let cell = build_cell(&GeometrySpec::sphere([0.5; 3], 0.25, Phase::Fluid, 8)).unwrap();
    let out = solve_cells(&cell, &params()).unwrap();
    let fam = &out.coefficients.set.provenance.families;
    assert!(matches!(&fam["B2"], FamilyStatus::Skipped { reason } if reason.contains("not connected")));
    assert_eq!(fam["B3"], FamilyStatus::Solved);
    assert!(out.coefficients.set.b2.is_none());
    let dir = tempfile::tempdir().unwrap();
    out.coefficients.write(dir.path()).unwrap();
    let file = dir.path().join("scenario.json");
    std::fs::write(
        &file,
        r#"{"params": {"mu1": 1.0}, "coefficients": "coefficients.json", "nx": 8, "dt": 0.01, "horizon": 0.05}"#,
    )
    .unwrap();
    let run = run_scenario(&Scenario::load(&file).unwrap()).unwrap();
    assert_eq!(run.manifest.regime, "II");
}

#[test]
fn empty_fluid_skips_flow_families() {
    let cell = build_cell(&GeometrySpec::laminate(0, 0.0, 8)).unwrap();
    let out = solve_cells(&cell, &params()).unwrap();
    let fam = &out.coefficients.set.provenance.families;
    for name in ["B3", "B2", "B1_kernel"] {
        assert_eq!(
            fam[name],
            FamilyStatus::Skipped {
                reason: "empty fluid".into()
            }
        );
    }
    assert_eq!(fam["elastic"], FamilyStatus::Solved);
    assert_eq!(out.exit_code(), 0);
}
