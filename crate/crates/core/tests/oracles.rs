//! Frozen reference values computed outside this crate.
//!
//! Channel permeability: across a slit of `k` fluid voxels the MAC system is
//! the tridiagonal `(-1, 2, -1)/h²` with reflected walls (diagonal 3 next to
//! them), solved in exact rational arithmetic. The closed form is
//! `w³/12 · (1 + 2/k²) / μ`.
//!
//! Quasi-static fluid temperature on a normal laminate: trilinear elements
//! collapse to nodally exact linear elements in 1-D, so
//! `c = -(w³ - w h²) / (12 ϰ1 μ1)`.
//!
//! Fingerprints and sphere voxel counts come from an independent script
//! hashing `n as u64 LE || occupancy`.

use poro_homog::cell_flow::{solve_b2, solve_b3};
use poro_homog::cell_thermal::{solve_btheta, solve_c_theta_f, PhaseStatus};
use poro_homog::kernel::{ExpSum, TimeKernel};
use poro_homog::linsolve::SolverConfig;
use poro_homog::microcell::{build_cell, GeometrySpec};
use poro_homog::Phase;

fn cfg() -> SolverConfig {
    SolverConfig::with_tolerance(1e-12)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn channel_permeability_matches_discrete_poiseuille() {
    for (n, want) in [(16, 3.0 / 2048.0), (32, 11.0 / 8192.0)] {
        let cell = build_cell(&GeometrySpec::channel(0, 0.25, n)).unwrap();
        let b2 = solve_b2(&cell, 1.0, &cfg()).unwrap();
        assert!(rel(b2[0][0], want) < 1e-8, "n={n}: {} vs {want}", b2[0][0]);
        // the slit is open along axes 0 and 2
        assert!(rel(b2[2][2], want) < 1e-8, "n={n}: {b2:?}");
        assert!(b2[1][1].abs() < 1e-12 * want);
    }
}

#[test]
fn channel_permeability_scales_with_inverse_viscosity() {
    let cell = build_cell(&GeometrySpec::channel(0, 0.25, 16)).unwrap();
    let b2 = solve_b2(&cell, 4.0, &cfg()).unwrap();
    assert!(rel(b2[0][0], 3.0 / 8192.0) < 1e-8);
}

#[test]
fn channel_added_mass_acts_across_the_slit() {
    // R_2 = y_2 solves the normal problem; the open directions have R constant
    let cell = build_cell(&GeometrySpec::channel(0, 0.25, 16)).unwrap();
    let b3 = solve_b3(&cell, &cfg()).unwrap();
    let want = [[0.0, 0.0, 0.0], [0.0, 0.25, 0.0], [0.0, 0.0, 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert!((b3[i][j] - want[i][j]).abs() < 1e-10, "{b3:?}");
        }
    }
}

#[test]
fn normal_laminate_fluid_temperature_constant() {
    for (n, kappa1, mu1, want) in [
        (16, 1.0, 1.0, -0.01025390625),
        (32, 1.0, 1.0, -0.0103759765625),
        (16, 2.0, 0.5, -0.01025390625),
        (32, 4.0, 1.0, -0.0103759765625 / 4.0),
    ] {
        let cell = build_cell(&GeometrySpec::laminate(2, 0.5, n)).unwrap();
        let (c, status) = solve_c_theta_f(&cell, kappa1, mu1, &cfg()).unwrap();
        assert_eq!(status, PhaseStatus::Solved);
        assert!(rel(c, want) < 1e-9, "n={n}: {c} vs {want}");
    }
    let thin = build_cell(&GeometrySpec::laminate(1, 0.25, 16)).unwrap();
    let (c, _) = solve_c_theta_f(&thin, 1.0, 1.0, &cfg()).unwrap();
    assert!(rel(c, -0.001220703125) < 1e-9, "{c}");
}

#[test]
fn laminate_conductivity_at_quarter_porosity() {
    let cell = build_cell(&GeometrySpec::laminate(0, 0.25, 16)).unwrap();
    let b = solve_btheta(&cell, 3.0, &cfg()).unwrap();
    let want = [[0.0, 0.0, 0.0], [0.0, 2.25, 0.0], [0.0, 0.0, 2.25]];
    for i in 0..3 {
        for j in 0..3 {
            assert!((b[i][j] - want[i][j]).abs() < 1e-8, "{b:?}");
        }
    }
}

#[test]
fn fingerprints_match_reference_hashes() {
    let lam = build_cell(&GeometrySpec::laminate(0, 0.5, 4)).unwrap();
    assert_eq!(
        lam.fingerprint(),
        "6d54890a14fff3797678e212f7df4f76366383711eb75e8a635612362a1d8b79"
    );
    let chan = build_cell(&GeometrySpec::channel(0, 0.25, 8)).unwrap();
    assert_eq!(
        chan.fingerprint(),
        "55119954276de94c7ed6189381276cc8c1c4292727d150fd6a56091ffee4120d"
    );
}

#[test]
fn sphere_voxel_counts() {
    for (n, r, count) in [(8, 0.3, 56), (16, 0.25, 280), (32, 0.25, 2176)] {
        let cell = build_cell(&GeometrySpec::sphere([0.5; 3], r, Phase::Fluid, n)).unwrap();
        assert_eq!(cell.count(Phase::Fluid), count, "n={n} r={r}");
        assert_eq!(cell.porosity(), count as f64 / (n * n * n) as f64);
        assert!(!cell.fluid_connected() && cell.solid_connected());
    }
}

#[test]
fn exponential_sum_recovers_a_sampled_exponential() {
    let times: Vec<f64> = (0..400).map(|k| 0.01 * k as f64).collect();
    let values: Vec<f64> = times.iter().map(|t| 0.3 * (-2.0 * t).exp()).collect();
    let kernel = TimeKernel::scalar(times, values).unwrap();
    let fit = ExpSum::fit(&kernel, 0, 8).unwrap();
    assert!((fit.eval(0.0) - 0.3).abs() < 1e-14);
    assert!(rel(fit.integral(), 0.15) < 1e-2, "{fit:?}");
    assert!(rel(kernel.integral()[0], 0.15 * (1.0 - (-8.0f64).exp())) < 1e-4);
}
