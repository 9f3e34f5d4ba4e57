use proptest::prelude::*;

use poro_homog::cell_thermal::solve_btheta;
use poro_homog::kernel::{ExpSum, TimeKernel};
use poro_homog::linsolve::SolverConfig;
use poro_homog::macro_biot::{
    first_increase, select_regime, thermal_closure, DarcyLaw, FieldPreset, Forcing, InitialData, MacroConfig,
    MacroModel, Regime, RegimeParameters, ThermalClosure, Viscosity,
};
use poro_homog::microcell::{build_cell, GeometrySpec, VoxelCell};
use poro_homog::toolkit::criteria::synthetic_coefficients;
use poro_homog::toolkit::{solve_cells, CampaignParams, Which};
use poro_homog::{Error, Phase};

fn random_cell() -> impl Strategy<Value = VoxelCell> {
    (4usize..9).prop_flat_map(|n| {
        proptest::collection::vec(0u8..2, n * n * n).prop_map(move |chi| VoxelCell::from_chi(n, chi).unwrap())
    })
}

fn viscosity() -> impl Strategy<Value = Viscosity> {
    prop_oneof![
        Just(Viscosity::Infinite),
        Just(Viscosity::Finite(0.0)),
        (1e-3f64..1e3).prop_map(Viscosity::Finite),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn voxel_bytes_round_trip(cell in random_cell()) {
        let back = VoxelCell::from_bytes(&cell.to_bytes()).unwrap();
        prop_assert_eq!(back.fingerprint(), cell.fingerprint());
        prop_assert_eq!(&back, &cell);
    }

    #[test]
    fn complement_swaps_porosity(cell in random_cell()) {
        let c = cell.complement().unwrap();
        prop_assert!((c.porosity() + cell.porosity() - 1.0).abs() < 1e-15);
        prop_assert_eq!(c.fluid_connected(), cell.solid_connected());
        prop_assert_eq!(c.complement().unwrap(), cell);
    }

    #[test]
    fn shifts_keep_counts_and_connectivity(cell in random_cell(), d in proptest::array::uniform3(-9isize..9)) {
        let s = cell.shift(d).unwrap();
        prop_assert_eq!(s.count(Phase::Fluid), cell.count(Phase::Fluid));
        prop_assert_eq!(s.connectivity(Phase::Fluid), cell.connectivity(Phase::Fluid));
        prop_assert_eq!(s.connectivity(Phase::Solid), cell.connectivity(Phase::Solid));
        let back = s.shift([-d[0], -d[1], -d[2]]).unwrap();
        prop_assert_eq!(back, cell);
    }

    #[test]
    fn bad_voxel_byte_is_reported_at_its_offset(cell in random_cell(), pos in any::<prop::sample::Index>(), byte in 2u8..) {
        let mut bytes = cell.to_bytes();
        let body = bytes.len() - cell.num_voxels();
        let at = body + pos.index(cell.num_voxels());
        bytes[at] = byte;
        match VoxelCell::from_bytes(&bytes) {
            Err(Error::Parse { offset, .. }) => prop_assert_eq!(offset, at),
            other => prop_assert!(false, "expected a parse error, got {:?}", other),
        }
    }

    #[test]
    fn regime_table_is_total_and_consistent(
        tau0 in prop_oneof![Just(0.0), 1e-3f64..10.0],
        mu1 in viscosity(),
        connected in any::<bool>(),
    ) {
        let p = RegimeParameters { tau0, mu1, ..Default::default() };
        match select_regime(&p, connected) {
            Ok(r) => {
                let closure = thermal_closure(r, &p).unwrap();
                if !connected {
                    prop_assert_eq!(r, Regime::II);
                } else {
                    let want = match mu1 {
                        Viscosity::Infinite => Regime::I,
                        Viscosity::Finite(0.0) => Regime::III(DarcyLaw::Inviscid),
                        _ if tau0 == 0.0 => Regime::III(DarcyLaw::Algebraic),
                        _ => Regime::III(DarcyLaw::Memory),
                    };
                    prop_assert_eq!(r, want);
                }
                if mu1.is_infinite() {
                    prop_assert_eq!(closure, ThermalClosure::Equilibrium);
                } else if tau0 == 0.0 {
                    prop_assert_eq!(closure, ThermalClosure::Quasistatic);
                }
            }
            Err(e) => {
                // only an inviscid fluid without relaxation time is rejected
                prop_assert_eq!(mu1, Viscosity::Finite(0.0));
                prop_assert_eq!(tau0, 0.0);
                prop_assert_eq!(e.exit_code(), 2);
            }
        }
    }

    #[test]
    fn exponential_fit_keeps_initial_value_and_positivity(
        w1 in 0.01f64..1.0, r1 in 0.1f64..5.0, w2 in 0.0f64..1.0, r2 in 5.0f64..50.0, modes in 1usize..10,
    ) {
        let times: Vec<f64> = (0..300).map(|k| 0.01 * k as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| w1 * (-r1 * t).exp() + w2 * (-r2 * t).exp()).collect();
        let kernel = TimeKernel::scalar(times, values).unwrap();
        let fit = ExpSum::fit(&kernel, 0, modes).unwrap();
        prop_assert!(fit.weights.len() <= modes);
        prop_assert!(fit.weights.iter().all(|&w| w > 0.0) && fit.rates.iter().all(|&r| r > 0.0));
        prop_assert!((fit.eval(0.0) - (w1 + w2)).abs() < 1e-12 * (w1 + w2));
    }
}

fn preset() -> impl Strategy<Value = FieldPreset> {
    prop_oneof![
        Just(FieldPreset::Zero),
        (-0.05f64..0.05, 1u32..4).prop_map(|(amplitude, mode)| FieldPreset::Sine { amplitude, mode }),
        (-1.0f64..1.0, 0.2f64..0.8, 0.05f64..0.3)
            .prop_map(|(amplitude, center, width)| FieldPreset::GaussianPulse { amplitude, center, width }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unforced_energy_never_increases(
        tau0 in prop_oneof![Just(0.0), Just(1.0)],
        mu1 in prop_oneof![Just(Viscosity::Infinite), Just(Viscosity::Finite(1.0)), Just(Viscosity::Finite(0.0))],
        connected in any::<bool>(),
        nx in 6usize..17,
        dt in 1e-3f64..2e-2,
        displacement in preset(),
        velocity in preset(),
        temperature in preset(),
    ) {
        prop_assume!(!(tau0 == 0.0 && mu1 == Viscosity::Finite(0.0)));
        let p = RegimeParameters { tau0, mu1, ..Default::default() };
        let mut c = synthetic_coefficients();
        c.fluid_connected = connected;
        let cfg = MacroConfig { nx, dt, horizon: 0.1, darcy_form: Default::default() };
        let model = MacroModel::new(&p, &c, &cfg).unwrap();
        let data = InitialData { displacement, velocity, temperature, ..Default::default() };
        let run = model.run(&data, &Forcing::zero(), &Forcing::zero()).unwrap();
        prop_assert_eq!(first_increase(&run.energy, 1e-8), None, "{:?}", run.energy);
        if data.is_zero() {
            prop_assert!(run.states.iter().all(|s| s.max_abs() == 0.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn laminate_conductivity_is_the_solid_fraction(layers in 1usize..8, kappa in 0.1f64..10.0, axis in 0usize..3) {
        let cell = build_cell(&GeometrySpec::laminate(axis, layers as f64 / 8.0, 8)).unwrap();
        let b = solve_btheta(&cell, kappa, &SolverConfig::with_tolerance(1e-12)).unwrap();
        let solid = 1.0 - cell.porosity();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i != j || i == axis { 0.0 } else { kappa * solid };
                prop_assert!((b[i][j] - want).abs() < 1e-8 * kappa, "{:?}", b);
            }
        }
    }

    #[test]
    fn campaigns_are_deterministic(layers in 1usize..8, kappa0s in 0.5f64..2.0) {
        let cell = build_cell(&GeometrySpec::laminate(1, layers as f64 / 8.0, 8)).unwrap();
        let params = CampaignParams {
            regime: RegimeParameters { kappa0s, mu1: Viscosity::Finite(1.0), ..Default::default() },
            solver: SolverConfig::with_tolerance(1e-10),
            which: Which::Thermal,
        };
        let a = solve_cells(&cell, &params).unwrap();
        let b = solve_cells(&cell, &params).unwrap();
        prop_assert_eq!(a.coefficients.set.canonical_json().unwrap(), b.coefficients.set.canonical_json().unwrap());
        prop_assert_eq!(&a.coefficients.b_theta_kernel, &b.coefficients.b_theta_kernel);
    }
}
