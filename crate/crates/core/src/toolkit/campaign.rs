use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use super::coefficients::{
    campaign_hash, CampaignParams, CoefficientSet, FamilyStatus, LoadedCoefficients, Provenance, Which,
    B1_KERNEL_FILE, B_THETA_KERNEL_FILE, TOOLKIT_VERSION,
};
use crate::cell_elastic::elastic_coefficients;
use crate::cell_flow::{solve_b1, solve_b2, solve_b3, FlowSchedule};
use crate::cell_thermal::{solve_btheta, solve_c_theta_f, solve_relaxation_kernel, HeatParams, PhaseStatus, Schedule};
use crate::error::{Error, Phase, Result};
use crate::macro_biot::Viscosity;
use crate::microcell::VoxelCell;

/// Result of a cell campaign: the coefficient set, per-stage wall-clock
/// seconds, and the first family failure if any.
#[derive(Debug)]
pub struct CampaignOutcome {
    pub coefficients: LoadedCoefficients,
    pub timings: BTreeMap<String, f64>,
    pub failure: Option<Error>,
}

impl CampaignOutcome {
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, Error::exit_code)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignManifest {
    pub config_hash: String,
    pub toolkit_version: String,
    pub cell_fingerprint: String,
    pub tolerances: crate::linsolve::SolverConfig,
    pub timings: BTreeMap<String, f64>,
    pub coefficient_files: Vec<String>,
    pub families: BTreeMap<String, FamilyStatus>,
}

impl CampaignOutcome {
    pub fn manifest(&self) -> CampaignManifest {
        let set = &self.coefficients.set;
        let mut files = vec!["coefficients.json".to_string()];
        files.extend(set.b1_kernel.iter().cloned());
        files.extend(set.b_theta_kernel.iter().cloned());
        CampaignManifest {
            config_hash: set.provenance.config_hash.clone(),
            toolkit_version: set.provenance.toolkit_version.clone(),
            cell_fingerprint: set.provenance.cell_fingerprint.clone(),
            tolerances: set.provenance.tolerances,
            timings: self.timings.clone(),
            coefficient_files: files,
            families: set.provenance.families.clone(),
        }
    }
}

struct Recorder {
    families: BTreeMap<String, FamilyStatus>,
    timings: BTreeMap<String, f64>,
    failure: Option<Error>,
}

impl Recorder {
    fn skip(&mut self, name: &str, reason: impl Into<String>) {
        self.families
            .insert(name.into(), FamilyStatus::Skipped { reason: reason.into() });
    }

    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Option<T> {
        let start = Instant::now();
        let out = f();
        self.timings.insert(name.into(), start.elapsed().as_secs_f64());
        match out {
            Ok(v) => {
                self.families.insert(name.into(), FamilyStatus::Solved);
                Some(v)
            }
            Err(Error::EmptyPhase(p)) => {
                self.skip(name, format!("empty {p}"));
                None
            }
            Err(e) => {
                self.families.insert(
                    name.into(),
                    FamilyStatus::Failed {
                        reason: e.to_string(),
                        exit_code: e.exit_code(),
                    },
                );
                self.failure.get_or_insert(e);
                None
            }
        }
    }
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Solves the requested cell families. Family failures are recorded and
/// the remaining families still run.
pub fn solve_cells(cell: &VoxelCell, params: &CampaignParams) -> Result<CampaignOutcome> {
    params.regime.validate()?;
    params.solver.validate()?;
    let p = &params.regime;
    let cfg = &params.solver;
    let m = cell.porosity();
    let has_fluid = cell.count(Phase::Fluid) > 0;
    let has_solid = cell.count(Phase::Solid) > 0;
    let fluid_connected = cell.fluid_connected();
    let mut rec = Recorder {
        families: BTreeMap::new(),
        timings: BTreeMap::new(),
        failure: None,
    };
    let mut set = CoefficientSet {
        m,
        a0_tensor: None,
        a1_tensor: None,
        b0: None,
        b1: None,
        c0: None,
        a0_tilde: None,
        a0: None,
        a1: None,
        a2: None,
        btheta: None,
        b2: None,
        b3: None,
        b1_kernel: None,
        b_theta_kernel: None,
        c_theta_f: None,
        params: params.clone(),
        provenance: Provenance {
            config_hash: campaign_hash(&cell.fingerprint(), params)?,
            toolkit_version: TOOLKIT_VERSION.into(),
            cell_fingerprint: cell.fingerprint(),
            resolution: cell.n(),
            fluid_connected,
            solid_connected: cell.solid_connected(),
            tolerances: *cfg,
            families: BTreeMap::new(),
            timestamp: now(),
        },
    };
    let mut b1_kernel = None;
    let mut b_theta_kernel = None;
    let mu1 = match p.mu1 {
        Viscosity::Finite(v) if v > 0.0 => Some(v),
        _ => None,
    };
    let mu1_reason = || {
        if p.mu1.is_infinite() {
            "mu1 = inf: not needed in the single-velocity regime"
        } else {
            "mu1 = 0: inviscid fluid"
        }
    };

    if params.which.includes(Which::Elastic) {
        if !has_solid {
            rec.skip("elastic", "empty solid");
        } else if let Some(e) = rec.run("elastic", || elastic_coefficients(cell, p.lambda0, p.eta0, cfg)) {
            set.a0_tensor = Some(e.a0_tensor.flat());
            set.a1_tensor = Some(e.a1_tensor.flat());
            set.b0 = Some(e.b0);
            set.b1 = Some(e.b1);
            set.c0 = Some(e.c0);
            set.a0_tilde = Some(e.a0_tilde);
            set.a0 = Some(e.a0);
            set.a1 = Some(e.a1);
            set.a2 = e.a2;
        }
    }

    if params.which.includes(Which::Thermal) {
        if !has_solid {
            rec.skip("btheta", "empty solid");
        } else {
            set.btheta = rec.run("btheta", || solve_btheta(cell, p.kappa0s, cfg));
        }
        match mu1 {
            _ if !has_fluid => {
                rec.skip("b_theta_kernel", "empty fluid");
                rec.skip("c_theta_f", "empty fluid");
            }
            None => {
                rec.skip("b_theta_kernel", mu1_reason());
                rec.skip("c_theta_f", mu1_reason());
            }
            Some(mu) => {
                if p.tau0 > 0.0 {
                    let hp = HeatParams {
                        tau0: p.tau0,
                        c_pf: p.c_pf,
                        kappa1: p.kappa1,
                        mu1: mu,
                    };
                    b_theta_kernel = rec.run("b_theta_kernel", || solve_relaxation_kernel(cell, &hp, &Schedule::Auto, cfg));
                    if b_theta_kernel.is_some() {
                        set.b_theta_kernel = Some(B_THETA_KERNEL_FILE.into());
                    }
                } else {
                    rec.skip("b_theta_kernel", "tau0 = 0: quasi-static fluid temperature");
                }
                if let Some((c, status)) = rec.run("c_theta_f", || solve_c_theta_f(cell, p.kappa1, mu, cfg)) {
                    if status == PhaseStatus::Solved {
                        set.c_theta_f = Some(c);
                    }
                }
            }
        }
    }

    if params.which.includes(Which::Flow) {
        if !has_fluid {
            for name in ["B3", "B2", "B1_kernel"] {
                rec.skip(name, "empty fluid");
            }
        } else {
            set.b3 = rec.run("B3", || solve_b3(cell, cfg));
            match mu1 {
                _ if !fluid_connected => {
                    rec.skip("B2", "fluid is not connected");
                    rec.skip("B1_kernel", "fluid is not connected");
                }
                None => {
                    rec.skip("B2", mu1_reason());
                    rec.skip("B1_kernel", mu1_reason());
                }
                Some(mu) => {
                    set.b2 = rec.run("B2", || solve_b2(cell, mu, cfg));
                    if p.tau0 > 0.0 {
                        b1_kernel = rec.run("B1_kernel", || solve_b1(cell, mu, p.tau0, p.rho_f, &FlowSchedule::Auto, cfg));
                        if b1_kernel.is_some() {
                            set.b1_kernel = Some(B1_KERNEL_FILE.into());
                        }
                    } else {
                        rec.skip("B1_kernel", "tau0 = 0: algebraic Darcy law");
                    }
                }
            }
        }
    }

    set.provenance.families = rec.families;
    Ok(CampaignOutcome {
        coefficients: LoadedCoefficients {
            set,
            b1_kernel,
            b_theta_kernel,
        },
        timings: rec.timings,
        failure: rec.failure,
    })
}
