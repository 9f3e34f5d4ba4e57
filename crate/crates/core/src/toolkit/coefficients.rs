use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell_elastic::{pair_index, Mat3};
use crate::error::{Error, Result};
use crate::kernel::TimeKernel;
use crate::linsolve::SolverConfig;
use crate::macro_biot::{KernelModes, MacroCoefficients, RegimeParameters, Viscosity};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Elastic,
    Thermal,
    Flow,
    All,
}

impl Which {
    pub fn includes(self, family: Which) -> bool {
        self == Which::All || self == family
    }
}

/// Inputs of a cell campaign, stored verbatim in the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignParams {
    pub regime: RegimeParameters,
    pub solver: SolverConfig,
    pub which: Which,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FamilyStatus {
    Solved,
    Skipped { reason: String },
    Failed { reason: String, exit_code: i32 },
}

impl FamilyStatus {
    pub fn is_failed(&self) -> bool {
        matches!(self, FamilyStatus::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub toolkit_version: String,
    pub cell_fingerprint: String,
    pub resolution: usize,
    pub fluid_connected: bool,
    pub solid_connected: bool,
    pub tolerances: SolverConfig,
    pub families: BTreeMap<String, FamilyStatus>,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub timestamp: u64,
}

/// The interchange file between cell and macroscale stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub m: f64,
    #[serde(rename = "A0")]
    pub a0_tensor: Option<Vec<f64>>,
    #[serde(rename = "A1")]
    pub a1_tensor: Option<Vec<f64>>,
    #[serde(rename = "B0s")]
    pub b0: Option<Mat3>,
    #[serde(rename = "B1s")]
    pub b1: Option<Mat3>,
    #[serde(rename = "C0s")]
    pub c0: Option<Mat3>,
    pub a0_tilde: Option<f64>,
    pub a0: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    #[serde(rename = "Btheta")]
    pub btheta: Option<Mat3>,
    #[serde(rename = "B2")]
    pub b2: Option<Mat3>,
    #[serde(rename = "B3")]
    pub b3: Option<Mat3>,
    #[serde(rename = "B1_kernel")]
    pub b1_kernel: Option<String>,
    pub b_theta_kernel: Option<String>,
    pub c_theta_f: Option<f64>,
    pub params: CampaignParams,
    pub provenance: Provenance,
}

pub const B1_KERNEL_FILE: &str = "B1_kernel.csv";
pub const B_THETA_KERNEL_FILE: &str = "b_theta_kernel.csv";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of everything that determines a campaign's numbers.
pub fn campaign_hash(fingerprint: &str, params: &CampaignParams) -> Result<String> {
    let canonical = serde_json::to_vec(&(fingerprint, params, TOOLKIT_VERSION))?;
    Ok(sha256_hex(&canonical))
}

/// A coefficient set together with the kernels its paths refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCoefficients {
    pub set: CoefficientSet,
    pub b1_kernel: Option<TimeKernel>,
    pub b_theta_kernel: Option<TimeKernel>,
}

fn read_kernel(dir: &Path, name: &str) -> Result<TimeKernel> {
    let path = dir.join(name);
    let f = fs::File::open(&path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    TimeKernel::read_csv(BufReader::new(f))
}

impl LoadedCoefficients {
    /// Writes `coefficients.json` and the kernel CSVs into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        for (kernel, name) in [(&self.b1_kernel, &self.set.b1_kernel), (&self.b_theta_kernel, &self.set.b_theta_kernel)] {
            if let (Some(k), Some(name)) = (kernel, name) {
                let mut buf = Vec::new();
                k.write_csv(&mut buf)?;
                fs::write(dir.join(name), buf)?;
            }
        }
        let path = dir.join("coefficients.json");
        fs::write(&path, self.set.to_json()?)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let set: CoefficientSet = serde_json::from_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let b1_kernel = set.b1_kernel.as_deref().map(|n| read_kernel(dir, n)).transpose()?;
        let b_theta_kernel = set.b_theta_kernel.as_deref().map(|n| read_kernel(dir, n)).transpose()?;
        Ok(Self {
            set,
            b1_kernel,
            b_theta_kernel,
        })
    }

    /// Column coefficients along axis `dir`, checked against the scenario's
    /// parameters.
    pub fn macro_coefficients(&self, scenario: &RegimeParameters, dir: usize, modes: usize) -> Result<MacroCoefficients> {
        if dir > 2 {
            return Err(Error::Parameter(format!("direction {dir} out of range")));
        }
        let s = &self.set;
        let cell = &s.params.regime;
        let missing = |name: &str| Error::Configuration(format!("coefficient file has no {name}"));
        let mismatch = |name: &str, a: String, b: String| {
            Error::Configuration(format!("scenario {name} = {a} but the coefficients were computed with {b}"))
        };
        let same = |name: &str, a: f64, b: f64| -> Result<()> {
            if a == b {
                Ok(())
            } else {
                Err(mismatch(name, a.to_string(), b.to_string()))
            }
        };
        same("lambda0", scenario.lambda0, cell.lambda0)?;
        same("eta0", scenario.eta0, cell.eta0)?;
        same("kappa0s", scenario.kappa0s, cell.kappa0s)?;
        let fluid_connected = s.provenance.fluid_connected;
        let viscous_flow = fluid_connected && matches!(scenario.mu1, Viscosity::Finite(v) if v > 0.0);
        if viscous_flow || (!fluid_connected && !scenario.mu1.is_infinite()) {
            if scenario.mu1 != cell.mu1 {
                return Err(mismatch("mu1", format!("{:?}", scenario.mu1), format!("{:?}", cell.mu1)));
            }
            same("kappa1", scenario.kappa1, cell.kappa1)?;
        }
        let dd = |m: &Option<Mat3>, name: &str| -> Result<f64> { m.map(|m| m[dir][dir]).ok_or_else(|| missing(name)) };
        let a0_tensor = s.a0_tensor.as_ref().ok_or_else(|| missing("A0"))?;
        let k = pair_index(dir, dir);
        let mut c = MacroCoefficients {
            m: s.m,
            a0_1111: a0_tensor[6 * k + k],
            b0: dd(&s.b0, "B0s")?,
            b1: dd(&s.b1, "B1s")?,
            c0: dd(&s.c0, "C0s")?,
            a0_tilde: s.a0_tilde.ok_or_else(|| missing("a0_tilde"))?,
            a0: s.a0.ok_or_else(|| missing("a0"))?,
            a1: s.a1.ok_or_else(|| missing("a1"))?,
            btheta: dd(&s.btheta, "Btheta")?,
            b2: s.b2.map(|m| m[dir][dir]),
            b3: s.b3.map(|m| m[dir][dir]),
            b1_kernel: None,
            b_theta_kernel: None,
            c_theta_f: s.c_theta_f,
            fluid_connected,
        };
        let tau_match = scenario.tau0 == cell.tau0;
        if let Some(kern) = &self.b1_kernel {
            if tau_match && scenario.rho_f == cell.rho_f {
                c.b1_kernel = Some(KernelModes::from_kernel(kern, 4 * dir, modes)?);
            }
        }
        if let Some(kern) = &self.b_theta_kernel {
            if tau_match && scenario.c_pf == cell.c_pf {
                c.b_theta_kernel = Some(KernelModes::from_kernel(kern, 0, modes)?);
            }
        }
        Ok(c)
    }
}

impl CoefficientSet {
    /// Pretty JSON with a trailing newline. Deterministic for identical inputs
    /// apart from `provenance.timestamp`.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// JSON with the timestamp zeroed, for comparing runs.
    pub fn canonical_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.provenance.timestamp = 0;
        c.to_json()
    }
}
