use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::coefficients::{sha256_hex, LoadedCoefficients, TOOLKIT_VERSION};
use crate::error::{Error, Result};
use crate::macro_biot::{
    first_increase, DarcyForm, Forcing, InitialData, MacroCoefficients, MacroConfig, MacroModel, RegimeParameters,
    CSV_HEADER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSource {
    /// Path to a `coefficients.json`, relative to the scenario file.
    File(PathBuf),
    /// Column coefficients given directly.
    Inline(Box<MacroCoefficients>),
}

fn default_modes() -> usize {
    8
}

fn default_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub params: RegimeParameters,
    pub coefficients: CoefficientSource,
    pub nx: usize,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub darcy_form: DarcyForm,
    /// Axis of the column in cell coordinates.
    #[serde(default)]
    pub direction: usize,
    #[serde(default = "default_modes")]
    pub kernel_modes: usize,
    #[serde(default)]
    pub forcing: Forcing,
    #[serde(default)]
    pub heat_source: Forcing,
    #[serde(default)]
    pub initial: InitialData,
    /// Write every k-th step to the CSV; the manifest keeps all energies.
    #[serde(default = "default_every")]
    pub output_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub toolkit_version: String,
    pub regime: String,
    pub thermal_closure: String,
    pub darcy_form: DarcyForm,
    pub cell_fingerprint: Option<String>,
    pub coefficient_file: Option<String>,
    pub coefficient_hash: Option<String>,
    pub steps: usize,
    pub timings: BTreeMap<String, f64>,
    pub energy: Vec<f64>,
    pub energy_nonincreasing: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub csv: String,
    pub manifest: RunManifest,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        if s.output_every == 0 {
            return Err(Error::Parameter("output_every must be at least 1".into()));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let mut s = Self::from_json(&text)?;
        if let CoefficientSource::File(p) = &mut s.coefficients {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok(s)
    }
}

/// Runs a scenario and renders the per-step CSV and manifest in memory.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutput> {
    let mut timings = BTreeMap::new();
    let start = Instant::now();
    let (coeffs, fingerprint, file, file_hash) = match &s.coefficients {
        CoefficientSource::Inline(c) => ((**c).clone(), None, None, None),
        CoefficientSource::File(p) => {
            let loaded = LoadedCoefficients::read(p)?;
            let bytes = std::fs::read(p)?;
            let c = loaded.macro_coefficients(&s.params, s.direction, s.kernel_modes)?;
            (
                c,
                Some(loaded.set.provenance.cell_fingerprint.clone()),
                Some(p.display().to_string()),
                Some(sha256_hex(&bytes)),
            )
        }
    };
    let cfg = MacroConfig {
        nx: s.nx,
        dt: s.dt,
        horizon: s.horizon,
        darcy_form: s.darcy_form,
    };
    let model = MacroModel::new(&s.params, &coeffs, &cfg)?;
    timings.insert("setup".to_string(), start.elapsed().as_secs_f64());
    let start = Instant::now();
    let run = model.run(&s.initial, &s.forcing, &s.heat_source)?;
    timings.insert("march".to_string(), start.elapsed().as_secs_f64());
    let mut csv = String::new();
    writeln!(csv, "{CSV_HEADER}").unwrap();
    for (k, st) in run.states.iter().enumerate() {
        if k % s.output_every == 0 || k + 1 == run.states.len() {
            for row in st.csv_rows(k) {
                writeln!(csv, "{row}").unwrap();
            }
        }
    }
    let mut hashed = s.clone();
    if let CoefficientSource::File(_) = hashed.coefficients {
        hashed.coefficients = CoefficientSource::File(PathBuf::from(file_hash.clone().unwrap_or_default()));
    }
    let config_hash = sha256_hex(&serde_json::to_vec(&(&hashed, TOOLKIT_VERSION))?);
    let energy_nonincreasing = first_increase(&run.energy, 1e-8).is_none();
    Ok(ScenarioOutput {
        csv,
        manifest: RunManifest {
            config_hash,
            toolkit_version: TOOLKIT_VERSION.into(),
            regime: model.regime.to_string(),
            thermal_closure: format!("{:?}", model.closure).to_lowercase(),
            darcy_form: s.darcy_form,
            cell_fingerprint: fingerprint,
            coefficient_file: file,
            coefficient_hash: file_hash,
            steps: run.states.len() - 1,
            timings,
            energy: run.energy,
            energy_nonincreasing,
        },
    })
}
