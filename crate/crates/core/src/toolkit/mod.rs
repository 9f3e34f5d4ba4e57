//! Persistence and orchestration behind the command-line front end.

pub mod campaign;
pub mod coefficients;
pub mod criteria;
pub mod scenario;
pub mod verify;

pub use campaign::{solve_cells, CampaignManifest, CampaignOutcome};
pub use coefficients::{CampaignParams, CoefficientSet, FamilyStatus, LoadedCoefficients, Provenance, Which};
pub use scenario::{run_scenario, CoefficientSource, RunManifest, Scenario, ScenarioOutput};
pub use verify::{check_fixtures, verify, FixtureCheck, VerifyReport};
