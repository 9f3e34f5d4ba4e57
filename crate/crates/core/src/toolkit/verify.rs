use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::criteria::{criterion_ids, run_criterion, Check, Level};
use crate::error::Result;
use crate::microcell::VoxelCell;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureCheck {
    pub path: PathBuf,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: Level,
    pub criteria: Vec<Check>,
    pub fixtures: Vec<FixtureCheck>,
    pub criteria_pass: bool,
    pub fixtures_ok: bool,
}

impl VerifyReport {
    /// 0 when everything passed, 2 for unreadable fixtures, 1 for failed criteria.
    pub fn exit_code(&self) -> i32 {
        if !self.fixtures_ok {
            2
        } else if !self.criteria_pass {
            1
        } else {
            0
        }
    }
}

/// Reads every `*.vox` file under `dir` (not recursive).
pub fn check_fixtures(dir: &Path) -> Result<Vec<FixtureCheck>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "vox"))
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|path| match VoxelCell::read(&path) {
            Ok(_) => FixtureCheck { path, ok: true, error: None },
            Err(e) => FixtureCheck {
                path,
                ok: false,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

/// Runs the criteria of `level`, calling `report` after each one.
pub fn verify(level: Level, fixtures: Option<&Path>, mut report: impl FnMut(&Check)) -> Result<VerifyReport> {
    let fixtures = match fixtures {
        Some(dir) => check_fixtures(dir)?,
        None => Vec::new(),
    };
    let criteria: Vec<Check> = criterion_ids(level)
        .into_iter()
        .map(|id| {
            let c = run_criterion(id, level);
            report(&c);
            c
        })
        .collect();
    Ok(VerifyReport {
        level,
        criteria_pass: criteria.iter().all(|c| c.pass),
        fixtures_ok: fixtures.iter().all(|f| f.ok),
        criteria,
        fixtures,
    })
}
