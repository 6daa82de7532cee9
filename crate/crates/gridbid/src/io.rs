//! JSON case and scenario files.
//!
//! Both carry `schema_version: 1`. Bus references in a case file are bus
//! `id` labels, which need not be contiguous; loading renumbers them. The
//! reference bus may be omitted, in which case the lowest label is used.

use std::fs;
use std::path::Path;

use gridbid_core::grid::{Bus, ConventionalUnit, GridCase, LoadPoint, Line, ScenarioSet, VresUnit, Warning};
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub schema_version: u32,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<Line>,
    pub conventional_units: Vec<ConventionalUnit>,
    #[serde(default)]
    pub vres_units: Vec<VresUnit>,
    #[serde(default)]
    pub loads: Vec<LoadPoint>,
    pub voll: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_bus: Option<usize>,
}

impl CaseFile {
    pub fn from_case(case: &GridCase) -> Self {
        CaseFile {
            schema_version: SCHEMA_VERSION,
            buses: case.buses.clone(),
            lines: case.lines.clone(),
            conventional_units: case.conventional_units.clone(),
            vres_units: case.vres_units.clone(),
            loads: case.loads.clone(),
            voll: case.voll,
            reference_bus: Some(case.buses[case.reference_bus].id),
        }
    }

    pub fn into_case(self) -> Result<GridCase, gridbid_core::Error> {
        GridCase::from_labeled(
            self.buses,
            self.lines,
            self.conventional_units,
            self.vres_units,
            self.loads,
            self.voll,
            self.reference_bus,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub weights: Vec<f64>,
    pub realizations: Vec<Vec<f64>>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_version(path: &Path, found: u32) -> Result<(), Error> {
    if found != SCHEMA_VERSION {
        return Err(Error::Schema { path: path.into(), found });
    }
    Ok(())
}

/// Reads and validates a case file. Soft findings are returned alongside.
pub fn load_case_with_warnings(path: impl AsRef<Path>) -> Result<(GridCase, Vec<Warning>), Error> {
    let path = path.as_ref();
    let file: CaseFile = read_json(path)?;
    check_version(path, file.schema_version)?;
    let case = file.into_case()?;
    let warnings = case.validate()?;
    Ok((case, warnings))
}

pub fn load_case(path: impl AsRef<Path>) -> Result<GridCase, Error> {
    load_case_with_warnings(path).map(|(c, _)| c)
}

pub fn write_case(path: impl AsRef<Path>, case: &GridCase) -> Result<(), Error> {
    write_json(path.as_ref(), &CaseFile::from_case(case))
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<ScenarioSet, Error> {
    let path = path.as_ref();
    let file: ScenarioFile = read_json(path)?;
    check_version(path, file.schema_version)?;
    Ok(ScenarioSet::new(file.weights, file.realizations)?)
}

pub fn write_scenarios(path: impl AsRef<Path>, scenarios: &ScenarioSet) -> Result<(), Error> {
    let file = ScenarioFile {
        schema_version: SCHEMA_VERSION,
        weights: scenarios.weights.clone(),
        realizations: scenarios.realizations.clone(),
    };
    write_json(path.as_ref(), &file)
}

/// Writes any serializable value as pretty JSON.
pub fn write_json_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), Error> {
    write_json(path.as_ref(), value)
}
