//! JSON scenario files.
//!
//! Every file is a JSON object with `"schema_version": 1` next to the payload fields.
//! Unknown fields are rejected, and every error carries the path of the offending field.

use std::path::Path;

use admittance_core::harness::{Experiment, Scenario};
use admittance_core::stability::SweepGrid;
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
}

impl LoadError {
    fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        LoadError::Field {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<admittance_core::ConfigError> for LoadError {
    fn from(e: admittance_core::ConfigError) -> Self {
        LoadError::field(e.path, e.source.to_string())
    }
}

/// Splits off and checks `schema_version`, returning the remaining fields.
fn strip_version(value: Value) -> Result<Map<String, Value>, LoadError> {
    let Value::Object(mut obj) = value else {
        return Err(LoadError::field("$", "expected a JSON object"));
    };
    match obj.remove("schema_version") {
        None => Err(LoadError::field("schema_version", "missing")),
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => Ok(obj),
        Some(other) => Err(LoadError::field(
            "schema_version",
            format!("unsupported value {other}, expected {SCHEMA_VERSION}"),
        )),
    }
}

fn typed<T: DeserializeOwned>(value: Value) -> Result<T, LoadError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        LoadError::field(if path == "." { "$".into() } else { path }, e.into_inner().to_string())
    })
}

fn read(path: &Path) -> Result<Value, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Read {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, LoadError> {
    scenario_from_value(serde_json::from_str(text)?)
}

pub fn scenario_from_value(value: Value) -> Result<Scenario, LoadError> {
    let s: Scenario = typed(Value::Object(strip_version(value)?))?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    scenario_from_value(read(path)?)
}

pub fn parse_sweep(text: &str) -> Result<SweepGrid, LoadError> {
    sweep_from_value(serde_json::from_str(text)?)
}

fn sweep_from_value(value: Value) -> Result<SweepGrid, LoadError> {
    let g: SweepGrid = typed(Value::Object(strip_version(value)?))?;
    g.validate()?;
    Ok(g)
}

pub fn load_sweep(path: &Path) -> Result<SweepGrid, LoadError> {
    sweep_from_value(read(path)?)
}

/// Serializes a scenario with its schema version, ready to be written to disk.
pub fn scenario_to_value(s: &Scenario) -> Value {
    let mut v = serde_json::to_value(s).expect("scenario serializes");
    if let Value::Object(obj) = &mut v {
        obj.insert("schema_version".into(), SCHEMA_VERSION.into());
    }
    v
}

/// Recursively overlays `patch` on `base`. Objects merge key by key; anything else replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

/// One suite entry. The scenario is well-formed but not yet validated, so that a bad
/// value shows up as a config-error row rather than aborting the suite.
pub type SuiteEntry = (Experiment, Scenario);

/// Reads a preset override file:
/// `{"schema_version": 1, "overrides": {"1": {...partial scenario...}, ...}}`.
/// Each partial scenario is merged onto that experiment's canonical preset.
/// Structural problems (unknown fields, wrong types) fail the whole file.
pub fn load_preset_overrides(path: &Path) -> Result<Vec<SuiteEntry>, LoadError> {
    presets_with_overrides(read(path)?)
}

pub fn presets_with_overrides(value: Value) -> Result<Vec<SuiteEntry>, LoadError> {
    let mut obj = strip_version(value)?;
    let overrides = match obj.remove("overrides") {
        None => Map::new(),
        Some(Value::Object(m)) => m,
        Some(_) => {
            return Err(LoadError::field(
                "overrides",
                "expected an object keyed by experiment id",
            ))
        }
    };
    if let Some(k) = obj.keys().next() {
        return Err(LoadError::field(k.clone(), "unknown field"));
    }
    for key in overrides.keys() {
        if !Experiment::ALL.iter().any(|e| e.id().to_string() == *key) {
            return Err(LoadError::field(format!("overrides.{key}"), "no such experiment"));
        }
    }
    Experiment::ALL
        .iter()
        .map(|&e| {
            let mut v = serde_json::to_value(e.scenario()).expect("scenario serializes");
            if let Some(patch) = overrides.get(&e.id().to_string()) {
                merge(&mut v, patch.clone());
            }
            typed::<Scenario>(v).map(|s| (e, s)).map_err(|err| match err {
                LoadError::Field { path, message } => LoadError::field(format!("overrides.{}.{path}", e.id()), message),
                other => other,
            })
        })
        .collect()
}
