//! Scenario files: sectioned TOML mirroring `ScenarioConfig`, with every key
//! optional and unknown keys rejected.

use std::path::Path;

use terra_core::engine::ScenarioConfig;
use terra_core::protocol::ProtocolSelector;
use toml::{Table, Value};

use crate::CliError;

/// Scenarios shipped inside the binary, by name.
pub const BUNDLED: &[(&str, &str)] = &[("concrete-6m", include_str!("../scenarios/concrete-6m.toml"))];

pub const DEFAULT_SCENARIO: &str = "concrete-6m";

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Read a scenario file, or a bundled scenario when `source` names one and
/// no such file exists. `None` loads the default bundled scenario.
pub fn load_table(source: Option<&str>) -> Result<Table, CliError> {
    let (origin, text) = match source {
        None => (
            DEFAULT_SCENARIO.to_string(),
            bundled(DEFAULT_SCENARIO).unwrap().to_string(),
        ),
        Some(s) if !Path::new(s).exists() && bundled(s).is_some() => (s.to_string(), bundled(s).unwrap().to_string()),
        Some(path) => (
            path.to_string(),
            std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?,
        ),
    };
    text.parse::<Table>()
        .map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

/// Parse `a.b.c=value`. The value is read as a TOML literal when possible and
/// as a bare string otherwise.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {spec:?}")))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("--set has an empty key segment in {key:?}")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((path, value))
}

pub fn apply_override(table: &mut Table, path: &[String], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut cur = table;
    for (i, seg) in parents.iter().enumerate() {
        let entry = cur.entry(seg.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            CliError::Config(format!(
                "--set {}: {} is not a section",
                path.join("."),
                parents[..=i].join(".")
            ))
        })?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Everything that can shape a resolved scenario on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub protocol: Option<ProtocolSelector>,
}

pub fn resolve(source: Option<&str>, overrides: &Overrides) -> Result<ScenarioConfig, CliError> {
    let mut table = load_table(source)?;
    for spec in &overrides.sets {
        let (path, value) = parse_override(spec)?;
        apply_override(&mut table, &path, value)?;
    }
    let mut cfg: ScenarioConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(p) = overrides.protocol {
        cfg.protocol = p;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn to_toml(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario config serializes")
}
