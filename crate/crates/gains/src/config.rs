//! TOML run configurations.
//!
//! A config file is a serialized [`FederationConfig`]; `schema_version` must
//! be present and match [`CONFIG_SCHEMA_VERSION`]. `gains config --preset`
//! prints a complete, commented-free starting point.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use gains_core::orchestrator::{FederationConfig, Scenario, CONFIG_SCHEMA_VERSION};

use crate::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Mild,
    Medium,
    Strong,
    Sequential,
}

impl Preset {
    pub fn config(self) -> FederationConfig {
        match self {
            Preset::Mild => FederationConfig::desk(Scenario::MildShift),
            Preset::Medium => FederationConfig::desk(Scenario::MediumShift),
            Preset::Strong => FederationConfig::desk(Scenario::StrongShift),
            Preset::Sequential => FederationConfig::desk_sequential(),
        }
    }
}

pub fn parse_config(text: &str) -> AppResult<FederationConfig> {
    // Check the version before the full parse so old files get a clear
    // message instead of a missing-field error.
    let raw: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| AppError::Config(e.to_string()))?;
    match raw.get("schema_version").and_then(toml::Value::as_integer) {
        Some(v) if v == CONFIG_SCHEMA_VERSION as i64 => {}
        Some(v) => {
            return Err(AppError::Config(format!(
                "unsupported schema_version {v} (expected {CONFIG_SCHEMA_VERSION})"
            )))
        }
        None => {
            return Err(AppError::Config(
                "missing integer key schema_version".into(),
            ))
        }
    }
    let cfg: FederationConfig =
        toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> AppResult<FederationConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        AppError::Config(m) => AppError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn to_toml(cfg: &FederationConfig) -> AppResult<String> {
    toml::to_string(cfg).map_err(|e| AppError::Config(e.to_string()))
}
