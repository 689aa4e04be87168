//! Config files (TOML or JSON) and run manifests.
//!
//! A manifest written by a previous run is itself a valid config file for the
//! same subcommand: its `config` object holds the fully resolved settings.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("toml") => Ok(Format::Toml),
            Some("json") => Ok(Format::Json),
            _ => Err(CliError::Usage(format!(
                "{}: config files must end in .toml or .json",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: T,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
}

/// Parses settings for `command`. Accepts either the settings object itself
/// or a manifest whose `command` matches.
pub fn parse_config<T: DeserializeOwned>(
    text: &str,
    format: Format,
    command: &str,
) -> Result<T, CliError> {
    let bad = |e: String| CliError::Usage(format!("config: {e}"));
    let value: serde_json::Value = match format {
        Format::Toml => toml::from_str(text).map_err(|e| bad(e.to_string()))?,
        Format::Json => serde_json::from_str(text).map_err(|e| bad(e.to_string()))?,
    };
    let body = match value {
        serde_json::Value::Object(mut map)
            if map.contains_key("tool") && map.contains_key("config") =>
        {
            let found = map
                .get("command")
                .and_then(|c| c.as_str())
                .unwrap_or_default();
            if found != command {
                return Err(bad(format!("manifest is for `{found}`, not `{command}`")));
            }
            map.remove("config").unwrap_or_default()
        }
        v @ serde_json::Value::Object(_) => v,
        _ => return Err(bad("top level must be a table/object".into())),
    };
    serde_json::from_value(body).map_err(|e| bad(e.to_string()))
}

/// Settings from `path`, or the defaults when no file is given.
pub fn load_config<T: DeserializeOwned + Default>(
    path: Option<&Path>,
    command: &str,
) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let format = Format::from_path(path)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse_config(&text, format, command)
}
