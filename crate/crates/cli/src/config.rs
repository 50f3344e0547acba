//! Run configuration: command-line values, overlaid by an optional JSON file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Fully resolved configuration of one run, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    #[serde(default)]
    pub serial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub params: Value,
}

/// Raised for anything the user has to fix; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.to_string())
    }
}

pub fn field_err(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

impl RunConfig {
    /// Combine the parsed flags with the file given by `--config`; keys in the file win.
    pub fn resolve<P: Serialize + DeserializeOwned>(
        command: &str,
        flags: &P,
        serial: bool,
        threads: Option<usize>,
        file: Option<&Path>,
    ) -> Result<(RunConfig, P), ConfigError> {
        let mut cfg = RunConfig {
            command: command.to_string(),
            serial,
            threads,
            params: serde_json::to_value(flags)?,
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| field_err("config", e))?;
            let over: RunConfig =
                serde_json::from_str(&text).map_err(|e| field_err("config", e))?;
            if over.command != command {
                return Err(field_err(
                    "command",
                    format!("config is for `{}`, not `{command}`", over.command),
                ));
            }
            cfg.serial |= over.serial;
            cfg.threads = over.threads.or(cfg.threads);
            merge(&mut cfg.params, over.params)?;
        }
        if cfg.threads == Some(0) {
            return Err(field_err("threads", "must be at least 1"));
        }
        let params = serde_json::from_value(cfg.params.clone()).map_err(|e| field_err("params", e))?;
        Ok((cfg, params))
    }

    /// SHA-256 of the compact JSON form with keys sorted.
    pub fn hash(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        let text = serde_json::to_string(&v).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn merge(base: &mut Value, over: Value) -> Result<(), ConfigError> {
    let (Value::Object(b), Value::Object(o)) = (base, over) else {
        return Err(field_err("params", "must be a JSON object"));
    };
    for (k, v) in o {
        if !b.contains_key(&k) {
            return Err(field_err(&k, "unknown field"));
        }
        b.insert(k, v);
    }
    Ok(())
}

/// A JSON report: the config, its hash, and the command's own fields.
pub fn report(cfg: &RunConfig, body: Value) -> Value {
    let mut m = Map::new();
    m.insert("config_hash".into(), Value::String(cfg.hash()));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    if let Value::Object(b) = body {
        m.extend(b);
    }
    Value::Object(m)
}
