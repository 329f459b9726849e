//! Batch front-end for the `hcut` experiments.
//!
//! Each run takes an [`ExperimentConfig`] and writes `<command>.json` (the
//! result envelope), `<command>.csv` (plot data) and any artifacts into the
//! config's output directory.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

pub use config::{ExperimentConfig, Params, FORMAT_VERSION};
pub use error::{CliError, CliResult};

/// The config schema shipped with the repository.
pub const CONFIG_SCHEMA: &str = include_str!("../../../schema/experiment-config.schema.json");

/// Files written by one run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub result_json: PathBuf,
    pub csv: PathBuf,
    pub artifacts: Vec<PathBuf>,
}

/// The deterministic part of the result envelope.
pub fn envelope(cfg: &ExperimentConfig, out: &commands::Outcome) -> Value {
    let hashes: Map<String, Value> = out.input_hashes.iter().map(|(k, h)| (k.clone(), json!(h))).collect();
    json!({
        "command": cfg.command,
        "format_version": cfg.format_version,
        "seed": cfg.seed,
        "provenance": {
            "config_hash": cfg.hash(),
            "library_version": hcut::VERSION,
            "input_hashes": hashes,
        },
        "result": out.result,
    })
}

/// Runs one experiment and writes its outputs.
pub fn run(cfg: &ExperimentConfig) -> CliResult<RunSummary> {
    let out = commands::dispatch(cfg)?;
    let mut env = envelope(cfg, &out);
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    env["timestamp"] = json!(now);

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let result_json = dir.join(format!("{}.json", cfg.command));
    let mut bytes = serde_json::to_vec_pretty(&env)?;
    bytes.push(b'\n');
    std::fs::write(&result_json, bytes)?;
    let csv = dir.join(format!("{}.csv", cfg.command));
    std::fs::write(&csv, &out.csv)?;
    let mut artifacts = Vec::new();
    for (name, data) in &out.artifacts {
        let p = dir.join(name);
        std::fs::write(&p, data)?;
        artifacts.push(p);
    }
    Ok(RunSummary { result_json, csv, artifacts })
}

/// Parses `KEY=VALUE`; the value is read as JSON when it parses, else as a string.
pub fn parse_param(s: &str) -> CliResult<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Schema(format!("expected KEY=VALUE, got {s:?}")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_values() {
        assert_eq!(parse_param("n=5").unwrap(), ("n".into(), json!(5)));
        assert_eq!(parse_param("x=[0.1,0,0]").unwrap().1, json!([0.1, 0, 0]));
        assert_eq!(parse_param("graph=path4").unwrap().1, json!("path4"));
        assert!(parse_param("nokey").is_err());
    }

    #[test]
    fn schema_is_json() {
        let v: Value = serde_json::from_str(CONFIG_SCHEMA).unwrap();
        let cmds = v["properties"]["command"]["enum"].as_array().unwrap();
        assert_eq!(cmds.len(), config::COMMANDS.len());
        for c in config::COMMANDS {
            assert!(cmds.contains(&json!(c)));
        }
    }
}
