use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

pub const COMMANDS: [&str; 12] = [
    "cayley-ball",
    "distortion",
    "slice",
    "coarea",
    "tv-identity",
    "perimeter",
    "alpha",
    "bad-mass",
    "straighten",
    "collapse",
    "scale-compare",
    "moving-char",
];

/// One experiment: a command, its named input files and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub command: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(command: &str, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            format_version: FORMAT_VERSION,
            command: command.to_string(),
            inputs: BTreeMap::new(),
            params: Map::new(),
            seed: 0,
            output_dir: output_dir.into(),
        }
    }

    pub fn from_json_str(s: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Schema(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(CliError::Schema(format!("unknown command {:?}", self.command)));
        }
        Ok(())
    }

    /// SHA-256 of the config's canonical JSON with `output_dir` left out, so
    /// the same experiment hashes alike wherever it is written.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("config is an object").remove("output_dir");
        sha256_hex(&serde_json::to_vec(&v).expect("value serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Typed access to `params` that rejects keys no command reads.
pub struct Params<'a> {
    map: &'a Map<String, Value>,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Params<'a> {
    pub fn new(map: &'a Map<String, Value>) -> Self {
        Params { map, used: RefCell::new(BTreeSet::new()) }
    }

    fn get<T: serde::de::DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        self.used.borrow_mut().insert(key.to_string());
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => {
                serde_json::from_value(v.clone()).map(Some).map_err(|e| CliError::Schema(format!("param {key:?}: {e}")))
            }
        }
    }

    pub fn or<T: serde::de::DeserializeOwned>(&self, key: &str, default: T) -> CliResult<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn opt<T: serde::de::DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        self.get(key)
    }

    /// Fails on any key that was never read.
    pub fn finish(&self) -> CliResult<()> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.map.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Schema(format!("unknown params {unknown:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn roundtrip() {
        let mut cfg = ExperimentConfig::new("alpha", "out");
        cfg.seed = 7;
        cfg.inputs.insert("set".into(), "e.hgrd".into());
        cfg.params.insert("r".into(), json!([0.1, 0.2]));
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"format_version":1,"command":"alpha","output_dir":"o","extra":1}"#;
        assert!(matches!(ExperimentConfig::from_json_str(text), Err(CliError::Schema(_))));
        let text = r#"{"format_version":1,"command":"nope","output_dir":"o"}"#;
        assert!(matches!(ExperimentConfig::from_json_str(text), Err(CliError::Schema(_))));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::new("moving-char", "x");
        let b = ExperimentConfig::new("moving-char", "y");
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn params_track_usage() {
        let map = json!({"n": 5, "typo": 1}).as_object().unwrap().clone();
        let p = Params::new(&map);
        assert_eq!(p.or("n", 0usize).unwrap(), 5);
        assert_eq!(p.or("m", 3usize).unwrap(), 3);
        assert!(p.finish().is_err());
        assert!(p.or::<String>("n", String::new()).is_err());
    }
}
