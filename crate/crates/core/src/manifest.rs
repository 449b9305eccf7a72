//! Run manifests written beside every CLI output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{parse_config, write_config};
use crate::error::{Error, Result};
use crate::harness::ScenarioConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to repeat a run: the fully resolved config (including
/// seed, repetitions and durations after command-line overrides) and the
/// subcommand that consumed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub master_seed: u64,
    /// Resolved config in the config-file format.
    pub config: String,
    /// Human-readable description of derived scenario parameters.
    pub parameters: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ScenarioConfig) -> Result<Self> {
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed: cfg.master_seed,
            config: write_config(cfg)?,
            parameters: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        })
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        parse_config(&self.config)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::State(format!("cannot serialize manifest: {e}")))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BehaviorModel;

    #[test]
    fn manifest_round_trips_config() {
        let cfg = ScenarioConfig::standard(10, 2.0)
            .with_attacker(3, BehaviorModel::Multiplicative { alpha: 0.3 });
        let mut m = RunManifest::new("simulate", &cfg).unwrap();
        m.outputs.push("records.csv".into());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        m.write(&path).unwrap();
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.scenario().unwrap(), cfg);
    }
}
