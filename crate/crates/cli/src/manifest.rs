use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use roadlab::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_SCHEMA: &str = "roadlab-run";
pub const MANIFEST_VERSION: u32 = 1;

/// Everything needed to rerun a command: the resolved config and the files it
/// produced, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: u32,
    pub command: String,
    pub code_version: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub start_time: u64,
    pub config: ScenarioConfig,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ScenarioConfig) -> Self {
        RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            version: MANIFEST_VERSION,
            command: command.into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            start_time: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config: config.clone(),
            artifacts: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(CliError::runtime)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if m.schema != MANIFEST_SCHEMA || m.version != MANIFEST_VERSION {
            return Err(CliError::Config(format!("unsupported manifest {} v{}", m.schema, m.version)));
        }
        m.config.validate()?;
        Ok(m)
    }
}
