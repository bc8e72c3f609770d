//! Run manifests: what was run, with which inputs, by which tool version.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{DeckError, Result};

pub const TOOL_NAME: &str = "deck";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// The full parsed configuration, enough to repeat the run.
    pub config: serde_json::Value,
    /// Input path (as given) to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    /// Command-specific summary, e.g. training losses or dropped ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            config,
            inputs: BTreeMap::new(),
            model_id: None,
            seed: None,
            timestamp: None,
            results: None,
        }
    }

    /// Records the hash of an input file. Pseudo-inputs such as `builtin`
    /// are recorded as such.
    pub fn add_input(&mut self, label: &str) -> Result<()> {
        let path = Path::new(label);
        let digest = if path.is_file() {
            file_sha256(path)?
        } else {
            "builtin".to_string()
        };
        self.inputs.insert(label.to_string(), digest);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifests serialize");
        fs::write(path, json + "\n").map_err(|e| DeckError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path).map_err(|e| DeckError::io(path, e))?;
        serde_json::from_str(&json).map_err(|e| DeckError::parse(path, e.line() as u64, e.to_string()))
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| DeckError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf).map_err(|e| DeckError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
