//! Prediction cache keyed by model id and the SHA-256 of the text, backed
//! by an append-only JSONL file.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{DeckError, Result};

pub const CACHE_ENV: &str = "DECK_CACHE_DIR";
pub const CACHE_FILE: &str = "predictions.jsonl";

pub fn text_sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct Entry {
    model_id: String,
    text_sha256: String,
    p_depressed: f64,
}

/// Entries for one model id. Without a file the cache lives only in memory.
pub struct PredictionCache {
    model_id: String,
    entries: HashMap<String, f64>,
    file: Option<(PathBuf, File)>,
}

impl PredictionCache {
    pub fn in_memory(model_id: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            entries: HashMap::new(),
            file: None,
        }
    }

    /// Opens `dir/predictions.jsonl`, loading the entries of `model_id`.
    /// Unparseable lines (for example a torn final write) are skipped.
    pub fn open(dir: &Path, model_id: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| DeckError::io(dir, e))?;
        let path = dir.join(CACHE_FILE);
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| DeckError::io(&path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| DeckError::io(&path, e))?;
                match serde_json::from_str::<Entry>(&line) {
                    Ok(e) if e.model_id == model_id && (0.0..=1.0).contains(&e.p_depressed) => {
                        entries.insert(e.text_sha256, e.p_depressed);
                    }
                    Ok(_) => {}
                    Err(err) => log::warn!("{}:{}: skipping cache line: {err}", path.display(), i + 1),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| DeckError::io(&path, e))?;
        Ok(Self {
            model_id: model_id.to_string(),
            entries,
            file: Some((path, file)),
        })
    }

    /// Opens the cache under `$DECK_CACHE_DIR`, or an in-memory one when the
    /// variable is unset.
    pub fn from_env(model_id: &str) -> Result<Self> {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::open(Path::new(&dir), model_id),
            _ => Ok(Self::in_memory(model_id)),
        }
    }

    pub fn get(&self, hash: &str) -> Option<f64> {
        self.entries.get(hash).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, hash: String, p: f64) -> Result<()> {
        if let Some((path, file)) = &mut self.file {
            let line = serde_json::to_string(&Entry {
                model_id: self.model_id.clone(),
                text_sha256: hash.clone(),
                p_depressed: p,
            })
            .expect("cache entries serialize");
            writeln!(file, "{line}").map_err(|e| DeckError::io(path, e))?;
        }
        self.entries.insert(hash, p);
        Ok(())
    }
}
