//! Suite files in JSON or TOML. A pronoun map reference is a builtin name
//! (`T1`..`T6`), a path to a JSON map file relative to the suite file, or
//! an inline table.

use std::fs;
use std::path::Path;

use deck_core::suite::{resolve_builtin, MapRef, Suite, SuiteDef};
use deck_core::textops::PronounMap;

use crate::{DeckError, Result};

pub fn load_suite(spec: &str) -> Result<Suite> {
    if spec == "builtin" {
        return Ok(Suite::builtin());
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|e| DeckError::io(path, e))?;
    let def: SuiteDef = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| DeckError::parse(path, 0, e.to_string()))?,
        _ => serde_json::from_str(&text)
            .map_err(|e| DeckError::parse(path, e.line() as u64, e.to_string()))?,
    };
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut resolve = |r: &MapRef| -> deck_core::Result<PronounMap> {
        match r {
            MapRef::Named(name) if PronounMap::builtin(name).is_none() => {
                let file = base.join(name);
                let json = fs::read_to_string(&file).map_err(|e| deck_core::Error::InvalidMap {
                    name: name.clone(),
                    reason: format!("not a builtin map and {} is unreadable: {e}", file.display()),
                })?;
                let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or(name);
                PronounMap::from_json(stem, &json)
            }
            other => resolve_builtin(other),
        }
    };
    Ok(Suite::from_def(def, &mut resolve)?)
}

/// The suite as pretty JSON, maps inlined unless builtin.
pub fn suite_to_json(suite: &Suite) -> String {
    serde_json::to_string_pretty(&suite.to_def()).expect("suite definitions serialize")
}
