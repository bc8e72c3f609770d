//! Embedding files (JSONL `{"id","v":[..]}` or headerless numeric CSV) and
//! the projection CSV export.

use std::fs;
use std::io::Write;
use std::path::Path;

use deck_core::shift::EmbeddingSet;
use serde::Deserialize;

use crate::{DeckError, Result};

#[derive(Deserialize)]
struct Row {
    #[allow(dead_code)]
    id: String,
    v: Vec<f64>,
}

/// Loads an embedding set named after the file stem. `.csv` files are read
/// as headerless rows of numbers; anything else as JSONL.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("embeddings");
    load_embeddings_named(path, name)
}

pub fn load_embeddings_named(path: &Path, name: &str) -> Result<EmbeddingSet> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let vectors = if is_csv { read_csv(path)? } else { read_jsonl(path)? };
    if let Some(first) = vectors.first() {
        if let Some((i, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != first.len()) {
            return Err(DeckError::parse(
                path,
                i as u64 + 1,
                format!("vector has {} components, the first has {}", v.len(), first.len()),
            ));
        }
    }
    Ok(EmbeddingSet::new(name, vectors)?)
}

fn read_jsonl(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| DeckError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Row =
            serde_json::from_str(line).map_err(|e| DeckError::parse(path, i as u64 + 1, e.to_string()))?;
        out.push(row.v);
    }
    Ok(out)
}

fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DeckError::parse(path, 0, e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DeckError::parse(path, 0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let v = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| DeckError::parse(path, line, e.to_string()))?;
        out.push(v);
    }
    Ok(out)
}

/// Writes `x,y,corpus` rows for every projected point of every set.
pub fn write_projection_csv(path: &Path, projections: &[(String, Vec<[f64; 2]>)]) -> Result<()> {
    let mut out = String::from("x,y,corpus\n");
    for (name, points) in projections {
        for [x, y] in points {
            out.push_str(&format!("{x},{y},{}\n", csv_field(name)));
        }
    }
    let mut f = fs::File::create(path).map_err(|e| DeckError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| DeckError::io(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
