//! Corpus files: JSONL (canonical, read/write) and CSV (read-only).

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use deck_core::corpus::{AugmentTag, CleaningConfig, Corpus, Sample, Split};
use deck_core::model::Label;
use serde::Deserialize;

use crate::{DeckError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guesses from the extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "jsonl" => Some(CorpusFormat::Jsonl),
            "csv" => Some(CorpusFormat::Csv),
            _ => None,
        }
    }
}

#[derive(Deserialize)]
struct Record {
    id: String,
    text: String,
    label: String,
    split: String,
    #[serde(default)]
    deck_augmented: Option<AugmentTag>,
}

fn corpus_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string()
}

struct Builder<'a> {
    path: &'a Path,
    seen: HashMap<String, u64>,
    samples: Vec<Sample>,
}

impl<'a> Builder<'a> {
    fn new(path: &'a Path) -> Self {
        Self {
            path,
            seen: HashMap::new(),
            samples: Vec::new(),
        }
    }

    fn push(&mut self, line: u64, r: Record) -> Result<()> {
        if r.id.is_empty() {
            return Err(DeckError::parse(self.path, line, "empty sample id"));
        }
        if let Some(first) = self.seen.get(&r.id) {
            return Err(DeckError::parse(
                self.path,
                line,
                format!("duplicate sample id {:?} (first seen on line {first})", r.id),
            ));
        }
        let label = Label::parse(&r.label).ok_or_else(|| {
            DeckError::parse(
                self.path,
                line,
                format!("unknown label {:?}; expected \"depressed\" or \"non_depressed\"", r.label),
            )
        })?;
        let split = Split::parse(&r.split).ok_or_else(|| {
            DeckError::parse(
                self.path,
                line,
                format!("unknown split {:?}; expected \"train\", \"dev\" or \"test\"", r.split),
            )
        })?;
        self.seen.insert(r.id.clone(), line);
        let mut sample = Sample::new(r.id, r.text, label, split);
        sample.augmented = r.deck_augmented;
        self.samples.push(sample);
        Ok(())
    }

    fn finish(self) -> Result<Corpus> {
        Ok(Corpus::new(corpus_name(self.path), self.samples)?)
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
        CorpusFormat::Csv => load_csv(path),
    }
}

fn load_jsonl(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| DeckError::io(path, e))?;
    let mut builder = Builder::new(path);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| DeckError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| DeckError::parse(path, line_no, e.to_string()))?;
        builder.push(line_no, record)?;
    }
    builder.finish()
}

fn load_csv(path: &Path) -> Result<Corpus> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().cloned().map_err(|e| csv_error(path, e))?;
    let mut builder = Builder::new(path);
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let record: Record = row
            .deserialize(Some(&headers))
            .map_err(|e| DeckError::parse(path, line, e.to_string()))?;
        builder.push(line, record)?;
    }
    builder.finish()
}

fn csv_error(path: &Path, e: csv::Error) -> DeckError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    DeckError::parse(path, line, e.to_string())
}

/// Writes one JSON record per sample, in corpus order.
pub fn write_corpus_jsonl(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| DeckError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for s in corpus.samples() {
        serde_json::to_writer(&mut out, s).map_err(|e| DeckError::Invalid(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| DeckError::io(path, e))?;
    }
    out.flush().map_err(|e| DeckError::io(path, e))
}

/// `"builtin"` or a JSON file with keys apostrophes, emoji, curse, steps.
pub fn load_cleaning_config(spec: &str) -> Result<CleaningConfig> {
    if spec == "builtin" {
        return Ok(CleaningConfig::builtin());
    }
    let path = Path::new(spec);
    let json = fs::read_to_string(path).map_err(|e| DeckError::io(path, e))?;
    Ok(CleaningConfig::from_json(&json)?)
}
