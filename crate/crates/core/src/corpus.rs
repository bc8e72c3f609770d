//! Labeled corpora and text cleaning.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::Label;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "dev" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Which samples of a corpus an operation looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSelector {
    All,
    Only(Split),
}

impl SplitSelector {
    pub fn matches(self, split: Split) -> bool {
        match self {
            SplitSelector::All => true,
            SplitSelector::Only(s) => s == split,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SplitSelector::All => "all",
            SplitSelector::Only(s) => s.as_str(),
        }
    }
}

/// Marks a sample whose text was extended by augmentation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentTag {
    pub test_id: String,
    pub sentence: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub split: Split,
    #[serde(default, rename = "deck_augmented", skip_serializing_if = "Option::is_none")]
    pub augmented: Option<AugmentTag>,
}

impl Sample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label, split: Split) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            split,
            augmented: None,
        }
    }
}

/// Per-label counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub depressed: usize,
    pub non_depressed: usize,
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.depressed + self.non_depressed
    }

    fn add(&mut self, label: Label) {
        match label {
            Label::Depressed => self.depressed += 1,
            Label::NonDepressed => self.non_depressed += 1,
        }
    }
}

/// Ordered collection of samples with unique ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    name: String,
    samples: Vec<Sample>,
    pub provenance: String,
}

impl Corpus {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, s) in samples.iter().enumerate() {
            if s.id.is_empty() {
                return Err(Error::EmptyId(i + 1));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            samples,
            provenance: String::new(),
        })
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Id to sample lookup table.
    pub fn index(&self) -> BTreeMap<&str, &Sample> {
        self.samples.iter().map(|s| (s.id.as_str(), s)).collect()
    }

    pub fn select(&self, split: SplitSelector) -> impl Iterator<Item = &Sample> + '_ {
        self.samples.iter().filter(move |s| split.matches(s.split))
    }

    pub fn label_counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for s in &self.samples {
            c.add(s.label);
        }
        c
    }

    pub fn split_counts(&self) -> BTreeMap<Split, LabelCounts> {
        let mut out = BTreeMap::new();
        for s in &self.samples {
            out.entry(s.split).or_insert_with(LabelCounts::default).add(s.label);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleaningStep {
    Apostrophes,
    Emoji,
    Curse,
}

/// Lookup tables for re-cleaning corpus text.
///
/// Apostrophe keys are lowercase contractions (straight apostrophe); emoji
/// keys match tokens exactly; curse tokens match case-insensitively.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningConfig {
    #[serde(rename = "apostrophes")]
    pub apostrophe_table: BTreeMap<String, String>,
    #[serde(rename = "emoji")]
    pub emoji_table: BTreeMap<String, String>,
    #[serde(rename = "curse")]
    pub curse_list: BTreeSet<String>,
    #[serde(rename = "steps")]
    pub enabled_steps: Vec<CleaningStep>,
}

impl CleaningConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(json).map_err(|e| Error::InvalidCleaning(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The small stand-in tables shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/cleaning.json")).expect("shipped cleaning tables are valid")
    }

    /// Checks that no table output can be matched again by any table, which
    /// makes cleaning idempotent.
    pub fn validate(&self) -> Result<()> {
        for key in self.apostrophe_table.keys() {
            if *key != key.to_lowercase() || key.contains('\u{2019}') {
                return Err(Error::InvalidCleaning(format!(
                    "apostrophe key {key:?} must be lowercase with a straight apostrophe"
                )));
            }
        }
        let outputs = self.apostrophe_table.values().chain(self.emoji_table.values());
        for out in outputs {
            for tok in out.split_whitespace() {
                if self.apostrophe_table.contains_key(&normalize_apostrophes(&tok.to_lowercase()))
                    || self.emoji_table.contains_key(tok)
                    || self.curse_list.contains(&tok.to_lowercase())
                {
                    return Err(Error::InvalidCleaning(format!(
                        "expansion {out:?} contains table key {tok:?}"
                    )));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for step in &self.enabled_steps {
            if !seen.insert(*step as u8) {
                return Err(Error::InvalidCleaning(format!("step {step:?} listed twice")));
            }
        }
        Ok(())
    }
}

fn normalize_apostrophes(s: &str) -> String {
    s.replace('\u{2019}', "'")
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Applies the enabled cleaning steps in order to whitespace-separated tokens
/// and joins the result with single spaces.
pub fn clean_text(text: &str, config: &CleaningConfig) -> String {
    let mut tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    for step in &config.enabled_steps {
        tokens = match step {
            CleaningStep::Apostrophes => tokens
                .into_iter()
                .flat_map(|tok| {
                    let key = normalize_apostrophes(&tok.to_lowercase());
                    match config.apostrophe_table.get(&key) {
                        Some(exp) => {
                            let exp = if tok.chars().next().is_some_and(char::is_uppercase) {
                                capitalize_first(exp)
                            } else {
                                exp.clone()
                            };
                            exp.split_whitespace().map(str::to_string).collect::<Vec<_>>()
                        }
                        None => alloc::vec![tok],
                    }
                })
                .collect(),
            CleaningStep::Emoji => tokens
                .into_iter()
                .flat_map(|tok| match config.emoji_table.get(&tok) {
                    Some(word) => word.split_whitespace().map(str::to_string).collect::<Vec<_>>(),
                    None => alloc::vec![tok],
                })
                .collect(),
            CleaningStep::Curse => tokens
                .into_iter()
                .filter(|tok| !config.curse_list.contains(&tok.to_lowercase()))
                .collect(),
        };
    }
    tokens.join(" ")
}

/// Cleans every sample. Samples whose text becomes empty are dropped and
/// their ids returned.
pub fn clean_corpus(corpus: &Corpus, config: &CleaningConfig) -> (Corpus, Vec<String>) {
    let mut dropped = Vec::new();
    let mut samples = Vec::with_capacity(corpus.len());
    for s in corpus.samples() {
        let text = clean_text(&s.text, config);
        if text.is_empty() {
            dropped.push(s.id.clone());
        } else {
            samples.push(Sample { text, ..s.clone() });
        }
    }
    let cleaned = Corpus {
        name: corpus.name.clone(),
        samples,
        provenance: corpus.provenance.clone(),
    };
    (cleaned, dropped)
}
