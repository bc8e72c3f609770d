//! Tokenization and the two perturbation primitives: pronoun rewriting and
//! sentence appending.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    Punctuation,
    Whitespace,
}

/// A slice of the source text. Spans are byte offsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Token<'a> {
    pub surface: &'a str,
    pub span: (usize, usize),
    pub kind: TokenKind,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

fn kind_of(c: char) -> TokenKind {
    if is_word_char(c) {
        TokenKind::Word
    } else if c.is_whitespace() {
        TokenKind::Whitespace
    } else {
        TokenKind::Punctuation
    }
}

/// Splits text into words (maximal runs of letters, digits and apostrophes),
/// whitespace runs, and single-character punctuation tokens.
///
/// Concatenating the surfaces always reproduces the input.
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((start, c)) = chars.next() {
        let kind = kind_of(c);
        let mut end = start + c.len_utf8();
        if kind != TokenKind::Punctuation {
            while let Some(&(i, next)) = chars.peek() {
                if kind_of(next) != kind {
                    break;
                }
                end = i + next.len_utf8();
                chars.next();
            }
        }
        tokens.push(Token {
            surface: &text[start..end],
            span: (start, end),
            kind,
        });
    }
    tokens
}

/// Lowercased word tokens of a text.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    tokenize(text)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Word)
        .map(|t| t.surface.to_lowercase())
}

/// Resolution for a source pronoun with two possible targets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguityRule {
    /// Used when the next non-whitespace token is a word (determiner reading).
    pub before_word: String,
    /// Used otherwise.
    pub otherwise: String,
}

#[derive(Deserialize, Serialize)]
struct PronounMapFile {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    ambiguity: BTreeMap<String, AmbiguityRule>,
    #[serde(flatten)]
    entries: BTreeMap<String, String>,
}

/// Whole-word, case-insensitive pronoun substitution table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PronounMap {
    name: String,
    entries: BTreeMap<String, String>,
    ambiguity: BTreeMap<String, AmbiguityRule>,
}

impl PronounMap {
    pub fn new(
        name: impl Into<String>,
        entries: BTreeMap<String, String>,
        ambiguity: BTreeMap<String, AmbiguityRule>,
    ) -> Result<Self> {
        let map = Self {
            name: name.into(),
            entries,
            ambiguity,
        };
        map.validate()?;
        Ok(map)
    }

    /// Parses the JSON map format: an object of source to target strings
    /// with an optional `"ambiguity"` section.
    pub fn from_json(name: impl Into<String>, json: &str) -> Result<Self> {
        let name = name.into();
        let file: PronounMapFile = serde_json::from_str(json).map_err(|e| Error::InvalidMap {
            name: name.clone(),
            reason: e.to_string(),
        })?;
        Self::new(name, file.entries, file.ambiguity)
    }

    pub fn to_json(&self) -> String {
        let file = PronounMapFile {
            ambiguity: self.ambiguity.clone(),
            entries: self.entries.clone(),
        };
        serde_json::to_string_pretty(&file).expect("string maps always serialize")
    }

    /// One of the six maps shipped with the suite (`T1` … `T6`).
    pub fn builtin(name: &str) -> Option<Self> {
        let json = match name {
            "T1" => include_str!("../data/maps/T1.json"),
            "T2" => include_str!("../data/maps/T2.json"),
            "T3" => include_str!("../data/maps/T3.json"),
            "T4" => include_str!("../data/maps/T4.json"),
            "T5" => include_str!("../data/maps/T5.json"),
            "T6" => include_str!("../data/maps/T6.json"),
            _ => return None,
        };
        Some(Self::from_json(name, json).expect("builtin pronoun maps are valid"))
    }

    pub const BUILTIN_NAMES: [&'static str; 6] = ["T1", "T2", "T3", "T4", "T5", "T6"];

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn ambiguity(&self) -> &BTreeMap<String, AmbiguityRule> {
        &self.ambiguity
    }

    pub fn is_builtin(&self) -> bool {
        Self::builtin(&self.name).as_ref() == Some(self)
    }

    /// True when `word` (any case) would be rewritten.
    pub fn contains_key(&self, word: &str) -> bool {
        let lower = word.to_lowercase();
        self.entries.contains_key(&lower) || self.ambiguity.contains_key(&lower)
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidMap {
            name: self.name.clone(),
            reason,
        };
        let single_word = |s: &str| {
            let toks = tokenize(s);
            toks.len() == 1 && toks[0].kind == TokenKind::Word
        };
        if self.entries.is_empty() && self.ambiguity.is_empty() {
            return Err(bad("map has no entries".into()));
        }
        let all_targets = self
            .entries
            .iter()
            .chain(self.ambiguity.iter().flat_map(|(k, r)| [(k, &r.before_word), (k, &r.otherwise)]));
        for (key, target) in all_targets {
            if key.is_empty() || *key != key.to_lowercase() || !single_word(key) {
                return Err(bad(format!("key {key:?} must be a single lowercase word")));
            }
            if !single_word(target) {
                return Err(bad(format!("replacement {target:?} for {key:?} must be a single word")));
            }
        }
        Ok(())
    }
}

/// Result of a pronoun rewrite with per-call counters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rewrite {
    pub text: String,
    pub replaced: usize,
    /// Replacements that went through an ambiguity rule.
    pub ambiguous: usize,
}

fn sentence_initial(tokens: &[Token<'_>], index: usize) -> bool {
    let mut saw_space = false;
    for tok in tokens[..index].iter().rev() {
        match tok.kind {
            TokenKind::Whitespace => saw_space = true,
            TokenKind::Punctuation => {
                return saw_space && matches!(tok.surface, "." | "?" | "!");
            }
            TokenKind::Word => return false,
        }
    }
    true
}

fn next_is_word(tokens: &[Token<'_>], index: usize) -> bool {
    tokens[index + 1..]
        .iter()
        .find(|t| t.kind != TokenKind::Whitespace)
        .is_some_and(|t| t.kind == TokenKind::Word)
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Rewrites every word whose lowercase form is a map key.
///
/// The replacement is written as stored in the map, except that its first
/// letter is uppercased when the original started with an uppercase letter,
/// unless the original is the pronoun "I" in mid-sentence. Punctuation,
/// whitespace and non-key words are copied byte for byte.
pub fn rewrite(text: &str, map: &PronounMap) -> Rewrite {
    let tokens = tokenize(text);
    let mut out = String::with_capacity(text.len() + 8);
    let mut replaced = 0;
    let mut ambiguous = 0;
    for (i, tok) in tokens.iter().enumerate() {
        if tok.kind != TokenKind::Word {
            out.push_str(tok.surface);
            continue;
        }
        let lower = tok.surface.to_lowercase();
        let target = if let Some(rule) = map.ambiguity.get(&lower) {
            ambiguous += 1;
            Some(if next_is_word(&tokens, i) {
                &rule.before_word
            } else {
                &rule.otherwise
            })
        } else {
            map.entries.get(&lower)
        };
        match target {
            Some(target) => {
                replaced += 1;
                let upper_first = tok.surface.chars().next().is_some_and(char::is_uppercase);
                if upper_first && (tok.surface != "I" || sentence_initial(&tokens, i)) {
                    out.push_str(&capitalize(target));
                } else {
                    out.push_str(target);
                }
            }
            None => out.push_str(tok.surface),
        }
    }
    Rewrite {
        text: out,
        replaced,
        ambiguous,
    }
}

pub fn apply_pronoun_map(text: &str, map: &PronounMap) -> String {
    rewrite(text, map).text
}

/// `text + separator + sentence`; an empty base yields just the sentence.
pub fn append_sentence(text: &str, sentence: &str, separator: &str) -> String {
    if text.is_empty() {
        return sentence.to_string();
    }
    let mut out = String::with_capacity(text.len() + separator.len() + sentence.len());
    out.push_str(text);
    out.push_str(separator);
    out.push_str(sentence);
    out
}
