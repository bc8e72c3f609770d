//! Labels, predictions and the scoring interface every classifier backend
//! implements.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binary depression label. `Depressed` is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Depressed,
    NonDepressed,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Depressed => "depressed",
            Label::NonDepressed => "non_depressed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "depressed" => Some(Label::Depressed),
            "non_depressed" => Some(Label::NonDepressed),
            _ => None,
        }
    }

    pub fn is_depressed(self) -> bool {
        self == Label::Depressed
    }
}

/// Hard label for a depressed-class probability. A tie at exactly 0.5 is
/// `NonDepressed`.
pub fn hard_label(p_depressed: f64) -> Label {
    if p_depressed > 0.5 {
        Label::Depressed
    } else {
        Label::NonDepressed
    }
}

/// Classifier output for one text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_key: String,
    pub p_depressed: f64,
    pub hard_label: Label,
}

impl Prediction {
    /// Builds a prediction, rejecting probabilities outside `[0, 1]`.
    pub fn new(sample_key: impl Into<String>, p_depressed: f64) -> Result<Self> {
        let sample_key = sample_key.into();
        if !p_depressed.is_finite() || !(0.0..=1.0).contains(&p_depressed) {
            return Err(Error::Protocol(format!(
                "p_depressed {p_depressed} for {sample_key:?} is outside [0, 1]"
            )));
        }
        Ok(Self {
            hard_label: hard_label(p_depressed),
            sample_key,
            p_depressed,
        })
    }
}

/// Label order every backend must advertise in its handshake.
pub const LABEL_ORDER: [&str; 2] = ["non_depressed", "depressed"];

/// What a backend reports about itself during the handshake.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub name: String,
    pub version: String,
    pub labels: [String; 2],
}

impl ModelDescriptor {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: version.into(),
            labels: [LABEL_ORDER[0].to_string(), LABEL_ORDER[1].to_string()],
        }
    }

    /// Confirms the backend uses the depressed-probability convention.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Protocol("handshake carries an empty model name".into()));
        }
        if self.labels[0] != LABEL_ORDER[0] || self.labels[1] != LABEL_ORDER[1] {
            return Err(Error::Protocol(format!(
                "label order {:?} does not match [\"non_depressed\", \"depressed\"]",
                self.labels
            )));
        }
        Ok(())
    }
}

/// Anything that turns keyed texts into predictions.
///
/// Implementations must return exactly one prediction per input, in input
/// order, with `sample_key` equal to the input key.
pub trait Scorer {
    fn model_id(&self) -> &str;

    fn score(&mut self, items: &[(&str, &str)]) -> Result<Vec<Prediction>>;
}

impl<S: Scorer + ?Sized> Scorer for &mut S {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn score(&mut self, items: &[(&str, &str)]) -> Result<Vec<Prediction>> {
        (**self).score(items)
    }
}

/// Scorer backed by a closure over the text. Counts how many texts it saw.
pub struct FnScorer<F> {
    id: String,
    f: F,
    pub calls: usize,
}

impl<F: FnMut(&str) -> f64> FnScorer<F> {
    pub fn new(id: impl Into<String>, f: F) -> Self {
        Self {
            id: id.into(),
            f,
            calls: 0,
        }
    }
}

impl<F: FnMut(&str) -> f64> Scorer for FnScorer<F> {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn score(&mut self, items: &[(&str, &str)]) -> Result<Vec<Prediction>> {
        items
            .iter()
            .map(|(key, text)| {
                self.calls += 1;
                Prediction::new(*key, (self.f)(text))
            })
            .collect()
    }
}

/// Replays recorded probabilities, keyed by exact text.
#[derive(Clone, Debug, Default)]
pub struct ReplayScorer {
    id: String,
    table: BTreeMap<String, f64>,
}

impl ReplayScorer {
    pub fn new(id: impl Into<String>, table: BTreeMap<String, f64>) -> Self {
        Self {
            id: id.into(),
            table,
        }
    }

    pub fn insert(&mut self, text: impl Into<String>, p: f64) {
        self.table.insert(text.into(), p);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Scorer for ReplayScorer {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn score(&mut self, items: &[(&str, &str)]) -> Result<Vec<Prediction>> {
        items
            .iter()
            .map(|(key, text)| match self.table.get(*text) {
                Some(&p) => Prediction::new(*key, p),
                None => Err(Error::Model {
                    key: key.to_string(),
                    message: "text has no recorded probability".into(),
                }),
            })
            .collect()
    }
}
