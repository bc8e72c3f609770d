//! Declarative test definitions, case generation, and vetting of
//! directional sentences.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SplitSelector};
use crate::model::{Label, Scorer};
use crate::textops::{append_sentence, rewrite, words, PronounMap};
use crate::{Error, Result};

/// Default confidence-shift threshold for directional tests.
pub const DEFAULT_THETA: f64 = 0.1;

/// Separator placed between an original text and an appended sentence.
pub const APPEND_SEPARATOR: &str = " ";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "INV")]
    Inv,
    #[serde(rename = "MFT")]
    Mft,
    #[serde(rename = "DIR")]
    Dir,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Inv => "INV",
            TestKind::Mft => "MFT",
            TestKind::Dir => "DIR",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Applicability {
    All,
    DepressedOnly,
    NonDepressedOnly,
}

impl Applicability {
    pub fn admits(self, label: Label) -> bool {
        match self {
            Applicability::All => true,
            Applicability::DepressedOnly => label == Label::Depressed,
            Applicability::NonDepressedOnly => label == Label::NonDepressed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailCriterion {
    LabelChange,
    PredictsDepressed,
    PredictsNonDepressed,
    ConfidenceDropGt(f64),
    ConfidenceRiseGt(f64),
}

impl FailCriterion {
    pub fn describe(&self) -> String {
        match self {
            FailCriterion::LabelChange => "Fails if prediction label changes".into(),
            FailCriterion::PredictsDepressed => "Fails if the model predicts the depressed class".into(),
            FailCriterion::PredictsNonDepressed => {
                "Fails if the model predicts a non-depressed class".into()
            }
            FailCriterion::ConfidenceDropGt(t) => {
                format!("Fails if prediction confidence goes down by >{t}")
            }
            FailCriterion::ConfidenceRiseGt(t) => {
                format!("Fails if prediction confidence goes up by >{t}")
            }
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match self {
            FailCriterion::ConfidenceDropGt(t) | FailCriterion::ConfidenceRiseGt(t) => Some(*t),
            _ => None,
        }
    }

    /// Same criterion with its confidence threshold replaced. Label-based
    /// criteria are returned unchanged.
    pub fn with_theta(self, theta: f64) -> Self {
        match self {
            FailCriterion::ConfidenceDropGt(_) => FailCriterion::ConfidenceDropGt(theta),
            FailCriterion::ConfidenceRiseGt(_) => FailCriterion::ConfidenceRiseGt(theta),
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymptomGroup {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "COG")]
    Cog,
    #[serde(rename = "SOM")]
    Som,
    #[serde(rename = "SUI")]
    Sui,
}

impl SymptomGroup {
    pub const GROUPS: [SymptomGroup; 3] = [SymptomGroup::Cog, SymptomGroup::Som, SymptomGroup::Sui];

    pub fn as_str(self) -> &'static str {
        match self {
            SymptomGroup::None => "none",
            SymptomGroup::Cog => "COG",
            SymptomGroup::Som => "SOM",
            SymptomGroup::Sui => "SUI",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    None,
    Presence,
    Absence,
}

/// The perturbation a test applies.
#[derive(Clone, Debug, PartialEq)]
pub enum Transform {
    PronounMap(PronounMap),
    Sentences(Vec<String>),
}

impl Transform {
    pub fn variants(&self) -> usize {
        match self {
            Transform::PronounMap(_) => 1,
            Transform::Sentences(s) => s.len(),
        }
    }
}

/// Reference to a pronoun map in a suite file: a builtin name or an inline
/// map object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapRef {
    Named(String),
    Inline(serde_json::Map<String, serde_json::Value>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformDef {
    PronounMap(MapRef),
    Sentences(Vec<String>),
}

/// Serialized form of a test, as it appears in suite files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpecDef {
    pub id: String,
    pub kind: TestKind,
    #[serde(default)]
    pub description: String,
    pub applicability: Applicability,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires_any: Vec<String>,
    pub transform: TransformDef,
    pub fail_criterion: FailCriterion,
    pub symptom_group: SymptomGroup,
    pub polarity: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phq9_item: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteDef {
    pub version: String,
    pub tests: Vec<TestSpecDef>,
}

/// A validated test definition.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSpec {
    pub id: String,
    pub kind: TestKind,
    pub description: String,
    pub applicability: Applicability,
    /// When non-empty, a sample applies only if it contains one of these
    /// words (case-insensitive).
    pub requires_any: Vec<String>,
    pub transform: Transform,
    pub fail_criterion: FailCriterion,
    pub symptom_group: SymptomGroup,
    pub polarity: Polarity,
    pub phq9_item: Option<u8>,
}

impl TestSpec {
    /// Resolves map references with `resolve` and checks the spec's
    /// invariants.
    pub fn from_def(
        def: TestSpecDef,
        resolve: &mut dyn FnMut(&MapRef) -> Result<PronounMap>,
    ) -> Result<Self> {
        let transform = match &def.transform {
            TransformDef::PronounMap(r) => Transform::PronounMap(resolve(r)?),
            TransformDef::Sentences(s) => Transform::Sentences(s.clone()),
        };
        let spec = Self {
            id: def.id,
            kind: def.kind,
            description: def.description,
            applicability: def.applicability,
            requires_any: def.requires_any.iter().map(|w| w.to_lowercase()).collect(),
            transform,
            fail_criterion: def.fail_criterion,
            symptom_group: def.symptom_group,
            polarity: def.polarity,
            phq9_item: def.phq9_item,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_def(&self) -> TestSpecDef {
        let transform = match &self.transform {
            Transform::PronounMap(m) if m.is_builtin() => {
                TransformDef::PronounMap(MapRef::Named(m.name().to_string()))
            }
            Transform::PronounMap(m) => {
                let value: serde_json::Value =
                    serde_json::from_str(&m.to_json()).expect("map json round-trips");
                match value {
                    serde_json::Value::Object(mut o) => {
                        o.insert("name".into(), serde_json::Value::String(m.name().to_string()));
                        TransformDef::PronounMap(MapRef::Inline(o))
                    }
                    _ => unreachable!("maps serialize as objects"),
                }
            }
            Transform::Sentences(s) => TransformDef::Sentences(s.clone()),
        };
        TestSpecDef {
            id: self.id.clone(),
            kind: self.kind,
            description: self.description.clone(),
            applicability: self.applicability,
            requires_any: self.requires_any.clone(),
            transform,
            fail_criterion: self.fail_criterion,
            symptom_group: self.symptom_group,
            polarity: self.polarity,
            phq9_item: self.phq9_item,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidSpec {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        if let Some(item) = self.phq9_item {
            if !(1..=9).contains(&item) {
                return Err(bad("phq9_item must be between 1 and 9"));
            }
        }
        if let Some(theta) = self.fail_criterion.theta() {
            if !theta.is_finite() || !(0.0..1.0).contains(&theta) {
                return Err(bad("confidence threshold must lie in [0, 1)"));
            }
        }
        match self.kind {
            TestKind::Dir => {
                if self.symptom_group == SymptomGroup::None {
                    return Err(bad("DIR test needs a symptom group"));
                }
                match (self.polarity, self.fail_criterion) {
                    (Polarity::None, _) => return Err(bad("DIR test needs a polarity")),
                    (Polarity::Presence, FailCriterion::ConfidenceDropGt(_))
                    | (Polarity::Absence, FailCriterion::ConfidenceRiseGt(_)) => {}
                    (Polarity::Presence, _) => {
                        return Err(bad("presence test must fail on a confidence drop"))
                    }
                    (Polarity::Absence, _) => {
                        return Err(bad("absence test must fail on a confidence rise"))
                    }
                }
                match &self.transform {
                    Transform::Sentences(s) if !s.is_empty() => {
                        if s.iter().any(|x| x.trim().is_empty()) {
                            return Err(bad("DIR sentences must be non-empty"));
                        }
                    }
                    _ => return Err(bad("DIR test needs a non-empty sentence list")),
                }
            }
            TestKind::Inv | TestKind::Mft => {
                if !matches!(self.transform, Transform::PronounMap(_)) {
                    return Err(bad("INV/MFT tests rewrite with a pronoun map"));
                }
                if self.symptom_group != SymptomGroup::None || self.polarity != Polarity::None {
                    return Err(bad("only DIR tests carry a symptom group or polarity"));
                }
                match (self.kind, self.fail_criterion, self.applicability) {
                    (TestKind::Inv, FailCriterion::LabelChange, _) => {}
                    (TestKind::Inv, _, _) => return Err(bad("INV test must fail on label change")),
                    (TestKind::Mft, FailCriterion::PredictsDepressed, Applicability::NonDepressedOnly)
                    | (TestKind::Mft, FailCriterion::PredictsNonDepressed, Applicability::DepressedOnly) => {}
                    (TestKind::Mft, _, _) => {
                        return Err(bad(
                            "MFT test must pair predicts_depressed with non_depressed_only or predicts_non_depressed with depressed_only",
                        ))
                    }
                    (TestKind::Dir, _, _) => unreachable!(),
                }
            }
        }
        Ok(())
    }

    pub fn sentences(&self) -> &[String] {
        match &self.transform {
            Transform::Sentences(s) => s,
            Transform::PronounMap(_) => &[],
        }
    }

    pub fn applies_to(&self, label: Label, text: &str) -> bool {
        self.applicability.admits(label)
            && (self.requires_any.is_empty() || words(text).any(|w| self.requires_any.contains(&w)))
    }
}

/// A versioned, validated list of tests with unique ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Suite {
    pub version: String,
    pub tests: Vec<TestSpec>,
}

/// Resolves only builtin map names; inline maps are parsed in place.
pub fn resolve_builtin(r: &MapRef) -> Result<PronounMap> {
    match r {
        MapRef::Named(name) => PronounMap::builtin(name).ok_or_else(|| Error::InvalidMap {
            name: name.clone(),
            reason: "no builtin map with this name".into(),
        }),
        MapRef::Inline(obj) => {
            let name = obj
                .get("name")
                .and_then(|v| v.as_str())
                .unwrap_or("inline")
                .to_string();
            let mut obj = obj.clone();
            obj.remove("name");
            let json = serde_json::to_string(&obj).map_err(|e| Error::Schema(e.to_string()))?;
            PronounMap::from_json(name, &json)
        }
    }
}

impl Suite {
    pub fn from_def(
        def: SuiteDef,
        resolve: &mut dyn FnMut(&MapRef) -> Result<PronounMap>,
    ) -> Result<Self> {
        let mut tests = Vec::with_capacity(def.tests.len());
        let mut ids = BTreeSet::new();
        for t in def.tests {
            if !ids.insert(t.id.clone()) {
                return Err(Error::InvalidSpec {
                    id: t.id,
                    reason: "duplicate test id".into(),
                });
            }
            tests.push(TestSpec::from_def(t, resolve)?);
        }
        Ok(Self {
            version: def.version,
            tests,
        })
    }

    /// Parses a JSON suite whose pronoun maps are builtin names or inline.
    pub fn from_json(json: &str) -> Result<Self> {
        let def: SuiteDef = serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_def(def, &mut resolve_builtin)
    }

    /// The 23 DECK tests.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_SUITE_JSON).expect("builtin suite is valid")
    }

    pub fn to_def(&self) -> SuiteDef {
        SuiteDef {
            version: self.version.clone(),
            tests: self.tests.iter().map(TestSpec::to_def).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&TestSpec> {
        self.tests.iter().find(|t| t.id == id)
    }

    pub fn count(&self, kind: TestKind) -> usize {
        self.tests.iter().filter(|t| t.kind == kind).count()
    }
}

/// Source text of the builtin suite.
pub const BUILTIN_SUITE_JSON: &str = include_str!("../data/deck23.json");

/// One concrete perturbation of one sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub test_id: String,
    pub sample_id: String,
    pub variant_index: usize,
    pub original_text: String,
    pub perturbed_text: String,
    /// The perturbation left the text unchanged.
    pub skipped: bool,
}

/// Applies a test to every applicable sample of the selected split, in
/// corpus order. Directional tests yield one case per sentence.
pub fn generate_cases(spec: &TestSpec, corpus: &Corpus, split: SplitSelector) -> Vec<TestCase> {
    let mut cases = Vec::new();
    for sample in corpus.select(split) {
        if !spec.applies_to(sample.label, &sample.text) {
            continue;
        }
        match &spec.transform {
            Transform::PronounMap(map) => {
                let perturbed = rewrite(&sample.text, map).text;
                cases.push(TestCase {
                    test_id: spec.id.clone(),
                    sample_id: sample.id.clone(),
                    variant_index: 0,
                    skipped: perturbed == sample.text,
                    original_text: sample.text.clone(),
                    perturbed_text: perturbed,
                });
            }
            Transform::Sentences(sentences) => {
                for (variant_index, sentence) in sentences.iter().enumerate() {
                    let perturbed = append_sentence(&sample.text, sentence, APPEND_SEPARATOR);
                    cases.push(TestCase {
                        test_id: spec.id.clone(),
                        sample_id: sample.id.clone(),
                        variant_index,
                        skipped: perturbed == sample.text,
                        original_text: sample.text.clone(),
                        perturbed_text: perturbed,
                    });
                }
            }
        }
    }
    cases
}

/// Per-sentence outcome of vetting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceVetting {
    pub sentence: String,
    /// One depressed-class probability per model, in model order.
    pub probabilities: Vec<f64>,
    pub depressed_votes: usize,
    pub median: f64,
    pub kept: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vetting {
    pub kept: Vec<String>,
    pub report: Vec<SentenceVetting>,
}

/// Minimum number of models for sentence vetting.
pub const MIN_VETTING_MODELS: usize = 3;

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Keeps a sentence when a strict majority of the models label it depressed
/// and the median depressed probability across models exceeds 0.5.
pub fn vet_dir_sentences(sentences: &[String], models: &mut [&mut dyn Scorer]) -> Result<Vetting> {
    if models.len() < MIN_VETTING_MODELS {
        return Err(Error::InvalidInput(format!(
            "vetting needs at least {MIN_VETTING_MODELS} models, got {}",
            models.len()
        )));
    }
    let mut per_model = Vec::with_capacity(models.len());
    for model in models.iter_mut() {
        let mut preds = Vec::with_capacity(sentences.len());
        for (i, sentence) in sentences.iter().enumerate() {
            let key = format!("vet/{i}");
            let mut p = model.score(&[(key.as_str(), sentence.as_str())]).map_err(|e| Error::Model {
                key: sentence.clone(),
                message: format!("{} failed during vetting: {e}", model.model_id()),
            })?;
            if p.len() != 1 {
                return Err(Error::Protocol(format!(
                    "{} returned {} predictions for one sentence",
                    model.model_id(),
                    p.len()
                )));
            }
            preds.push(p.remove(0));
        }
        per_model.push(preds);
    }
    let mut kept = Vec::new();
    let mut report = Vec::with_capacity(sentences.len());
    for (i, sentence) in sentences.iter().enumerate() {
        let probabilities: Vec<f64> = per_model.iter().map(|p| p[i].p_depressed).collect();
        let depressed_votes = per_model
            .iter()
            .filter(|p| p[i].hard_label == Label::Depressed)
            .count();
        let median = median(&probabilities);
        let keep = 2 * depressed_votes > models.len() && median > 0.5;
        if keep {
            kept.push(sentence.clone());
        }
        report.push(SentenceVetting {
            sentence: sentence.clone(),
            probabilities,
            depressed_votes,
            median,
            kept: keep,
        });
    }
    Ok(Vetting { kept, report })
}

/// Vets the sentences of every presence-polarity DIR test and drops tests
/// whose sentence pool empties. Other tests pass through unchanged.
pub fn vet_suite(suite: &Suite, models: &mut [&mut dyn Scorer]) -> Result<(Suite, Vec<(String, Vetting)>)> {
    let mut tests = Vec::with_capacity(suite.tests.len());
    let mut reports = Vec::new();
    for spec in &suite.tests {
        if spec.kind != TestKind::Dir || spec.polarity != Polarity::Presence {
            tests.push(spec.clone());
            continue;
        }
        let vetting = vet_dir_sentences(spec.sentences(), models)?;
        if !vetting.kept.is_empty() {
            let mut kept = spec.clone();
            kept.transform = Transform::Sentences(vetting.kept.clone());
            tests.push(kept);
        }
        reports.push((spec.id.clone(), vetting));
    }
    Ok((
        Suite {
            version: suite.version.clone(),
            tests,
        },
        reports,
    ))
}
