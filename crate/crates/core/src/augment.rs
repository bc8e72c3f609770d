//! Training-data augmentation with the sentences of poorly handled
//! directional tests, and the before/after out-of-distribution comparison.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AugmentTag, Corpus, Sample, Split};
use crate::model::Label;
use crate::runner::TestReport;
use crate::stats::{self, MetricSet, TestStatistic};
use crate::suite::{Polarity, Suite, TestKind, APPEND_SEPARATOR};
use crate::textops::append_sentence;
use crate::{Error, Result};

/// Orders ids like `T2 < T10`: alphabetic prefix, then numeric suffix.
fn natural_key(id: &str) -> (String, u64, String) {
    let digits_at = id.find(|c: char| c.is_ascii_digit()).unwrap_or(id.len());
    let (prefix, rest) = id.split_at(digits_at);
    let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    let number = rest[..end].parse().unwrap_or(u64::MAX);
    (prefix.to_string(), number, rest[end..].to_string())
}

/// Ids whose accuracy is strictly below the unweighted mean of all given
/// accuracies, in natural id order.
pub fn select_below_mean(cells: &[(String, f64)]) -> Result<Vec<String>> {
    if cells.is_empty() {
        return Err(Error::InvalidInput("no DIR accuracies to select from".into()));
    }
    let mut values: Vec<f64> = cells.iter().map(|(_, a)| *a).collect();
    // sorted summation keeps the mean independent of row order
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut picked: Vec<String> = cells
        .iter()
        .filter(|(_, a)| *a < mean)
        .map(|(id, _)| id.clone())
        .collect();
    picked.sort_by_key(|id| natural_key(id));
    Ok(picked)
}

/// DIR tests of a report whose accuracy is strictly below the mean DIR
/// accuracy. Rows without evaluated cases are ignored.
pub fn select_worst_dir_tests(report: &TestReport) -> Result<Vec<String>> {
    let cells: Vec<(String, f64)> = report
        .rows
        .iter()
        .filter(|r| r.kind == TestKind::Dir)
        .filter_map(|r| r.accuracy.map(|a| (r.test_id.clone(), a)))
        .collect();
    if cells.is_empty() {
        return Err(Error::InvalidInput(
            "report has no DIR rows with evaluated cases".into(),
        ));
    }
    select_below_mean(&cells)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentPolicy {
    /// Presence sentences go to depressed samples, absence sentences to
    /// non-depressed ones.
    LabelConsistent,
    /// Every sample draws from the whole pool regardless of polarity.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub test_id: String,
    pub polarity: Polarity,
    pub sentence: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub selected_test_ids: Vec<String>,
    pub pool: Vec<PoolEntry>,
    pub policy: AssignmentPolicy,
    pub seed: u64,
}

impl AugmentationPlan {
    /// Collects the sentences of the selected DIR tests in suite order.
    pub fn new(suite: &Suite, selected: &[String], policy: AssignmentPolicy, seed: u64) -> Result<Self> {
        let wanted: BTreeSet<&str> = selected.iter().map(String::as_str).collect();
        for id in &wanted {
            match suite.get(id) {
                None => return Err(Error::InvalidInput(format!("selected test {id} is not in the suite"))),
                Some(spec) if spec.kind != TestKind::Dir => {
                    return Err(Error::InvalidInput(format!("selected test {id} is not a DIR test")))
                }
                Some(_) => {}
            }
        }
        let mut pool = Vec::new();
        let mut ids = Vec::new();
        for spec in suite.tests.iter().filter(|s| wanted.contains(s.id.as_str())) {
            ids.push(spec.id.clone());
            for sentence in spec.sentences() {
                pool.push(PoolEntry {
                    test_id: spec.id.clone(),
                    polarity: spec.polarity,
                    sentence: sentence.clone(),
                });
            }
        }
        let plan = Self {
            selected_test_ids: ids,
            pool,
            policy,
            seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool.is_empty() {
            return Err(Error::InvalidInput("augmentation pool is empty".into()));
        }
        if let Some(e) = self.pool.iter().find(|e| e.polarity == Polarity::None) {
            return Err(Error::InvalidInput(format!(
                "pool entry from {} has no polarity",
                e.test_id
            )));
        }
        Ok(())
    }
}

fn shuffled<'a>(entries: impl Iterator<Item = &'a PoolEntry>, rng: &mut ChaCha8Rng) -> Vec<&'a PoolEntry> {
    let mut v: Vec<&PoolEntry> = entries.collect();
    for i in (1..v.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
    v
}

/// Appends one pool sentence to every train and dev sample, round-robin
/// over a seeded shuffle of the pool. Test samples, ids and counts are
/// unchanged.
pub fn build_augmented_corpus(corpus: &Corpus, plan: &AugmentationPlan) -> Result<Corpus> {
    plan.validate()?;
    for split in [Split::Train, Split::Dev] {
        if !corpus.samples().iter().any(|s| s.split == split) {
            return Err(Error::InvalidInput(format!(
                "corpus {:?} has no {} samples to augment",
                corpus.name(),
                split.as_str()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let (presence, absence, uniform) = match plan.policy {
        AssignmentPolicy::LabelConsistent => (
            shuffled(plan.pool.iter().filter(|e| e.polarity == Polarity::Presence), &mut rng),
            shuffled(plan.pool.iter().filter(|e| e.polarity == Polarity::Absence), &mut rng),
            Vec::new(),
        ),
        AssignmentPolicy::Uniform => (Vec::new(), Vec::new(), shuffled(plan.pool.iter(), &mut rng)),
    };
    let targets = |s: &Sample| s.split != Split::Test;
    if plan.policy == AssignmentPolicy::LabelConsistent {
        let mut gaps = Vec::new();
        let has = |label: Label| corpus.samples().iter().any(|s| targets(s) && s.label == label);
        if has(Label::Depressed) && presence.is_empty() {
            gaps.push("depressed samples need presence sentences");
        }
        if has(Label::NonDepressed) && absence.is_empty() {
            gaps.push("non-depressed samples need absence sentences");
        }
        if !gaps.is_empty() {
            return Err(Error::InvalidInput(format!(
                "augmentation pool lacks a polarity: {}",
                gaps.join("; ")
            )));
        }
    }
    let mut next = [0usize; 3];
    let samples = corpus
        .samples()
        .iter()
        .map(|s| {
            if !targets(s) {
                return s.clone();
            }
            let (queue, slot) = match (plan.policy, s.label) {
                (AssignmentPolicy::Uniform, _) => (&uniform, 2),
                (_, Label::Depressed) => (&presence, 0),
                (_, Label::NonDepressed) => (&absence, 1),
            };
            let entry = queue[next[slot] % queue.len()];
            next[slot] += 1;
            Sample {
                text: append_sentence(&s.text, &entry.sentence, APPEND_SEPARATOR),
                augmented: Some(AugmentTag {
                    test_id: entry.test_id.clone(),
                    sentence: entry.sentence.clone(),
                }),
                ..s.clone()
            }
        })
        .collect();
    let provenance = format!(
        "{}{}augmented with {} (policy {:?}, seed {})",
        corpus.provenance,
        if corpus.provenance.is_empty() { "" } else { "; " },
        plan.selected_test_ids.join(","),
        plan.policy,
        plan.seed
    );
    Ok(Corpus::new(corpus.name(), samples)?.with_provenance(provenance))
}

/// One scored sample of an evaluation split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: String,
    pub label: Label,
    pub p_depressed: f64,
}

impl EvalRecord {
    pub fn predicted_depressed(&self) -> bool {
        crate::model::hard_label(self.p_depressed).is_depressed()
    }

    pub fn correct(&self) -> bool {
        self.predicted_depressed() == self.label.is_depressed()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodComparison {
    pub n: usize,
    pub before: MetricSet,
    pub after: MetricSet,
    /// F1 after minus F1 before, in percentage points.
    pub f1_delta_pp: f64,
    /// Samples only the earlier model got right.
    pub only_before_correct: usize,
    /// Samples only the later model got right.
    pub only_after_correct: usize,
    pub mcnemar: TestStatistic,
    pub stars: String,
}

fn index_records(records: &[EvalRecord], which: &str) -> Result<BTreeMap<String, EvalRecord>> {
    let mut map = BTreeMap::new();
    for r in records {
        if map.insert(r.sample_id.clone(), r.clone()).is_some() {
            return Err(Error::DuplicateId(format!("{} (in the {which} evaluation)", r.sample_id)));
        }
    }
    Ok(map)
}

/// Compares two evaluations of the same split: hard-label metrics, the F1
/// delta and McNemar significance over per-sample correctness.
pub fn compare_ood(before: &[EvalRecord], after: &[EvalRecord]) -> Result<OodComparison> {
    let a = index_records(before, "before")?;
    let b = index_records(after, "after")?;
    let only_a: Vec<&String> = a.keys().filter(|k| !b.contains_key(*k)).collect();
    let only_b: Vec<&String> = b.keys().filter(|k| !a.contains_key(*k)).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Error::InvalidInput(format!(
            "evaluations cover different samples: {} only before, {} only after (first: {:?})",
            only_a.len(),
            only_b.len(),
            only_a.first().or(only_b.first())
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("evaluations are empty".into()));
    }
    let mut labels = Vec::with_capacity(a.len());
    let (mut pred_a, mut pred_b) = (Vec::new(), Vec::new());
    let (mut ok_a, mut ok_b) = (Vec::new(), Vec::new());
    for (id, ra) in &a {
        let rb = &b[id];
        if ra.label != rb.label {
            return Err(Error::InvalidInput(format!("sample {id} carries different labels")));
        }
        labels.push(ra.label.is_depressed());
        pred_a.push(ra.predicted_depressed());
        pred_b.push(rb.predicted_depressed());
        ok_a.push(ra.correct());
        ok_b.push(rb.correct());
    }
    let before = stats::compute_metrics(&labels, &pred_a)?;
    let after = stats::compute_metrics(&labels, &pred_b)?;
    let (only_before_correct, only_after_correct) = stats::discordant_pairs(&ok_a, &ok_b)?;
    let mcnemar = stats::mcnemar_counts(only_before_correct, only_after_correct);
    Ok(OodComparison {
        n: labels.len(),
        f1_delta_pp: (after.f1 - before.f1) * 100.0,
        before,
        after,
        only_before_correct,
        only_after_correct,
        stars: stats::stars(mcnemar.p_value).to_string(),
        mcnemar,
    })
}
