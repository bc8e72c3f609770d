//! Runs a suite against a scorer, applies fail criteria and aggregates the
//! outcomes per test and per symptom group.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SplitSelector};
use crate::model::{Label, Prediction, Scorer};
use crate::stats::{self, LengthTest, MetricSet};
use crate::suite::{generate_cases, FailCriterion, Polarity, Suite, SymptomGroup, TestCase, TestKind, TestSpec};
use crate::{Error, Result};

/// Default number of texts sent to a scorer per call.
pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

/// Outcome of one case. Skipped cases carry no probabilities or labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestCaseResult {
    pub test_id: String,
    pub kind: TestKind,
    pub sample_id: String,
    pub variant_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_original: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_perturbed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_original: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_perturbed: Option<Label>,
    pub outcome: Outcome,
}

impl TestCaseResult {
    /// Recomputes the outcome from the logged probabilities alone.
    pub fn reevaluate(&self, criterion: &FailCriterion) -> Result<Outcome> {
        match (self.p_original, self.p_perturbed) {
            (Some(a), Some(b)) => Ok(evaluate_criterion(
                criterion,
                &Prediction::new(self.sample_id.as_str(), a)?,
                &Prediction::new(self.sample_id.as_str(), b)?,
            )),
            _ => Ok(Outcome::Skipped),
        }
    }
}

/// Applies a fail criterion to an (original, perturbed) prediction pair.
pub fn evaluate_criterion(criterion: &FailCriterion, orig: &Prediction, pert: &Prediction) -> Outcome {
    let fails = match *criterion {
        FailCriterion::LabelChange => orig.hard_label != pert.hard_label,
        FailCriterion::PredictsDepressed => pert.hard_label == Label::Depressed,
        FailCriterion::PredictsNonDepressed => pert.hard_label == Label::NonDepressed,
        FailCriterion::ConfidenceDropGt(theta) => orig.p_depressed - pert.p_depressed > theta,
        FailCriterion::ConfidenceRiseGt(theta) => pert.p_depressed - orig.p_depressed > theta,
    };
    if fails {
        Outcome::Fail
    } else {
        Outcome::Pass
    }
}

pub fn evaluate_case(spec: &TestSpec, orig: &Prediction, pert: &Prediction) -> Outcome {
    evaluate_criterion(&spec.fail_criterion, orig, pert)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub split: SplitSelector,
    pub batch_size: usize,
    /// Replaces the confidence threshold of every directional criterion.
    pub theta: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            split: SplitSelector::Only(crate::corpus::Split::Test),
            batch_size: DEFAULT_BATCH_SIZE,
            theta: None,
        }
    }
}

/// One row of the report: a test's counts and accuracy rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub test_id: String,
    pub kind: TestKind,
    pub description: String,
    pub symptom_group: SymptomGroup,
    pub polarity: Polarity,
    pub n_generated: usize,
    pub n_skipped: usize,
    pub n_evaluated: usize,
    pub n_failed: usize,
    /// `None` when nothing was evaluated.
    pub accuracy: Option<f64>,
}

impl TestRow {
    pub fn failure_rate(&self) -> Option<f64> {
        self.accuracy.map(|_| self.n_failed as f64 / self.n_evaluated as f64)
    }
}

/// Mean and n-1 standard deviation of a symptom group's accuracy cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAggregate {
    pub group: SymptomGroup,
    pub n_cells: usize,
    pub n_cases: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model_id: String,
    pub corpus: String,
    pub suite_version: String,
    pub split: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// Performance of the unperturbed texts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginalMetrics {
    pub n_samples: usize,
    /// Hard-label metrics; Brier and AUC here are the hard-label variants.
    pub hard: MetricSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brier_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc_prob: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_sensitivity: Option<Vec<LengthTest>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub metadata: RunMetadata,
    pub rows: Vec<TestRow>,
    pub groups: Vec<GroupAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<OriginalMetrics>,
    #[serde(default)]
    pub significance: Significance,
}

impl TestReport {
    pub fn row(&self, test_id: &str) -> Option<&TestRow> {
        self.rows.iter().find(|r| r.test_id == test_id)
    }
}

/// Folds a case log into per-test rows, in suite order. Case order does not
/// matter.
pub fn build_rows(suite: &Suite, results: &[TestCaseResult]) -> Vec<TestRow> {
    let mut counts: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    for r in results {
        let c = counts.entry(r.test_id.as_str()).or_default();
        match r.outcome {
            Outcome::Pass => c[0] += 1,
            Outcome::Fail => c[1] += 1,
            Outcome::Skipped => c[2] += 1,
        }
    }
    suite
        .tests
        .iter()
        .map(|spec| {
            let [pass, fail, skipped] = counts.get(spec.id.as_str()).copied().unwrap_or_default();
            let n_evaluated = pass + fail;
            TestRow {
                test_id: spec.id.clone(),
                kind: spec.kind,
                description: spec.description.clone(),
                symptom_group: spec.symptom_group,
                polarity: spec.polarity,
                n_generated: n_evaluated + skipped,
                n_skipped: skipped,
                n_evaluated,
                n_failed: fail,
                accuracy: (n_evaluated > 0).then(|| pass as f64 / n_evaluated as f64),
            }
        })
        .collect()
}

/// Unweighted mean and n-1 sample standard deviation. The mean needs one
/// cell, the deviation two.
pub fn aggregate_cells(cells: &[f64]) -> (Option<f64>, Option<f64>) {
    if cells.is_empty() {
        return (None, None);
    }
    let n = cells.len() as f64;
    let mean = cells.iter().sum::<f64>() / n;
    let std = (cells.len() >= 2).then(|| {
        let ss: f64 = cells.iter().map(|c| (c - mean) * (c - mean)).sum();
        libm::sqrt(ss / (n - 1.0))
    });
    (Some(mean), std)
}

/// Pools the DIR rows of every report into per-group accuracy cells (one
/// cell per test per report) and aggregates each group.
pub fn aggregate_by_symptom(reports: &[&TestReport]) -> Vec<GroupAggregate> {
    aggregate_rows(reports.iter().flat_map(|r| r.rows.iter()))
}

fn aggregate_rows<'a>(rows: impl Iterator<Item = &'a TestRow>) -> Vec<GroupAggregate> {
    let mut cells: BTreeMap<SymptomGroup, (Vec<f64>, usize)> = BTreeMap::new();
    for row in rows.filter(|r| r.kind == TestKind::Dir) {
        if let Some(acc) = row.accuracy {
            let entry = cells.entry(row.symptom_group).or_default();
            entry.0.push(acc);
            entry.1 += row.n_evaluated;
        }
    }
    SymptomGroup::GROUPS
        .iter()
        .map(|&group| {
            let (values, n_cases) = cells.remove(&group).unwrap_or_default();
            let (mean, std) = aggregate_cells(&values);
            GroupAggregate {
                group,
                n_cells: values.len(),
                n_cases,
                mean,
                std,
            }
        })
        .collect()
}

/// Everything a run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub report: TestReport,
    pub cases: Vec<TestCaseResult>,
    /// Predictions on the unperturbed texts, in corpus order.
    pub originals: Vec<Prediction>,
}

fn score_batched(
    scorer: &mut dyn Scorer,
    items: &[(String, &str)],
    batch_size: usize,
) -> Result<Vec<Prediction>> {
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(batch_size.max(1)) {
        let refs: Vec<(&str, &str)> = chunk.iter().map(|(k, t)| (k.as_str(), *t)).collect();
        let preds = scorer.score(&refs)?;
        if preds.len() != refs.len() {
            return Err(Error::Protocol(format!(
                "{} returned {} predictions for {} texts",
                scorer.model_id(),
                preds.len(),
                refs.len()
            )));
        }
        for (p, (key, _)) in preds.iter().zip(&refs) {
            if p.sample_key != *key {
                return Err(Error::Protocol(format!(
                    "prediction for {:?} arrived where {key:?} was expected",
                    p.sample_key
                )));
            }
        }
        out.extend(preds);
    }
    Ok(out)
}

/// Scores every sample of the selected split once, then every non-vacuous
/// perturbation, and aggregates. Each finished case is handed to `sink` as
/// soon as its test is done, so a scorer failure leaves the completed part
/// of the log behind.
pub fn run_suite(
    suite: &Suite,
    corpus: &Corpus,
    scorer: &mut dyn Scorer,
    options: &RunOptions,
    sink: &mut dyn FnMut(&TestCaseResult) -> Result<()>,
) -> Result<RunOutput> {
    let samples: Vec<_> = corpus.select(options.split).collect();
    let items: Vec<(String, &str)> = samples.iter().map(|s| (s.id.clone(), s.text.as_str())).collect();
    let originals = score_batched(scorer, &items, options.batch_size)?;
    let by_id: BTreeMap<&str, &Prediction> =
        samples.iter().map(|s| s.id.as_str()).zip(originals.iter()).collect();

    let mut cases = Vec::new();
    for spec in &suite.tests {
        let criterion = match options.theta {
            Some(t) => spec.fail_criterion.with_theta(t),
            None => spec.fail_criterion,
        };
        let generated = generate_cases(spec, corpus, options.split);
        let live: Vec<&TestCase> = generated.iter().filter(|c| !c.skipped).collect();
        let items: Vec<(String, &str)> = live
            .iter()
            .map(|c| (format!("{}/{}/{}", c.test_id, c.sample_id, c.variant_index), c.perturbed_text.as_str()))
            .collect();
        let perturbed = score_batched(scorer, &items, options.batch_size)?;
        let mut perturbed = perturbed.into_iter();
        for case in &generated {
            let result = if case.skipped {
                TestCaseResult {
                    test_id: case.test_id.clone(),
                    kind: spec.kind,
                    sample_id: case.sample_id.clone(),
                    variant_index: case.variant_index,
                    p_original: None,
                    p_perturbed: None,
                    label_original: None,
                    label_perturbed: None,
                    outcome: Outcome::Skipped,
                }
            } else {
                let orig = by_id[case.sample_id.as_str()];
                let pert = perturbed.next().expect("one prediction per live case");
                TestCaseResult {
                    test_id: case.test_id.clone(),
                    kind: spec.kind,
                    sample_id: case.sample_id.clone(),
                    variant_index: case.variant_index,
                    p_original: Some(orig.p_depressed),
                    p_perturbed: Some(pert.p_depressed),
                    label_original: Some(orig.hard_label),
                    label_perturbed: Some(pert.hard_label),
                    outcome: evaluate_criterion(&criterion, orig, &pert),
                }
            };
            sink(&result)?;
            cases.push(result);
        }
    }

    let metrics = original_metrics(&samples.iter().map(|s| s.label).collect::<Vec<_>>(), &originals)?;
    let significance = match stats::length_sensitivity(&cases, corpus) {
        Ok(tests) => Significance {
            length_sensitivity: Some(tests),
            note: None,
        },
        Err(e) => Significance {
            length_sensitivity: None,
            note: Some(e.to_string()),
        },
    };
    let rows = build_rows(suite, &cases);
    let groups = aggregate_rows(rows.iter());
    let report = TestReport {
        metadata: RunMetadata {
            model_id: scorer.model_id().to_string(),
            corpus: corpus.name().to_string(),
            suite_version: suite.version.clone(),
            split: options.split.as_str().to_string(),
            seed: None,
            timestamp: None,
            theta: options.theta,
        },
        rows,
        groups,
        metrics,
        significance,
    };
    Ok(RunOutput {
        report,
        cases,
        originals,
    })
}

fn original_metrics(labels: &[Label], preds: &[Prediction]) -> Result<Option<OriginalMetrics>> {
    if labels.is_empty() {
        return Ok(None);
    }
    let y: Vec<bool> = labels.iter().map(|l| l.is_depressed()).collect();
    let hard: Vec<bool> = preds.iter().map(|p| p.hard_label.is_depressed()).collect();
    let probs: Vec<f64> = preds.iter().map(|p| p.p_depressed).collect();
    Ok(Some(OriginalMetrics {
        n_samples: labels.len(),
        hard: stats::compute_metrics(&y, &hard)?,
        brier_prob: Some(stats::brier_score_prob(&y, &probs)?),
        auc_prob: stats::roc_auc_prob(&y, &probs).ok(),
    }))
}

/// McNemar comparison of two case logs over the cases both evaluated,
/// with "pass" as the correctness indicator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseComparison {
    pub n_common: usize,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    /// Cases only the first log passed.
    pub only_a_pass: usize,
    /// Cases only the second log passed.
    pub only_b_pass: usize,
    pub mcnemar: stats::TestStatistic,
    pub stars: String,
}

pub fn compare_case_logs(a: &[TestCaseResult], b: &[TestCaseResult]) -> Result<CaseComparison> {
    let key = |r: &'_ TestCaseResult| -> (String, String, usize) {
        (r.test_id.clone(), r.sample_id.clone(), r.variant_index)
    };
    let evaluated = |log: &[TestCaseResult]| -> Result<BTreeMap<(String, String, usize), bool>> {
        let mut map = BTreeMap::new();
        for r in log.iter().filter(|r| r.outcome != Outcome::Skipped) {
            if map.insert(key(r), r.outcome == Outcome::Pass).is_some() {
                return Err(Error::DuplicateId(format!(
                    "{}/{}/{}",
                    r.test_id, r.sample_id, r.variant_index
                )));
            }
        }
        Ok(map)
    };
    let ma = evaluated(a)?;
    let mb = evaluated(b)?;
    let (mut pa, mut pb) = (Vec::new(), Vec::new());
    for (k, &ok) in &ma {
        if let Some(&other) = mb.get(k) {
            pa.push(ok);
            pb.push(other);
        }
    }
    if pa.is_empty() {
        return Err(Error::InvalidInput("the case logs share no evaluated cases".into()));
    }
    let (only_a_pass, only_b_pass) = stats::discordant_pairs(&pa, &pb)?;
    let mcnemar = stats::mcnemar_counts(only_a_pass, only_b_pass);
    let rate = |v: &[bool]| v.iter().filter(|x| **x).count() as f64 / v.len() as f64;
    Ok(CaseComparison {
        n_common: pa.len(),
        accuracy_a: rate(&pa),
        accuracy_b: rate(&pb),
        only_a_pass,
        only_b_pass,
        stars: stats::stars(mcnemar.p_value).to_string(),
        mcnemar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Sample, Split};
    use crate::model::FnScorer;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn pred(p: f64) -> Prediction {
        Prediction::new("k", p).unwrap()
    }

    #[test]
    fn directional_drop_fails() {
        let c = FailCriterion::ConfidenceDropGt(0.1);
        assert_eq!(evaluate_criterion(&c, &pred(0.7), &pred(0.52)), Outcome::Fail);
        assert_eq!(evaluate_criterion(&c, &pred(0.40), &pred(0.55)), Outcome::Pass);
        assert_eq!(evaluate_criterion(&c, &pred(0.7), &pred(0.65)), Outcome::Pass);
        let r = FailCriterion::ConfidenceRiseGt(0.1);
        assert_eq!(evaluate_criterion(&r, &pred(0.3), &pred(0.5)), Outcome::Fail);
    }

    #[test]
    fn label_criteria() {
        let inv = FailCriterion::LabelChange;
        assert_eq!(evaluate_criterion(&inv, &pred(0.8), &pred(0.9)), Outcome::Pass);
        assert_eq!(evaluate_criterion(&inv, &pred(0.8), &pred(0.5)), Outcome::Fail);
        assert_eq!(
            evaluate_criterion(&FailCriterion::PredictsDepressed, &pred(0.1), &pred(0.6)),
            Outcome::Fail
        );
        assert_eq!(
            evaluate_criterion(&FailCriterion::PredictsNonDepressed, &pred(0.9), &pred(0.5)),
            Outcome::Fail
        );
    }

    #[test]
    fn sui_cells_match_published_aggregates() {
        let (m, s) = aggregate_cells(&[73.02, 77.19, 78.11, 66.11, 61.40, 66.84]);
        assert!((m.unwrap() - 70.445).abs() < 1e-9);
        assert!((s.unwrap() - 6.7).abs() < 0.01);
        let (m, s) = aggregate_cells(&[37.24, 77.19, 46.61, 64.91]);
        assert!((m.unwrap() - 56.4875).abs() < 1e-9);
        assert!((s.unwrap() - 17.96).abs() < 0.01);
        assert_eq!(aggregate_cells(&[5.0, 5.0, 5.0]).1, Some(0.0));
        assert_eq!(aggregate_cells(&[5.0]).1, None);
    }

    fn tiny_corpus() -> Corpus {
        Corpus::new(
            "tiny",
            vec![
                Sample::new("a", "He says he is tired.", Label::Depressed, Split::Test),
                Sample::new("b", "I walked my dog.", Label::NonDepressed, Split::Test),
                Sample::new("c", "Nice weather today.", Label::NonDepressed, Split::Test),
                Sample::new("d", "I feel empty.", Label::Depressed, Split::Train),
            ],
        )
        .unwrap()
    }

    #[test]
    fn constant_scorer_passes_inv_and_scores_originals_once() {
        let suite = Suite::builtin();
        let corpus = tiny_corpus();
        let mut scorer = FnScorer::new("const", |_: &str| 0.3);
        let mut seen = 0;
        let out = run_suite(&suite, &corpus, &mut scorer, &RunOptions::default(), &mut |_| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, out.cases.len());
        assert_eq!(out.originals.len(), 3);
        let t1 = out.report.row("T1").unwrap();
        assert_eq!((t1.n_generated, t1.n_evaluated, t1.accuracy), (3, 1, Some(1.0)));
        assert_eq!(t1.n_skipped, 2);
        let live = out.cases.iter().filter(|c| c.outcome != Outcome::Skipped).count();
        assert_eq!(scorer.calls, 3 + live);
        for row in &out.report.rows {
            if let Some(acc) = row.accuracy {
                assert!((0.0..=1.0).contains(&acc));
                assert!((acc + row.failure_rate().unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_applicable_set_has_undefined_accuracy() {
        let corpus = Corpus::new(
            "nd",
            vec![Sample::new("x", "Nice weather.", Label::NonDepressed, Split::Test)],
        )
        .unwrap();
        let mut scorer = FnScorer::new("const", |_: &str| 0.3);
        let out = run_suite(&Suite::builtin(), &corpus, &mut scorer, &RunOptions::default(), &mut |_| Ok(()))
            .unwrap();
        let t4 = out.report.row("T4").unwrap();
        assert_eq!((t4.n_evaluated, t4.accuracy), (0, None));
    }

    #[test]
    fn sink_error_aborts_with_partial_log() {
        let corpus = tiny_corpus();
        let mut scorer = FnScorer::new("const", |_: &str| 0.3);
        let mut flushed = Vec::new();
        let err = run_suite(&Suite::builtin(), &corpus, &mut scorer, &RunOptions::default(), &mut |r| {
            if flushed.len() == 4 {
                return Err(Error::InvalidInput("stop".into()));
            }
            flushed.push(r.clone());
            Ok(())
        });
        assert!(err.is_err());
        assert_eq!(flushed.len(), 4);
    }

    #[test]
    fn scorer_error_propagates() {
        let corpus = tiny_corpus();
        let mut scorer = crate::model::ReplayScorer::default();
        let err = run_suite(&Suite::builtin(), &corpus, &mut scorer, &RunOptions::default(), &mut |_| Ok(()))
            .unwrap_err();
        assert!(matches!(err, Error::Model { .. }));
    }

    fn score_text(t: &str) -> f64 {
        let h = t.bytes().fold(7u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
        (h % 1000) as f64 / 999.0
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn report_is_invariant_to_case_order(seed in any::<u64>()) {
            let suite = Suite::builtin();
            let corpus = tiny_corpus();
            let mut scorer = FnScorer::new("h", score_text);
            let out = run_suite(&suite, &corpus, &mut scorer, &RunOptions::default(), &mut |_| Ok(())).unwrap();
            let mut shuffled = out.cases.clone();
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(build_rows(&suite, &shuffled), out.report.rows.clone());
        }

        #[test]
        fn logged_probabilities_reproduce_outcomes(theta in 0.0f64..0.5) {
            let suite = Suite::builtin();
            let corpus = tiny_corpus();
            let mut scorer = FnScorer::new("h", score_text);
            let options = RunOptions { theta: Some(theta), ..RunOptions::default() };
            let out = run_suite(&suite, &corpus, &mut scorer, &options, &mut |_| Ok(())).unwrap();
            for case in &out.cases {
                let criterion = suite.get(&case.test_id).unwrap().fail_criterion.with_theta(theta);
                prop_assert_eq!(case.reevaluate(&criterion).unwrap(), case.outcome);
            }
        }
    }
}
