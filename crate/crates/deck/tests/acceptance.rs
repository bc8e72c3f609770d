//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances and time budgets are constants below.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deck::adapter::{AdapterOptions, ModelHandle};
use deck::corpus_io::{load_corpus, write_corpus_jsonl, CorpusFormat};
use deck::report::group_cell;
use deck_core::augment::{
    build_augmented_corpus, compare_ood, select_below_mean, select_worst_dir_tests, AssignmentPolicy,
    AugmentationPlan, EvalRecord,
};
use deck_core::baseline::{train_baseline, BaselineConfig, BaselineModel};
use deck_core::corpus::{Corpus, Split};
use deck_core::model::{Label, Prediction};
use deck_core::runner::{
    aggregate_by_symptom, evaluate_criterion, run_suite, Outcome, RunMetadata, RunOptions, Significance, TestReport,
    TestRow,
};
use deck_core::shift::{shift_matrix, sliced_w1, w1_1d, EmbeddingSet};
use deck_core::stats::{compute_metrics, mann_whitney_u_exact, mcnemar_counts, u_statistics, Confusion};
use deck_core::suite::{FailCriterion, Suite, SymptomGroup, TestKind};
use deck_core::synth::{shifted_corpus, template_corpus};
use deck_core::textops::{apply_pronoun_map, tokenize, PronounMap};

/// Group means are printed to two decimals.
const MEAN_TOL_PP: f64 = 0.005 + 1e-9;
/// Group deviations are printed to one decimal, truncated rather than rounded.
const STD_TOL_PP: f64 = 0.1;
/// Replayed per-test accuracies against the reference column.
const REPLAY_TOL_PP: f64 = 0.01;
const MWU_TOL: f64 = 1e-12;
const W1_TOL: f64 = 1e-9;
const MIN_HELD_OUT_ACCURACY: f64 = 0.9;

const BUDGET_AGGREGATION: Duration = Duration::from_secs(1);
const BUDGET_SELECTION: Duration = Duration::from_secs(1);
const BUDGET_METRICS: Duration = Duration::from_secs(5);
const BUDGET_STATS: Duration = Duration::from_secs(30);
const BUDGET_END_TO_END: Duration = Duration::from_secs(60);

/// Reference accuracies (percent) for T7..T23. Columns: BERT-SD, BERT-PHM,
/// ALBERT-SD, ALBERT-PHM, RoBERTa-SD, RoBERTa-PHM, RoBERTa-DAIC.
const GRID: [[f64; 7]; 17] = [
    [65.91, 71.93, 57.71, 73.68, 65.23, 71.93, 77.65],
    [36.23, 73.68, 66.40, 71.93, 75.44, 71.93, 99.99],
    [87.96, 64.91, 67.57, 64.91, 77.50, 61.40, 78.02],
    [61.31, 73.68, 60.74, 73.68, 67.37, 71.93, 81.65],
    [78.31, 77.19, 65.87, 80.70, 69.79, 77.19, 77.80],
    [80.98, 71.93, 66.64, 73.68, 67.08, 70.18, 77.86],
    [37.48, 73.68, 67.41, 68.42, 80.09, 71.93, 99.94],
    [77.87, 64.91, 62.64, 64.91, 69.95, 61.40, 77.99],
    [35.46, 73.68, 68.01, 73.68, 74.64, 71.93, 99.99],
    [88.37, 64.91, 67.57, 63.16, 74.96, 59.65, 78.06],
    [39.90, 73.68, 63.69, 73.68, 70.60, 71.93, 99.96],
    [86.83, 73.68, 49.92, 75.44, 77.18, 71.93, 78.14],
    [50.36, 64.91, 71.93, 61.40, 72.37, 61.40, 99.97],
    [77.34, 77.19, 58.76, 78.95, 65.35, 75.44, 82.81],
    [62.84, 73.68, 71.45, 73.68, 72.62, 71.93, 0.97],
    [37.24, 77.19, 60.90, 78.95, 73.02, 77.19, 78.11],
    [46.61, 64.91, 64.14, 59.65, 66.11, 61.40, 66.84],
];

const ROB_SD: usize = 4;
const ROB_PHM: usize = 5;

fn test_id(row: usize) -> String {
    format!("T{}", row + 7)
}

type Check = fn() -> Result<String, String>;

/// (model, report columns, [(group, printed mean, printed std)])
type PrintedCells = (&'static str, [usize; 2], [(SymptomGroup, f64, f64); 3]);

/// (name, tp, fn, fp, tn, accuracy, brier, auc)
type ConfusionFixture = (&'static str, usize, usize, usize, usize, &'static str, &'static str, Option<&'static str>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent <= budget, || format!("took {spent:?}, budget {budget:?}"))
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("symptom-group aggregation matches the reference table", aggregation_parity),
        ("worst-test selection matches the reference selection", selection_parity),
        ("hard-label metric identities and reference confusion matrices", metric_parity),
        ("fail criteria and replayed accuracies", criterion_replay),
        ("pronoun rewriter golden corpus and tokenizer reconstruction", rewriter_golden),
        ("exact Mann-Whitney and McNemar against brute-force oracles", stats_oracles),
        ("Wasserstein metric axioms, bounds and planted ordering", wasserstein_checks),
        ("train, test, augment, retrain on synthetic data", end_to_end),
        ("repeated CLI runs produce byte-identical reports", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({elapsed:.2?}; {detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name} ({elapsed:.2?}): {why}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn grid_report(column: usize, rows: &[usize]) -> TestReport {
    let suite = Suite::builtin();
    let rows = rows
        .iter()
        .map(|&r| {
            let spec = suite.get(&test_id(r)).expect("builtin DIR test");
            TestRow {
                test_id: spec.id.clone(),
                kind: spec.kind,
                description: spec.description.clone(),
                symptom_group: spec.symptom_group,
                polarity: spec.polarity,
                n_generated: 100,
                n_skipped: 0,
                n_evaluated: 100,
                n_failed: 0,
                accuracy: Some(GRID[r][column] / 100.0),
            }
        })
        .collect();
    TestReport {
        metadata: RunMetadata::default(),
        rows,
        groups: Vec::new(),
        metrics: None,
        significance: Significance::default(),
    }
}

fn aggregation_parity() -> Result<String, String> {
    let start = Instant::now();
    let suite = Suite::builtin();
    let expected_groups: [(SymptomGroup, &[usize]); 3] = [
        (SymptomGroup::Cog, &[7, 8, 9, 10, 16, 17, 18, 19]),
        (SymptomGroup::Som, &[11, 12, 13, 14, 15, 20, 21]),
        (SymptomGroup::Sui, &[22, 23]),
    ];
    for (group, ids) in expected_groups {
        for id in ids {
            let spec = suite.get(&format!("T{id}")).unwrap();
            ensure(spec.symptom_group == group && spec.kind == TestKind::Dir, || {
                format!("T{id} should be a {} DIR test", group.as_str())
            })?;
        }
    }
    let printed: [PrintedCells; 3] = [
        ("BERT", [0, 1], [(SymptomGroup::Cog, 67.39, 15.3), (SymptomGroup::Som, 68.75, 14.6), (SymptomGroup::Sui, 56.49, 17.9)]),
        ("ALBERT", [2, 3], [(SymptomGroup::Cog, 66.46, 6.9), (SymptomGroup::Som, 69.63, 6.1), (SymptomGroup::Sui, 65.91, 8.9)]),
        ("RoBERTa", [4, 5], [(SymptomGroup::Cog, 75.67, 11.0), (SymptomGroup::Som, 72.23, 18.9), (SymptomGroup::Sui, 70.45, 6.7)]),
    ];
    let all: Vec<usize> = (0..17).collect();
    for (model, columns, cells) in printed {
        let mut reports: Vec<TestReport> = columns.iter().map(|&c| grid_report(c, &all)).collect();
        if model == "RoBERTa" {
            reports.push(grid_report(6, &all));
        }
        let refs: Vec<&TestReport> = reports.iter().collect();
        let groups = aggregate_by_symptom(&refs);
        for (group, mean, std) in cells {
            let g = groups.iter().find(|g| g.group == group).unwrap();
            let got_mean = g.mean.unwrap() * 100.0;
            let got_std = g.std.unwrap() * 100.0;
            ensure((got_mean - mean).abs() <= MEAN_TOL_PP, || {
                format!("{model} {} mean {got_mean:.4} vs {mean}", group.as_str())
            })?;
            ensure((got_std - std).abs() <= STD_TOL_PP, || {
                format!("{model} {} std {got_std:.4} vs {std}", group.as_str())
            })?;
        }
    }
    // the two cells quoted in the text must match their printed form
    let sui = |columns: &[usize]| {
        let reports: Vec<TestReport> = columns.iter().map(|&c| grid_report(c, &all)).collect();
        let groups = aggregate_by_symptom(&reports.iter().collect::<Vec<_>>());
        group_cell(groups.iter().find(|g| g.group == SymptomGroup::Sui).unwrap())
    };
    for (name, columns, printed) in [("RoBERTa", &[4, 5, 6][..], "70.45% (6.7%)"), ("BERT", &[0, 1][..], "56.49% (17.9%)")] {
        let got = sui(columns);
        ensure(got == printed, || format!("{name} SUI renders as {got}, want {printed}"))?;
    }
    within_budget(start, BUDGET_AGGREGATION)?;
    Ok("9 cells".into())
}

fn selection_parity() -> Result<String, String> {
    let start = Instant::now();
    let all: Vec<usize> = (0..17).collect();
    let report = grid_report(ROB_SD, &all);
    let expected = ["T7", "T10", "T11", "T12", "T14", "T17", "T20", "T23"];
    let got = select_worst_dir_tests(&report).map_err(|e| e.to_string())?;
    ensure(got == expected, || format!("selected {got:?}"))?;
    let mut cells: Vec<(String, f64)> = all.iter().map(|&r| (test_id(r), GRID[r][ROB_SD])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        for i in (1..cells.len()).rev() {
            cells.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
        }
        let again = select_below_mean(&cells).map_err(|e| e.to_string())?;
        ensure(again == expected, || format!("row order changed the selection: {again:?}"))?;
    }
    within_budget(start, BUDGET_SELECTION)?;
    Ok("8 tests, 200 shuffles".into())
}

fn counts_to_vectors(tp: usize, fn_: usize, fp: usize, tn: usize) -> (Vec<bool>, Vec<bool>) {
    let mut labels = Vec::new();
    let mut preds = Vec::new();
    for (n, y, p) in [(tp, true, true), (fn_, true, false), (fp, false, true), (tn, false, false)] {
        labels.extend(std::iter::repeat_n(y, n));
        preds.extend(std::iter::repeat_n(p, n));
    }
    (labels, preds)
}

fn pct2(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

fn metric_parity() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let n = 1 + (rng.next_u64() % 3000) as usize;
        let skew = rng.next_u64() % 100;
        let labels: Vec<bool> = (0..n).map(|_| rng.next_u64() % 100 < skew).collect();
        let preds: Vec<bool> = (0..n).map(|_| rng.next_u64() % 2 == 0).collect();
        let m = compute_metrics(&labels, &preds).map_err(|e| e.to_string())?;
        let c = Confusion::from_labels(&labels, &preds).unwrap();
        let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let balanced = (rate(c.tp, c.tp + c.fn_) + rate(c.tn, c.tn + c.fp)) / 2.0;
        ensure(m.brier == 1.0 - m.accuracy, || format!("trial {trial}: brier {} acc {}", m.brier, m.accuracy))?;
        ensure(m.auc == balanced, || format!("trial {trial}: auc {} balanced {balanced}", m.auc))?;
        let mismatch = labels.iter().zip(&preds).filter(|(y, p)| y != p).count() as f64 / n as f64;
        ensure((m.brier - mismatch).abs() <= f64::EPSILON, || format!("trial {trial}: brier is not the error rate"))?;
    }
    let fixtures: [ConfusionFixture; 3] = [
        ("BERT/PHM", 28, 1, 1, 27, "96.49", "3.51", Some("96.49")),
        ("RoBERTa/DAIC", 159, 1835, 280, 4423, "68.42", "31.58", None),
        ("RoBERTa/SD", 1120, 183, 389, 784, "76.90", "23.10", None),
    ];
    for (name, tp, fn_, fp, tn, acc, brier, auc) in fixtures {
        let (y, p) = counts_to_vectors(tp, fn_, fp, tn);
        let m = compute_metrics(&y, &p).unwrap();
        ensure(pct2(m.accuracy) == acc && pct2(m.brier) == brier, || {
            format!("{name}: accuracy {} brier {}", pct2(m.accuracy), pct2(m.brier))
        })?;
        if let Some(auc) = auc {
            ensure(pct2(m.auc) == auc, || format!("{name}: auc {}", pct2(m.auc)))?;
        }
    }
    // OOD fixture: 1303 depressed, 1173 non-depressed
    let record = |i: usize, depressed: bool, predicted: bool| EvalRecord {
        sample_id: format!("{}{i}", if depressed { "d" } else { "n" }),
        label: if depressed { Label::Depressed } else { Label::NonDepressed },
        p_depressed: if predicted { 0.9 } else { 0.1 },
    };
    let side = |tp: usize, fp: usize| -> Vec<EvalRecord> {
        (0..1303)
            .map(|i| record(i, true, i < tp))
            .chain((0..1173).map(|i| record(i, false, i < fp)))
            .collect()
    };
    let cmp = compare_ood(&side(402, 100), &side(691, 10)).unwrap();
    ensure(
        format!("{:.4}", cmp.before.f1) == "0.4454" && format!("{:.4}", cmp.after.f1) == "0.6896",
        || format!("F1 {} -> {}", cmp.before.f1, cmp.after.f1),
    )?;
    ensure(format!("{:+.2}", cmp.f1_delta_pp) == "+24.42", || format!("delta {}", cmp.f1_delta_pp))?;
    ensure(cmp.stars == "**", || format!("stars {:?}", cmp.stars))?;
    within_budget(start, BUDGET_METRICS)?;
    Ok("1000 random vectors, 4 fixtures".into())
}

fn fixture_dir(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

fn criterion_replay() -> Result<String, String> {
    let pred = |p: f64| Prediction::new("s", p).unwrap();
    let drop = FailCriterion::ConfidenceDropGt(0.1);
    ensure(evaluate_criterion(&drop, &pred(0.7), &pred(0.52)) == Outcome::Fail, || "0.7 -> 0.52".into())?;
    ensure(evaluate_criterion(&drop, &pred(0.7), &pred(0.65)) == Outcome::Pass, || "0.7 -> 0.65".into())?;
    let rise = FailCriterion::ConfidenceRiseGt(0.1);
    ensure(evaluate_criterion(&rise, &pred(0.3), &pred(0.45)) == Outcome::Fail, || "0.3 -> 0.45".into())?;
    ensure(evaluate_criterion(&rise, &pred(0.3), &pred(0.35)) == Outcome::Pass, || "0.3 -> 0.35".into())?;

    let corpus = load_corpus(&fixture_dir("replay/corpus.jsonl"), CorpusFormat::Jsonl).map_err(|e| e.to_string())?;
    let locator = format!("replay:{}", fixture_dir("replay/probabilities.jsonl").display());
    let mut model = ModelHandle::open(&locator, &AdapterOptions::default()).map_err(|e| e.to_string())?;
    let out = run_suite(&Suite::builtin(), &corpus, &mut model, &RunOptions::default(), &mut |_| Ok(()))
        .map_err(|e| e.to_string())?;
    for row in &out.report.rows {
        let got = row.accuracy.ok_or_else(|| format!("{} evaluated nothing", row.test_id))? * 100.0;
        let want = match row.test_id[1..].parse::<usize>().unwrap() {
            k if k >= 7 => GRID[k - 7][ROB_PHM],
            _ => 100.0,
        };
        ensure((got - want).abs() <= REPLAY_TOL_PP, || format!("{} {got:.4} vs {want}", row.test_id))?;
    }
    Ok(format!("{} rows, {} cases", out.report.rows.len(), out.cases.len()))
}

fn rewriter_golden() -> Result<String, String> {
    let golden: &[(&str, &str, &str)] = &[
        ("T1", "He says he loves comedies.", "She says she loves comedies."),
        ("T1", "HE is here", "She is here"),
        ("T1", "The hero said hello.", "The hero said hello."),
        ("T1", "Hehe, he laughed", "Hehe, she laughed"),
        ("T1", "he...he", "she...she"),
        ("T2", "She thinks she is fine, she said.", "He thinks he is fine, he said."),
        ("T2", "Ask her.", "Ask her."),
        ("T3", "I love my dog.", "They love their dog."),
        ("T3", "so I left", "so they left"),
        ("T3", "Give me mine, I said to myself.", "Give them theirs, they said to themselves."),
        ("T3", "My life is mine.", "Their life is theirs."),
        ("T3", "Is it me? I think so.", "Is it them? They think so."),
        ("T4", "I hurt myself and my arm.", "He hurt himself and his arm."),
        ("T4", "The book is mine.", "The book is his."),
        ("T4", "My dog", "His dog"),
        ("T5", "I lost my keys.", "She lost her keys."),
        ("T5", "They told me that mine was late.", "They told her that hers was late."),
        ("T5", "Myself, I blame me.", "Herself, she blame her."),
        ("T6", "She gave her book to her.", "I gave my book to me."),
        ("T6", "The idea was his.", "The idea was mine."),
        ("T6", "He washed his car.", "I washed my car."),
        ("T6", "They asked them about their plans.", "I asked me about my plans."),
        ("T6", "Tell him to look after himself.", "Tell me to look after myself."),
        ("T6", "The choice was hers, and theirs too.", "The choice was mine, and mine too."),
        ("T6", "Her cat sleeps.", "My cat sleeps."),
        ("T6", "so they left", "so I left"),
        ("T6", "I am fine.", "I am fine."),
        ("T6", "Whether they like it or not, he goes.", "Whether I like it or not, I goes."),
    ];
    let maps: BTreeMap<&str, PronounMap> =
        PronounMap::BUILTIN_NAMES.iter().map(|n| (*n, PronounMap::builtin(n).unwrap())).collect();
    for (map, input, expected) in golden {
        let got = apply_pronoun_map(input, &maps[map]);
        ensure(got == *expected, || format!("{map} {input:?} gave {got:?}, want {expected:?}"))?;
    }
    let alphabet: Vec<char> = "abcXYZ019 '\u{2019}.,!?;:-\t\n\u{e9}\u{df}\u{4e2d}\u{1f600}\u{300}".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10_000 {
        let len = (rng.next_u64() % 40) as usize;
        let s: String = (0..len).map(|_| alphabet[(rng.next_u64() % alphabet.len() as u64) as usize]).collect();
        let toks = tokenize(&s);
        let joined: String = toks.iter().map(|t| t.surface).collect();
        ensure(joined == s, || format!("tokenize lost text in {s:?}"))?;
        let mut at = 0;
        for t in &toks {
            ensure(t.span.0 == at && &s[t.span.0..t.span.1] == t.surface, || format!("bad span in {s:?}"))?;
            at = t.span.1;
        }
    }
    Ok(format!("{} golden sentences, 10000 random strings", golden.len()))
}

/// Two-sided exact p by enumerating every subset of pooled positions.
fn mwu_brute(xs: &[f64], ys: &[f64]) -> f64 {
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let n = pooled.len();
    // doubled midranks: 2 * (number below) + (number equal) + 1
    let ranks: Vec<i64> = pooled
        .iter()
        .map(|v| {
            let below = pooled.iter().filter(|w| *w < v).count() as i64;
            let equal = pooled.iter().filter(|w| *w == v).count() as i64;
            2 * below + equal + 1
        })
        .collect();
    let k = xs.len();
    let mean2 = (k * (n + 1)) as i64;
    let observed: i64 = ranks[..k].iter().sum();
    let dev = (observed - mean2).abs();
    let (mut hit, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let s: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        all += 1;
        if (s - mean2).abs() >= dev {
            hit += 1;
        }
    }
    hit as f64 / all as f64
}

fn binomial_two_sided(b: usize, c: usize) -> f64 {
    let n = b + c;
    let k = b.min(c);
    let mut coef = 1.0f64;
    let mut tail = 0.0;
    for i in 0..=k {
        if i > 0 {
            coef = coef * (n - i + 1) as f64 / i as f64;
        }
        tail += coef;
    }
    (2.0 * tail / 2f64.powi(n as i32)).min(1.0)
}

fn stats_oracles() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut compared = 0;
    for total in 2..=10usize {
        for nx in 1..total {
            for tied in [false, true] {
                for _ in 0..6 {
                    let draw = |rng: &mut ChaCha8Rng| {
                        if tied {
                            (rng.next_u64() % 4) as f64
                        } else {
                            (rng.next_u64() % 1_000_000) as f64 / 7.0
                        }
                    };
                    let xs: Vec<f64> = (0..nx).map(|_| draw(&mut rng)).collect();
                    let ys: Vec<f64> = (0..total - nx).map(|_| draw(&mut rng)).collect();
                    let got = mann_whitney_u_exact(&xs, &ys).map_err(|e| e.to_string())?;
                    let first = xs[0];
                    let want = if xs.iter().chain(&ys).all(|&v| v == first) { 1.0 } else { mwu_brute(&xs, &ys) };
                    ensure((got.p_value - want).abs() <= MWU_TOL, || {
                        format!("MWU {xs:?} {ys:?}: {} vs {want}", got.p_value)
                    })?;
                    compared += 1;
                }
            }
        }
    }
    for b in 0..=25usize {
        for c in 0..=25 - b {
            let got = mcnemar_counts(b, c).p_value;
            let want = if b + c == 0 { 1.0 } else { binomial_two_sided(b, c) };
            ensure((got - want).abs() <= 1e-12, || format!("McNemar ({b}, {c}): {got} vs {want}"))?;
        }
    }
    for _ in 0..1000 {
        let nx = 1 + (rng.next_u64() % 30) as usize;
        let ny = 1 + (rng.next_u64() % 30) as usize;
        let xs: Vec<f64> = (0..nx).map(|_| (rng.next_u64() % 20) as f64).collect();
        let ys: Vec<f64> = (0..ny).map(|_| (rng.next_u64() % 20) as f64).collect();
        let (ux, uy) = u_statistics(&xs, &ys);
        ensure(ux + uy == (nx * ny) as f64, || format!("U identity {ux} + {uy} != {}", nx * ny))?;
        let b = (rng.next_u64() % 200) as usize;
        let c = (rng.next_u64() % 200) as usize;
        ensure(mcnemar_counts(b, c).p_value == mcnemar_counts(c, b).p_value, || format!("McNemar ({b}, {c}) asymmetric"))?;
    }
    within_budget(start, BUDGET_STATS)?;
    Ok(format!("{compared} MWU samples, 351 McNemar counts"))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| (rng.next_u64() as f64 / u64::MAX as f64 - 0.5) * scale).collect())
        .collect()
}

/// Minimum-cost perfect matching on a square cost matrix.
fn hungarian(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let inf = f64::INFINITY;
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let (mut p, mut way) = (vec![0usize; n + 1], vec![0usize; n + 1]);
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum()
}

fn permutation_min(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact W1 between uniform empirical measures: replicate both sets to a
/// common size and solve the assignment problem.
fn exact_w1(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let l = xs.len() / gcd(xs.len(), ys.len()) * ys.len();
    let ex: Vec<&Vec<f64>> = xs.iter().flat_map(|p| std::iter::repeat_n(p, l / xs.len())).collect();
    let ey: Vec<&Vec<f64>> = ys.iter().flat_map(|p| std::iter::repeat_n(p, l / ys.len())).collect();
    let cost: Vec<Vec<f64>> = ex
        .iter()
        .map(|a| ey.iter().map(|b| a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()).collect())
        .collect();
    let h = hungarian(&cost);
    if l <= 7 {
        let brute = permutation_min(&cost);
        assert!((h - brute).abs() < 1e-9, "assignment oracles disagree: {h} vs {brute}");
    }
    h / l as f64
}

fn wasserstein_checks() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let n = 1 + (rng.next_u64() % 12) as usize;
        (0..n).map(|_| (rng.next_u64() % 10_000) as f64 / 100.0 - 50.0).collect()
    };
    for _ in 0..500 {
        let (a, b, c) = (sample(&mut rng), sample(&mut rng), sample(&mut rng));
        let w = |x: &[f64], y: &[f64]| w1_1d(x, y).unwrap();
        ensure(w(&a, &a).abs() <= W1_TOL, || "W1(a, a) != 0".into())?;
        ensure((w(&a, &b) - w(&b, &a)).abs() <= W1_TOL, || "W1 is not symmetric".into())?;
        ensure(w(&a, &c) <= w(&a, &b) + w(&b, &c) + W1_TOL, || "triangle inequality".into())?;
        let shift = (rng.next_u64() % 2000) as f64 / 100.0 - 10.0;
        let moved: Vec<f64> = a.iter().map(|v| v + shift).collect();
        ensure((w(&a, &moved) - shift.abs()).abs() <= W1_TOL, || format!("shift by {shift}"))?;
    }
    for _ in 0..50 {
        let pts = random_points(&mut rng, 20, 8, 4.0);
        let set = EmbeddingSet::new("x", pts).unwrap();
        let d = sliced_w1(&set, &set, 64, 3).map_err(|e| e.to_string())?;
        ensure(d.abs() < W1_TOL, || format!("sliced self-distance {d}"))?;
    }
    for trial in 0..100 {
        let n = 2 + (rng.next_u64() % 4) as usize;
        let m = 2 + (rng.next_u64() % 4) as usize;
        let xs = random_points(&mut rng, n, 2, 2.0);
        let ys = random_points(&mut rng, m, 2, 2.0);
        let exact = exact_w1(&xs, &ys);
        let sx = EmbeddingSet::new("x", xs).unwrap();
        let sy = EmbeddingSet::new("y", ys).unwrap();
        let sliced = sliced_w1(&sx, &sy, 128, trial).unwrap();
        ensure(sliced <= exact + W1_TOL, || format!("trial {trial}: sliced {sliced} > exact {exact}"))?;
    }
    let planted = |name: &str, offset: f64, rng: &mut ChaCha8Rng| {
        let pts = random_points(rng, 80, 16, 1.0)
            .into_iter()
            .map(|v| v.into_iter().enumerate().map(|(i, x)| if i < 4 { x + offset } else { x }).collect())
            .collect();
        EmbeddingSet::new(name, pts).unwrap()
    };
    let sets = [planted("PHM", 0.0, &mut rng), planted("SD", 0.5, &mut rng), planted("DAIC", 3.0, &mut rng)];
    let m = shift_matrix(&sets, 128, 0).map_err(|e| e.to_string())?;
    let (ps, pd, sd) = (m.get("PHM", "SD").unwrap(), m.get("PHM", "DAIC").unwrap(), m.get("SD", "DAIC").unwrap());
    ensure(ps < sd && sd < pd, || format!("ordering PHM-SD {ps:.3}, SD-DAIC {sd:.3}, PHM-DAIC {pd:.3}"))?;
    Ok("500 triples, 100 exact comparisons".into())
}

fn evaluate(model: &BaselineModel, corpus: &Corpus) -> Vec<EvalRecord> {
    corpus
        .samples()
        .iter()
        .map(|s| EvalRecord {
            sample_id: s.id.clone(),
            label: s.label,
            p_depressed: model.predict_proba(&s.text),
        })
        .collect()
}

fn end_to_end() -> Result<String, String> {
    let start = Instant::now();
    let corpus = template_corpus("synth", 2000, 42);
    let config = BaselineConfig::default();
    let (model, _) = train_baseline(&corpus, &config, 42).map_err(|e| e.to_string())?;
    let test: Vec<_> = corpus.samples().iter().filter(|s| s.split == Split::Test).collect();
    let correct = test.iter().filter(|s| (model.predict_proba(&s.text) >= 0.5) == s.label.is_depressed()).count();
    let accuracy = correct as f64 / test.len() as f64;
    ensure(accuracy >= MIN_HELD_OUT_ACCURACY, || format!("held-out accuracy {accuracy}"))?;

    let suite = Suite::builtin();
    let mut scorer = model.clone().into_scorer();
    let out = run_suite(&suite, &corpus, &mut scorer, &RunOptions::default(), &mut |_| Ok(()))
        .map_err(|e| e.to_string())?;
    let selected = select_worst_dir_tests(&out.report).map_err(|e| e.to_string())?;
    ensure(!selected.is_empty(), || "nothing selected".into())?;
    let plan = AugmentationPlan::new(&suite, &selected, AssignmentPolicy::LabelConsistent, 7)
        .map_err(|e| e.to_string())?;
    let augmented = build_augmented_corpus(&corpus, &plan).map_err(|e| e.to_string())?;
    ensure(augmented.len() == corpus.len(), || "sample count changed".into())?;
    for (a, b) in corpus.samples().iter().zip(augmented.samples()) {
        if a.split == Split::Test {
            ensure(a == b, || format!("test sample {} changed", a.id))?;
        } else {
            ensure(b.text.starts_with(&a.text) && b.text.len() > a.text.len(), || {
                format!("{} is not an extension of the original", a.id)
            })?;
        }
    }
    let (retrained, _) = train_baseline(&augmented, &config, 42).map_err(|e| e.to_string())?;
    let ood = shifted_corpus("ood", 600, 43);
    let cmp = compare_ood(&evaluate(&model, &ood), &evaluate(&retrained, &ood)).map_err(|e| e.to_string())?;
    ensure(cmp.after.f1 >= cmp.before.f1, || format!("OOD F1 fell {} -> {}", cmp.before.f1, cmp.after.f1))?;
    within_budget(start, BUDGET_END_TO_END)?;
    Ok(format!(
        "held-out {:.3}, selected {}, OOD F1 {:.3} -> {:.3}",
        accuracy,
        selected.join(","),
        cmp.before.f1,
        cmp.after.f1
    ))
}

fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus_path = tmp.path().join("c.jsonl");
    write_corpus_jsonl(&template_corpus("synth", 300, 1), &corpus_path).map_err(|e| e.to_string())?;
    let model = tmp.path().join("model.json");
    let deck = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_deck"))
            .args(args)
            .env_remove("DECK_CACHE_DIR")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())
    };
    let c = corpus_path.to_str().unwrap();
    deck(&["train-baseline", "--corpus", c, "--epochs", "40", "--seed", "2", "--out", model.to_str().unwrap()])?;
    let locator = format!("builtin:{}", model.display());
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        deck(&["run", "--corpus", c, "--model", &locator, "--seed", "5", "--out", dir.to_str().unwrap()])?;
        reports.push(fs::read(dir.join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure(reports[0] == reports[1], || "report.json differs between runs".into())?;
    Ok(format!("{} bytes", reports[0].len()))
}
