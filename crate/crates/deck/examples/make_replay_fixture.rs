//! Regenerates `tests/fixtures/replay/`: a 57-sample corpus and a
//! text-to-probability table that, replayed through the builtin suite,
//! yields a chosen per-test accuracy column.
//!
//! ```text
//! cargo run -p deck --example make_replay_fixture
//! ```
//!
//! Every original text scores 0.6 (depressed) or 0.4 (non-depressed), so
//! pronoun rewrites never flip a label and INV/MFT tests pass. For a DIR
//! test with target accuracy `a` over `n` cases, the first
//! `n - round(a * n)` cases get a perturbed probability that violates the
//! fail criterion by 0.2; the rest move 0.1 or less the other way.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use deck_core::corpus::{Corpus, Sample, Split, SplitSelector};
use deck_core::model::Label;
use deck_core::suite::{generate_cases, FailCriterion, Suite};

/// Target accuracies in percent, T7..T23.
const COLUMN: [f64; 17] = [
    71.93, 71.93, 61.40, 71.93, 77.19, 70.18, 71.93, 61.40, 71.93, 59.65, 71.93, 71.93, 61.40, 75.44, 71.93,
    77.19, 61.40,
];

const SUBJECTS: [&str; 6] = ["He", "She", "I", "My brother", "Her friend", "His sister"];
const VERBS: [&str; 5] = ["said", "wrote", "thought", "told me", "posted"];
const OBJECTS: [&str; 4] = [
    "that she would call him tonight",
    "that he could not sleep again",
    "I should talk to her about it",
    "nothing is going to change for me",
];

fn corpus() -> Corpus {
    let samples = (0..57)
        .map(|i| {
            let label = if i < 29 { Label::Depressed } else { Label::NonDepressed };
            let text = format!(
                "{} {} {} (post {i}).",
                SUBJECTS[i % SUBJECTS.len()],
                VERBS[(i / 2) % VERBS.len()],
                OBJECTS[(i / 3) % OBJECTS.len()]
            );
            Sample::new(format!("phm-{i:02}"), text, label, Split::Test)
        })
        .collect();
    Corpus::new("replay_phm", samples).expect("ids are unique")
}

fn original_p(label: Label) -> f64 {
    if label.is_depressed() {
        0.6
    } else {
        0.4
    }
}

fn main() {
    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay");
    fs::create_dir_all(&out).expect("fixture directory");
    let corpus = corpus();
    let suite = Suite::builtin();
    let mut table: BTreeMap<String, f64> = BTreeMap::new();
    let mut put = |text: &str, p: f64| {
        let p = (p * 1e6).round() / 1e6;
        if let Some(prev) = table.insert(text.to_string(), p) {
            assert_eq!(prev, p, "text {text:?} needs two different probabilities");
        }
    };
    for s in corpus.samples() {
        put(&s.text, original_p(s.label));
    }
    for spec in &suite.tests {
        let cases = generate_cases(spec, &corpus, SplitSelector::All);
        let live: Vec<_> = cases.iter().filter(|c| !c.skipped).collect();
        let n_fail = match spec.id[1..].parse::<usize>().ok().filter(|&k| k >= 7) {
            Some(k) => {
                let n = live.len() as f64;
                live.len() - (COLUMN[k - 7] / 100.0 * n).round() as usize
            }
            None => 0,
        };
        for (i, case) in live.iter().enumerate() {
            let p0 = original_p(corpus.get(&case.sample_id).expect("case sample exists").label);
            let fail = i < n_fail;
            let p = match spec.fail_criterion {
                FailCriterion::ConfidenceDropGt(_) if fail => p0 - 0.3,
                FailCriterion::ConfidenceDropGt(_) => p0 + 0.1,
                FailCriterion::ConfidenceRiseGt(_) if fail => p0 + 0.3,
                FailCriterion::ConfidenceRiseGt(_) => p0 - 0.05,
                _ => p0,
            };
            put(&case.perturbed_text, p);
        }
    }
    let corpus_lines: String = corpus
        .samples()
        .iter()
        .map(|s| serde_json::to_string(s).expect("samples serialize") + "\n")
        .collect();
    fs::write(out.join("corpus.jsonl"), corpus_lines).expect("write corpus");
    let table_lines: String = table
        .iter()
        .map(|(text, p)| serde_json::json!({ "text": text, "p_depressed": p }).to_string() + "\n")
        .collect();
    fs::write(out.join("probabilities.jsonl"), table_lines).expect("write table");
    println!("wrote {} samples and {} probabilities to {}", corpus.len(), table.len(), out.display());
}
