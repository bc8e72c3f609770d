//! Markdown rendering of run reports, and reading them back from JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use deck_core::runner::{aggregate_by_symptom, GroupAggregate, TestReport};

use crate::{DeckError, Result};

/// Shown where a rate is undefined.
pub const UNDEFINED: &str = "—";

/// Fixed-point rendering of a percentage held in millionths of a point.
/// Working on the integer keeps ties like 70.445 from being decided by
/// binary representation noise.
fn fixed(micro: i64, decimals: u32, truncate: bool) -> String {
    let unit = 10i64.pow(6 - decimals);
    let m = micro.abs();
    let q = if truncate { m / unit } else { (m + unit / 2) / unit };
    let scale = 10i64.pow(decimals);
    let sign = if micro < 0 && q != 0 { "-" } else { "" };
    format!("{sign}{}.{:0w$}", q / scale, q % scale, w = decimals as usize)
}

fn micro_points(rate: f64) -> i64 {
    (rate * 100.0 * 1e6).round() as i64
}

/// A rate as a percentage with two decimals, ties rounded away from zero.
pub fn percent(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{}%", fixed(micro_points(v), 2, false)),
        None => UNDEFINED.to_string(),
    }
}

/// A group's spread: one decimal, truncated, the convention of the
/// published group tables.
pub fn percent_spread(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{}%", fixed(micro_points(v), 1, true)),
        None => UNDEFINED.to_string(),
    }
}

/// `mean% (std%)` as printed in group tables.
pub fn group_cell(g: &GroupAggregate) -> String {
    format!("{} ({})", percent(g.mean), percent_spread(g.std))
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

pub fn read_report(path: &Path) -> Result<TestReport> {
    let json = fs::read_to_string(path).map_err(|e| DeckError::io(path, e))?;
    serde_json::from_str(&json).map_err(|e| DeckError::parse(path, e.line() as u64, e.to_string()))
}

pub fn report_to_json(report: &TestReport) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize") + "\n"
}

fn group_table(out: &mut String, groups: &[GroupAggregate]) {
    out.push_str("| Group | Cells | Cases | Mean accuracy | Std |\n|---|---|---|---|---|\n");
    for g in groups {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            g.group.as_str(),
            g.n_cells,
            g.n_cases,
            percent(g.mean),
            percent_spread(g.std)
        );
    }
}

/// One run as Markdown: the per-test table, symptom groups, metrics on the
/// unperturbed texts and the length-sensitivity tests.
pub fn render_markdown(report: &TestReport) -> String {
    let m = &report.metadata;
    let mut out = String::new();
    let _ = writeln!(out, "# DECK report: {} on {}\n", m.model_id, m.corpus);
    let _ = writeln!(out, "- suite version: {}", m.suite_version);
    let _ = writeln!(out, "- split: {}", m.split);
    if let Some(seed) = m.seed {
        let _ = writeln!(out, "- seed: {seed}");
    }
    if let Some(theta) = m.theta {
        let _ = writeln!(out, "- theta override: {theta}");
    }
    if let Some(ts) = &m.timestamp {
        let _ = writeln!(out, "- timestamp: {ts}");
    }
    out.push_str("\n## Tests\n\n");
    out.push_str("| Test | Type | Description | Accuracy | Evaluated | Failed | Skipped |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.test_id,
            r.kind.as_str(),
            cell(&r.description),
            percent(r.accuracy),
            r.n_evaluated,
            r.n_failed,
            r.n_skipped
        );
    }
    out.push_str("\n## Symptom groups\n\n");
    group_table(&mut out, &report.groups);
    if let Some(metrics) = &report.metrics {
        let h = &metrics.hard;
        out.push_str("\n## Unperturbed texts\n\n");
        out.push_str("| n | Acc | P | R | F1 | Brier | AUC |\n|---|---|---|---|---|---|---|\n");
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            metrics.n_samples,
            percent(Some(h.accuracy)),
            percent(Some(h.precision)),
            percent(Some(h.recall)),
            percent(Some(h.f1)),
            percent(Some(h.brier)),
            percent(Some(h.auc))
        );
        out.push_str("\nBrier and AUC above use hard labels.");
        if let Some(b) = metrics.brier_prob {
            let _ = write!(out, " On probabilities: Brier {b:.4}");
            match metrics.auc_prob {
                Some(a) => {
                    let _ = write!(out, ", AUC {a:.4}.");
                }
                None => out.push('.'),
            }
        }
        out.push('\n');
    }
    out.push_str("\n## Length sensitivity of DIR failures\n\n");
    match (&report.significance.length_sensitivity, &report.significance.note) {
        (Some(tests), _) => {
            out.push_str("| Feature | Mean (fail) | Mean (pass) | U | p | Method |\n|---|---|---|---|---|---|\n");
            for t in tests {
                let feature = serde_json::to_value(t.feature)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "| {feature} | {:.3} | {:.3} | {:.1} | {:.4} | {} |",
                    t.mean_fail, t.mean_pass, t.test.statistic, t.test.p_value, t.test.method
                );
            }
        }
        (None, Some(note)) => {
            let _ = writeln!(out, "Not computed: {note}");
        }
        (None, None) => out.push_str("Not computed.\n"),
    }
    out
}

/// Several runs side by side: one accuracy column per report, in the given
/// order, followed by the pooled symptom-group table.
pub fn render_combined(reports: &[TestReport]) -> String {
    let mut out = String::from("# DECK accuracy by test\n\n| Test | Type | Description |");
    for r in reports {
        let _ = write!(out, " {} |", cell(&format!("{} / {}", r.metadata.model_id, r.metadata.corpus)));
    }
    out.push_str("\n|---|---|---|");
    for _ in reports {
        out.push_str("---|");
    }
    out.push('\n');
    // row order follows the first report; ids missing elsewhere show as undefined
    let ids: Vec<&str> = reports
        .first()
        .map(|r| r.rows.iter().map(|row| row.test_id.as_str()).collect())
        .unwrap_or_default();
    for id in ids {
        let first = reports[0].row(id).expect("id comes from the first report");
        let _ = write!(out, "| {id} | {} | {} |", first.kind.as_str(), cell(&first.description));
        for r in reports {
            let _ = write!(out, " {} |", percent(r.row(id).and_then(|row| row.accuracy)));
        }
        out.push('\n');
    }
    out.push_str("\n## Symptom groups (all reports)\n\n");
    let refs: Vec<&TestReport> = reports.iter().collect();
    group_table(&mut out, &aggregate_by_symptom(&refs));
    out
}
