//! Classification metrics and the hypothesis tests used to compare models,
//! runs and text-length distributions.

pub mod special;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::runner::{Outcome, TestCaseResult};
use crate::suite::TestKind;
use crate::textops::{tokenize, TokenKind};
use crate::{Error, Result};

use special::{chi2_1_sf, normal_sf, student_t_two_sided};

/// Largest number of discordant pairs for which McNemar uses the exact
/// binomial distribution.
pub const MCNEMAR_EXACT_MAX: usize = 25;

/// Largest pooled sample size for which Mann-Whitney enumerates the exact
/// permutation distribution.
pub const MWU_EXACT_MAX: usize = 14;

const MWU_EXACT_HARD_LIMIT: usize = 50;

/// Binary classification metrics, positive class = depressed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub brier: f64,
    pub auc: f64,
}

/// Confusion-matrix counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(labels: &[bool], preds: &[bool]) -> Result<Self> {
        check_lengths(labels.len(), preds.len())?;
        let mut c = Self::default();
        for (&y, &p) in labels.iter().zip(preds) {
            match (y, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::InvalidInput("metrics need at least one sample".into()));
    }
    Ok(())
}

/// Metrics on hard predictions, with the Brier score and AUC also computed
/// from the hard labels (as a 0/1 "probability"). On such inputs Brier equals
/// the error rate and AUC equals balanced accuracy. Ratios with a zero
/// denominator are 0.
pub fn compute_metrics(labels: &[bool], preds: &[bool]) -> Result<MetricSet> {
    let c = Confusion::from_labels(labels, preds)?;
    let n = c.total();
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let specificity = ratio(c.tn, c.tn + c.fp);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let accuracy = ratio(c.tp + c.tn, n);
    Ok(MetricSet {
        accuracy,
        precision,
        recall,
        f1,
        // on 0/1 predictions the squared error is the mismatch rate; deriving
        // it from accuracy keeps the identity bit-exact in floating point
        brier: 1.0 - accuracy,
        auc: (recall + specificity) / 2.0,
    })
}

/// Mean squared error between 0/1 labels and depressed-class probabilities.
pub fn brier_score_prob(labels: &[bool], probs: &[f64]) -> Result<f64> {
    check_lengths(labels.len(), probs.len())?;
    let sum: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| {
            let d = if y { 1.0 - p } else { p };
            d * d
        })
        .sum();
    Ok(sum / labels.len() as f64)
}

/// ROC AUC from probabilities: the probability that a random positive
/// outranks a random negative, ties counting one half.
pub fn roc_auc_prob(labels: &[bool], probs: &[f64]) -> Result<f64> {
    check_lengths(labels.len(), probs.len())?;
    let pos: Vec<f64> = labels.iter().zip(probs).filter(|(y, _)| **y).map(|(_, p)| *p).collect();
    let neg: Vec<f64> = labels.iter().zip(probs).filter(|(y, _)| !**y).map(|(_, p)| *p).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InvalidInput("AUC needs both classes".into()));
    }
    let (u_pos, _) = u_statistics(&pos, &neg);
    Ok(u_pos / (pos.len() * neg.len()) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactBinomial,
    ChiSquareCorrected,
    ExactEnumeration,
    NormalApprox,
    PearsonT,
    WelchT,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestStatistic {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
}

/// Discordant-pair counts for two classifiers scored on the same cases.
/// `b` counts cases only `a` got right, `c` cases only the other got right.
pub fn discordant_pairs(correct_a: &[bool], correct_b: &[bool]) -> Result<(usize, usize)> {
    if correct_a.len() != correct_b.len() {
        return Err(Error::LengthMismatch {
            left: correct_a.len(),
            right: correct_b.len(),
        });
    }
    let b = correct_a.iter().zip(correct_b).filter(|(a, b)| **a && !**b).count();
    let c = correct_a.iter().zip(correct_b).filter(|(a, b)| !**a && **b).count();
    Ok((b, c))
}

fn binomial_row(n: usize) -> Vec<u64> {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![1u64; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

/// McNemar test from discordant counts.
pub fn mcnemar_counts(b: usize, c: usize) -> TestStatistic {
    let n = b + c;
    if n == 0 {
        return TestStatistic {
            statistic: 0.0,
            p_value: 1.0,
            method: Method::Degenerate,
        };
    }
    if n <= MCNEMAR_EXACT_MAX {
        let k = b.min(c);
        let row = binomial_row(n);
        let tail: u64 = row[..=k].iter().sum();
        let p = 2.0 * tail as f64 / (1u64 << n) as f64;
        TestStatistic {
            statistic: k as f64,
            p_value: p.min(1.0),
            method: Method::ExactBinomial,
        }
    } else {
        let diff = (b as f64 - c as f64).abs() - 1.0;
        let stat = diff * diff / n as f64;
        TestStatistic {
            statistic: stat,
            p_value: chi2_1_sf(stat),
            method: Method::ChiSquareCorrected,
        }
    }
}

/// McNemar test on per-case correctness indicators of two classifiers.
pub fn mcnemar(correct_a: &[bool], correct_b: &[bool]) -> Result<TestStatistic> {
    let (b, c) = discordant_pairs(correct_a, correct_b)?;
    Ok(mcnemar_counts(b, c))
}

/// Doubled midranks (so ties stay integral) of the pooled sample, plus the
/// tie-correction term `sum(t^3 - t)`.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, f64) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, doubled midrank = (i+1) + (j+1)
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Mann-Whitney U statistics `(U_x, U_y)` from midrank sums; they always
/// add up to `|xs| * |ys|`.
pub fn u_statistics(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let (ranks, _) = doubled_midranks(&pooled);
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let rx: u64 = ranks[..xs.len()].iter().sum();
    let ry: u64 = ranks[xs.len()..].iter().sum();
    (
        rx as f64 / 2.0 - nx * (nx + 1.0) / 2.0,
        ry as f64 / 2.0 - ny * (ny + 1.0) / 2.0,
    )
}

fn check_mwu_input(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidInput("Mann-Whitney needs two non-empty samples".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("Mann-Whitney inputs must be finite".into()));
    }
    Ok(())
}

fn all_identical(xs: &[f64], ys: &[f64]) -> bool {
    let first = xs[0];
    xs.iter().chain(ys).all(|&v| v == first)
}

fn degenerate_mwu(xs: &[f64], ys: &[f64]) -> TestStatistic {
    TestStatistic {
        statistic: (xs.len() * ys.len()) as f64 / 2.0,
        p_value: 1.0,
        method: Method::Degenerate,
    }
}

/// Two-sided exact Mann-Whitney p-value: the share of all assignments of
/// the pooled midranks to a group of size `|xs|` whose rank sum lies at
/// least as far from its mean as the observed one.
pub fn mann_whitney_u_exact(xs: &[f64], ys: &[f64]) -> Result<TestStatistic> {
    check_mwu_input(xs, ys)?;
    let n = xs.len() + ys.len();
    if n > MWU_EXACT_HARD_LIMIT {
        return Err(Error::InvalidInput(format!(
            "exact Mann-Whitney is limited to {MWU_EXACT_HARD_LIMIT} observations"
        )));
    }
    if all_identical(xs, ys) {
        return Ok(degenerate_mwu(xs, ys));
    }
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let (ranks, _) = doubled_midranks(&pooled);
    let k = xs.len();
    let total: u64 = ranks.iter().sum();
    // ways[j][s]: number of j-subsets with doubled rank sum s
    let mut ways = vec![vec![0f64; total as usize + 1]; k + 1];
    ways[0][0] = 1.0;
    for &r in &ranks {
        let r = r as usize;
        for j in (1..=k).rev() {
            for s in (r..=total as usize).rev() {
                let add = ways[j - 1][s - r];
                if add != 0.0 {
                    ways[j][s] += add;
                }
            }
        }
    }
    // mean doubled rank sum is k * (n + 1); compare doubled deviations as integers
    let mean2 = (k * (n + 1)) as i64;
    let observed: u64 = ranks[..k].iter().sum();
    let obs_dev = (observed as i64 - mean2).abs();
    let mut extreme = 0.0;
    let mut all = 0.0;
    for (s, &w) in ways[k].iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        all += w;
        if (s as i64 - mean2).abs() >= obs_dev {
            extreme += w;
        }
    }
    let (u_x, _) = u_statistics(xs, ys);
    Ok(TestStatistic {
        statistic: u_x,
        p_value: (extreme / all).min(1.0),
        method: Method::ExactEnumeration,
    })
}

/// Two-sided normal approximation with tie-corrected variance and a 0.5
/// continuity correction.
pub fn mann_whitney_u_normal(xs: &[f64], ys: &[f64]) -> Result<TestStatistic> {
    check_mwu_input(xs, ys)?;
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let (_, ties) = doubled_midranks(&pooled);
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let n = nx + ny;
    let tie_term = if n > 1.0 { ties / (n * (n - 1.0)) } else { 0.0 };
    let var = nx * ny / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 || all_identical(xs, ys) {
        return Ok(degenerate_mwu(xs, ys));
    }
    let (u_x, _) = u_statistics(xs, ys);
    let dev = ((u_x - nx * ny / 2.0).abs() - 0.5).max(0.0);
    let z = dev / libm::sqrt(var);
    Ok(TestStatistic {
        statistic: u_x,
        p_value: (2.0 * normal_sf(z)).min(1.0),
        method: Method::NormalApprox,
    })
}

/// Mann-Whitney U test, exact for pooled sizes up to [`MWU_EXACT_MAX`] and
/// normal-approximated above.
pub fn mann_whitney_u(xs: &[f64], ys: &[f64]) -> Result<TestStatistic> {
    if xs.len() + ys.len() <= MWU_EXACT_MAX {
        mann_whitney_u_exact(xs, ys)
    } else {
        mann_whitney_u_normal(xs, ys)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n-1 denominator.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Pearson correlation with a two-sided p-value from the t transform on
/// n-2 degrees of freedom.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<TestStatistic> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidInput("correlation needs at least 3 pairs".into()));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidInput("correlation needs non-zero variance in both inputs".into()));
    }
    let r = (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0);
    let df = xs.len() as f64 - 2.0;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * libm::sqrt(df / (1.0 - r * r));
        student_t_two_sided(t, df)
    };
    Ok(TestStatistic {
        statistic: r,
        p_value: p,
        method: Method::PearsonT,
    })
}

/// Welch's unequal-variance t test with Satterthwaite degrees of freedom.
///
/// When both samples have zero variance the result is tagged degenerate:
/// equal means give t = 0 and p = 1, different means give an infinite t and
/// p = 0.
pub fn welch_t(xs: &[f64], ys: &[f64]) -> Result<TestStatistic> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::InvalidInput("Welch t test needs at least 2 values per sample".into()));
    }
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (vx, vy) = (sample_variance(xs), sample_variance(ys));
    let diff = mean(xs) - mean(ys);
    let (ax, ay) = (vx / nx, vy / ny);
    let se2 = ax + ay;
    if se2 == 0.0 {
        let (statistic, p_value) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(diff), 0.0)
        };
        return Ok(TestStatistic {
            statistic,
            p_value,
            method: Method::Degenerate,
        });
    }
    let t = diff / libm::sqrt(se2);
    let df = se2 * se2 / (ax * ax / (nx - 1.0) + ay * ay / (ny - 1.0));
    Ok(TestStatistic {
        statistic: t,
        p_value: student_t_two_sided(t, df),
        method: Method::WelchT,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthFeature {
    Words,
    UniqueWords,
    Characters,
    MeanWordLength,
}

impl LengthFeature {
    pub const ALL: [LengthFeature; 4] = [
        LengthFeature::Words,
        LengthFeature::UniqueWords,
        LengthFeature::Characters,
        LengthFeature::MeanWordLength,
    ];

    pub fn measure(self, text: &str) -> f64 {
        let words: Vec<&str> = tokenize(text)
            .into_iter()
            .filter(|t| t.kind == TokenKind::Word)
            .map(|t| t.surface)
            .collect();
        match self {
            LengthFeature::Words => words.len() as f64,
            LengthFeature::UniqueWords => {
                let mut seen: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
                seen.sort();
                seen.dedup();
                seen.len() as f64
            }
            LengthFeature::Characters => text.chars().count() as f64,
            LengthFeature::MeanWordLength => {
                if words.is_empty() {
                    0.0
                } else {
                    words.iter().map(|w| w.chars().count()).sum::<usize>() as f64 / words.len() as f64
                }
            }
        }
    }
}

/// Length comparison between failed and passed directional cases for one
/// feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthTest {
    pub feature: LengthFeature,
    pub n_fail: usize,
    pub n_pass: usize,
    pub mean_fail: f64,
    pub mean_pass: f64,
    pub test: TestStatistic,
}

/// Compares the original-text lengths of failed and passed DIR cases with a
/// Mann-Whitney test per length feature.
pub fn length_sensitivity(cases: &[TestCaseResult], corpus: &Corpus) -> Result<Vec<LengthTest>> {
    let index = corpus.index();
    let mut fail_texts = Vec::new();
    let mut pass_texts = Vec::new();
    for case in cases.iter().filter(|c| c.kind == TestKind::Dir) {
        let bucket = match case.outcome {
            Outcome::Fail => &mut fail_texts,
            Outcome::Pass => &mut pass_texts,
            Outcome::Skipped => continue,
        };
        let sample = index.get(case.sample_id.as_str()).ok_or_else(|| {
            Error::InvalidInput(format!("case log names unknown sample {:?}", case.sample_id))
        })?;
        bucket.push(sample.text.as_str());
    }
    for (name, group) in [("fail", &fail_texts), ("pass", &pass_texts)] {
        if group.is_empty() {
            return Err(Error::InvalidInput(format!(
                "length sensitivity needs DIR cases in both outcomes; the {name} group is empty"
            )));
        }
    }
    let features = |texts: &[&str]| -> Vec<[f64; 4]> {
        texts.iter().map(|t| LengthFeature::ALL.map(|f| f.measure(t))).collect()
    };
    let fail = features(&fail_texts);
    let pass = features(&pass_texts);
    LengthFeature::ALL
        .iter()
        .enumerate()
        .map(|(i, &feature)| {
            let xs: Vec<f64> = fail.iter().map(|f| f[i]).collect();
            let ys: Vec<f64> = pass.iter().map(|f| f[i]).collect();
            Ok(LengthTest {
                feature,
                n_fail: xs.len(),
                n_pass: ys.len(),
                mean_fail: mean(&xs),
                mean_pass: mean(&ys),
                test: mann_whitney_u(&xs, &ys)?,
            })
        })
        .collect()
}

/// Significance annotation: `**` for p < 0.01, `*` for p < 0.05.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "**"
    } else if p_value < 0.05 {
        "*"
    } else {
        ""
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = serde_json::to_string(self).unwrap_or_default();
        f.write_str(s.trim_matches('"'))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn perfect_prediction() {
        let y = bits(&[1, 0, 1, 0]);
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!((m.accuracy, m.f1, m.brier, m.auc), (1.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn hand_computed_confusion() {
        // tp=1, fn=1, tn=2, fp=0
        let m = compute_metrics(&bits(&[1, 1, 0, 0]), &bits(&[1, 0, 0, 0])).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.brier, 0.25);
        assert_eq!(m.auc, 0.75);
    }

    #[test]
    fn zero_denominators_are_zero() {
        let m = compute_metrics(&bits(&[0, 0]), &bits(&[0, 0])).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.accuracy, 1.0);
        assert!(compute_metrics(&bits(&[1]), &bits(&[1, 0])).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }

    #[test]
    fn probability_variants() {
        let y = bits(&[1, 0, 1, 0]);
        assert!((brier_score_prob(&y, &[0.9, 0.1, 0.6, 0.4]).unwrap() - 0.085).abs() < 1e-15);
        assert_eq!(roc_auc_prob(&y, &[0.9, 0.1, 0.6, 0.4]).unwrap(), 1.0);
        assert_eq!(roc_auc_prob(&y, &[0.5, 0.5, 0.5, 0.5]).unwrap(), 0.5);
        assert!(roc_auc_prob(&bits(&[1, 1]), &[0.2, 0.3]).is_err());
    }

    #[test]
    fn mcnemar_examples() {
        assert_eq!(mcnemar_counts(5, 5).p_value, 1.0);
        let t = mcnemar_counts(9, 1);
        assert!((t.p_value - 22.0 / 1024.0).abs() < 1e-15);
        assert_eq!(t.method, Method::ExactBinomial);
        let d = mcnemar_counts(0, 0);
        assert_eq!((d.p_value, d.method), (1.0, Method::Degenerate));
        let big = mcnemar_counts(30, 10);
        assert_eq!(big.method, Method::ChiSquareCorrected);
        assert!((big.statistic - 19.0 * 19.0 / 40.0).abs() < 1e-12);
    }

    #[test]
    fn mcnemar_from_indicators() {
        let a = bits(&[1, 1, 1, 0, 0, 1]);
        let b = bits(&[1, 0, 0, 1, 0, 1]);
        assert_eq!(discordant_pairs(&a, &b).unwrap(), (2, 1));
        assert!(mcnemar(&a, &b[..3]).is_err());
    }

    #[test]
    fn mann_whitney_examples() {
        let (ux, uy) = u_statistics(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!((ux, uy), (0.0, 4.0));
        let t = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(t.method, Method::ExactEnumeration);
        assert!((t.p_value - 1.0 / 3.0).abs() < 1e-15);
        let d = mann_whitney_u(&[2.0, 2.0], &[2.0]).unwrap();
        assert_eq!((d.p_value, d.method), (1.0, Method::Degenerate));
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn mann_whitney_ties_use_midranks() {
        let (ux, uy) = u_statistics(&[1.0, 2.0, 2.0], &[2.0, 3.0]);
        // pooled ranks: 1 -> 1, 2 -> 3 (x3), 3 -> 5
        assert_eq!(ux, 1.0 + 3.0 + 3.0 - 6.0);
        assert_eq!(ux + uy, 6.0);
    }

    #[test]
    fn mann_whitney_normal_path_above_cutoff() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = (5..15).map(f64::from).collect();
        let t = mann_whitney_u(&xs, &ys).unwrap();
        assert_eq!(t.method, Method::NormalApprox);
        let e = mann_whitney_u_exact(&xs, &ys).unwrap();
        assert!((t.p_value - e.p_value).abs() < 0.02, "{} vs {}", t.p_value, e.p_value);
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &up).unwrap().statistic - 1.0).abs() < 1e-15);
        assert!((pearson_r(&x, &down).unwrap().statistic + 1.0).abs() < 1e-15);
        // sxy = 5.5, sxx = 5, syy = 8.75
        let r = pearson_r(&x, &[1.0, 3.0, 2.0, 5.0]).unwrap();
        assert!((r.statistic - 5.5 / libm::sqrt(43.75)).abs() < 1e-15);
        assert!((r.p_value - 0.168_478_159_379_7).abs() < 1e-9);
        // sxy = 4, sxx = 5, syy = 5
        let r = pearson_r(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r.statistic - 0.8).abs() < 1e-12);
        let expected_p = student_t_two_sided(0.8 * libm::sqrt(2.0 / 0.36), 2.0);
        assert!((r.p_value - expected_p).abs() < 1e-12);
        assert!((r.p_value - 0.2).abs() < 1e-9);
        assert!(pearson_r(&x, &[1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(pearson_r(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn welch_examples() {
        let same = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
        let apart = welch_t(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(apart.method, Method::Degenerate);
        assert_eq!(apart.p_value, 0.0);
        assert!(apart.statistic.is_infinite() && apart.statistic < 0.0);
        let t = welch_t(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
        assert!((t.statistic + 1.224_744_871_391_589).abs() < 1e-12);
        // df = 4 for equal variances and sizes
        assert!((t.p_value - student_t_two_sided(-1.224_744_871_391_589, 4.0)).abs() < 1e-12);
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn stars_thresholds() {
        assert_eq!(stars(0.009), "**");
        assert_eq!(stars(0.01), "*");
        assert_eq!(stars(0.049), "*");
        assert_eq!(stars(0.05), "");
    }
}
