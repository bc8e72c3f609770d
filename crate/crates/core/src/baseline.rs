//! Hashed bag-of-n-grams logistic regression used as the builtin reference
//! classifier.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split};
use crate::model::{ModelDescriptor, Prediction, Scorer};
use crate::textops::words;
use crate::{Error, Result};

pub const MODEL_NAME: &str = "bow-logreg";
pub const FORMAT: &str = "deck-bow-logreg";
pub const FORMAT_VERSION: u32 = 1;
pub const MIN_HASH_DIM: usize = 1 << 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hash_dim: usize,
    pub l2: f64,
    /// 1 for unigrams only, 2 for unigrams plus bigrams.
    pub ngram: u8,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 300,
            hash_dim: 1 << 16,
            l2: 1e-4,
            ngram: 2,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.hash_dim.is_power_of_two() || self.hash_dim < MIN_HASH_DIM {
            return Err(Error::InvalidInput(format!(
                "hash_dim must be a power of two >= {MIN_HASH_DIM}, got {}",
                self.hash_dim
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidInput("learning_rate must be positive".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidInput("l2 must be non-negative".into()));
        }
        if !(1..=2).contains(&self.ngram) {
            return Err(Error::InvalidInput("ngram must be 1 or 2".into()));
        }
        Ok(())
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(state, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Bucket and sign of one n-gram under a seed-salted FNV-1a hash.
pub fn hash_feature(feature: &str, seed: u64, hash_dim: usize) -> (usize, f64) {
    let h = fnv1a(fnv1a(FNV_OFFSET, &seed.to_le_bytes()), feature.as_bytes());
    let bucket = (h as usize) & (hash_dim - 1);
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

/// Sparse, L2-normalized hashed n-gram counts, sorted by bucket.
pub fn featurize(text: &str, seed: u64, hash_dim: usize, ngram: u8) -> Vec<(usize, f64)> {
    let tokens: Vec<String> = words(text).collect();
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut add = |f: &str| {
        let (b, s) = hash_feature(f, seed, hash_dim);
        *counts.entry(b).or_insert(0.0) += s;
    };
    for t in &tokens {
        add(t);
    }
    if ngram >= 2 {
        for pair in tokens.windows(2) {
            add(&format!("{} {}", pair[0], pair[1]));
        }
    }
    let norm = libm::sqrt(counts.values().map(|v| v * v).sum::<f64>());
    counts
        .into_iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|(b, v)| (b, v / norm))
        .collect()
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub format: String,
    pub format_version: u32,
    pub hash_dim: usize,
    pub seed: u64,
    pub ngram: u8,
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl BaselineModel {
    /// Untrained model: every prediction is 0.5.
    pub fn zeros(hash_dim: usize, seed: u64, ngram: u8) -> Self {
        Self {
            format: FORMAT.into(),
            format_version: FORMAT_VERSION,
            hash_dim,
            seed,
            ngram,
            bias: 0.0,
            weights: vec![0.0; hash_dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT || self.format_version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format {} v{}",
                self.format, self.format_version
            )));
        }
        if !self.hash_dim.is_power_of_two() || self.hash_dim < MIN_HASH_DIM || self.weights.len() != self.hash_dim {
            return Err(Error::Schema(format!(
                "model has {} weights for hash_dim {}",
                self.weights.len(),
                self.hash_dim
            )));
        }
        if !(1..=2).contains(&self.ngram) {
            return Err(Error::Schema("ngram must be 1 or 2".into()));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Schema("model weights must be finite".into()));
        }
        Ok(())
    }

    pub fn features(&self, text: &str) -> Vec<(usize, f64)> {
        featurize(text, self.seed, self.hash_dim, self.ngram)
    }

    pub fn logit(&self, text: &str) -> f64 {
        self.features(text)
            .iter()
            .map(|&(b, v)| self.weights[b] * v)
            .sum::<f64>()
            + self.bias
    }

    pub fn predict_proba(&self, text: &str) -> f64 {
        logistic(self.logit(text))
    }

    pub fn predict(&self, key: &str, text: &str) -> Prediction {
        Prediction::new(key, self.predict_proba(text)).expect("logistic output lies in [0, 1]")
    }

    /// 64-bit FNV-1a digest of the parameters, used to version cached
    /// predictions.
    pub fn fingerprint(&self) -> u64 {
        let mut h = fnv1a(FNV_OFFSET, &(self.hash_dim as u64).to_le_bytes());
        h = fnv1a(h, &self.seed.to_le_bytes());
        h = fnv1a(h, &[self.ngram]);
        h = fnv1a(h, &self.bias.to_bits().to_le_bytes());
        for w in &self.weights {
            h = fnv1a(h, &w.to_bits().to_le_bytes());
        }
        h
    }

    pub fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor::new(MODEL_NAME, format!("{FORMAT_VERSION}.{:016x}", self.fingerprint()))
    }

    pub fn into_scorer(self) -> BaselineScorer {
        let d = self.descriptor();
        BaselineScorer {
            id: format!("{}@{}", d.name, d.version),
            model: self,
        }
    }
}

pub struct BaselineScorer {
    id: String,
    pub model: BaselineModel,
}

impl Scorer for BaselineScorer {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn score(&mut self, items: &[(&str, &str)]) -> Result<Vec<Prediction>> {
        Ok(items.iter().map(|(k, t)| self.model.predict(k, t)).collect())
    }
}

/// Featurized training examples.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    features: Vec<Vec<(usize, f64)>>,
    targets: Vec<f64>,
    l2: f64,
}

impl TrainingSet {
    pub fn new(texts: &[(&str, bool)], seed: u64, hash_dim: usize, ngram: u8, l2: f64) -> Self {
        Self {
            features: texts.iter().map(|(t, _)| featurize(t, seed, hash_dim, ngram)).collect(),
            targets: texts.iter().map(|(_, y)| if *y { 1.0 } else { 0.0 }).collect(),
            l2,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Mean logistic loss plus `l2 / 2 * |w|^2` (bias unpenalized), with its
    /// gradient with respect to the weights and the bias.
    pub fn loss_and_gradient(&self, weights: &[f64], bias: f64) -> (f64, Vec<f64>, f64) {
        let n = self.len() as f64;
        let mut grad = vec![0.0; weights.len()];
        let mut grad_bias = 0.0;
        let mut loss = 0.0;
        for (x, &y) in self.features.iter().zip(&self.targets) {
            let z = x.iter().map(|&(b, v)| weights[b] * v).sum::<f64>() + bias;
            loss += softplus(z) - y * z;
            let r = (logistic(z) - y) / n;
            for &(b, v) in x {
                grad[b] += r * v;
            }
            grad_bias += r;
        }
        let mut penalty = 0.0;
        for (g, w) in grad.iter_mut().zip(weights) {
            *g += self.l2 * w;
            penalty += w * w;
        }
        (loss / n + self.l2 / 2.0 * penalty, grad, grad_bias)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub n_train: usize,
    /// Objective value before each epoch, then after the last.
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent from zero on the train split.
pub fn train_baseline(corpus: &Corpus, config: &BaselineConfig, seed: u64) -> Result<(BaselineModel, TrainingLog)> {
    config.validate()?;
    let examples: Vec<(&str, bool)> = corpus
        .samples()
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| (s.text.as_str(), s.label.is_depressed()))
        .collect();
    if examples.is_empty() {
        return Err(Error::Training(format!("corpus {:?} has no train samples", corpus.name())));
    }
    let positives = examples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::Training(format!(
            "train split of {:?} holds a single label; both are required",
            corpus.name()
        )));
    }
    let data = TrainingSet::new(&examples, seed, config.hash_dim, config.ngram, config.l2);
    let mut model = BaselineModel::zeros(config.hash_dim, seed, config.ngram);
    let mut losses = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        let (loss, grad, grad_bias) = data.loss_and_gradient(&model.weights, model.bias);
        losses.push(loss);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        model.bias -= config.learning_rate * grad_bias;
    }
    losses.push(data.loss_and_gradient(&model.weights, model.bias).0);
    model.validate()?;
    Ok((
        model,
        TrainingLog {
            n_train: examples.len(),
            losses,
        },
    ))
}
