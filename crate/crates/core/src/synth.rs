//! Seeded template corpora for exercising the whole pipeline without real
//! data.
//!
//! The in-distribution generator draws each label's content words from its
//! own vocabulary, so the labels are separable by construction. The shifted
//! generator swaps those words for first-person symptom and wellbeing
//! phrases that the in-distribution vocabulary never contains.

use alloc::format;
use alloc::string::String;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Sample, Split};
use crate::model::Label;

const FRAMES: &[&str] = &[
    "I feel {a} {c}.",
    "He says he is {a} {c}.",
    "She told me she feels {a} {c}.",
    "My {r} says I seem {a} {c}.",
    "I am {a} and {b} {c}.",
    "Her {r} thinks she is {a} {c}.",
    "His {r} said he was {a} {c}.",
    "Honestly {a} {c}, and {b} too.",
];

const DEPRESSED_WORDS: &[&str] = &[
    "gloomy", "miserable", "worthless", "numb", "drained", "hollow", "bleak", "lonely", "broken",
    "heavy", "defeated", "lost",
];

const NON_DEPRESSED_WORDS: &[&str] = &[
    "cheerful", "thrilled", "grateful", "energized", "joyful", "relaxed", "lucky", "calm", "upbeat",
    "content", "inspired", "playful",
];

const RELATIONS: &[&str] = &["friend", "brother", "sister", "mom", "dad", "coworker", "roommate"];

const CONTEXTS: &[&str] = &[
    "today", "this week", "at work", "after school", "lately", "tonight", "at home", "since monday",
];

const SHIFTED_DEPRESSED: &[&str] = &[
    "i am tired all the time",
    "i feel like such a failure",
    "i can not sleep at night",
    "i never want to eat",
    "i feel hopeless and down",
    "sometimes i wish i were dead",
    "i have been restless and slow",
    "i struggle to focus on anything",
    "i don't feel like doing anything",
];

const SHIFTED_NON_DEPRESSED: &[&str] = &[
    "i feel rested and full of energy",
    "i love all my activities",
    "my family is proud of me",
    "i stay focused on things",
    "i have no problems with my appetite",
    "i am happy to be alive",
    "people say i keep a good pace",
];

const SHIFTED_CONTEXTS: &[&str] = &["during the winter", "in my new flat", "since the move", "on weekends"];

struct Draw(ChaCha8Rng);

impl Draw {
    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items[(self.0.next_u64() % items.len() as u64) as usize]
    }

    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn label_for(i: usize) -> Label {
    if i.is_multiple_of(2) {
        Label::Depressed
    } else {
        Label::NonDepressed
    }
}

/// `n` samples, alternating labels, split about 70/10/20 into
/// train/dev/test.
pub fn template_corpus(name: &str, n: usize, seed: u64) -> Corpus {
    let mut rng = Draw(ChaCha8Rng::seed_from_u64(seed));
    let samples = (0..n)
        .map(|i| {
            let label = label_for(i);
            let vocab = match label {
                Label::Depressed => DEPRESSED_WORDS,
                Label::NonDepressed => NON_DEPRESSED_WORDS,
            };
            let frame = rng.pick(FRAMES);
            let text = frame
                .replace("{a}", rng.pick(vocab))
                .replace("{b}", rng.pick(vocab))
                .replace("{r}", rng.pick(RELATIONS))
                .replace("{c}", rng.pick(CONTEXTS));
            let u = rng.unit();
            let split = if u < 0.7 {
                Split::Train
            } else if u < 0.8 {
                Split::Dev
            } else {
                Split::Test
            };
            Sample::new(format!("{name}-{i:05}"), capitalize(&text), label, split)
        })
        .collect();
    Corpus::new(name, samples)
        .expect("generated ids are unique")
        .with_provenance(format!("synthetic template corpus, n={n}, seed={seed}"))
}

/// `n` test-split samples whose label-bearing phrases share no content
/// words with [`template_corpus`].
pub fn shifted_corpus(name: &str, n: usize, seed: u64) -> Corpus {
    let mut rng = Draw(ChaCha8Rng::seed_from_u64(seed));
    let samples = (0..n)
        .map(|i| {
            let label = label_for(i);
            let phrases = match label {
                Label::Depressed => SHIFTED_DEPRESSED,
                Label::NonDepressed => SHIFTED_NON_DEPRESSED,
            };
            let text = format!("{} {}.", rng.pick(phrases), rng.pick(SHIFTED_CONTEXTS));
            Sample::new(format!("{name}-{i:05}"), capitalize(&text), label, Split::Test)
        })
        .collect();
    Corpus::new(name, samples)
        .expect("generated ids are unique")
        .with_provenance(format!("synthetic vocabulary-shifted corpus, n={n}, seed={seed}"))
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
