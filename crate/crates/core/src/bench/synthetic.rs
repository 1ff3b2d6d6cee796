//! Learnable synthetic corpora for desk-scale experiments.
//!
//! Each class owns three signature keywords. A text holds 2 to 4 signature
//! slots (each dropped with probability `dropout`, and drawn from a random
//! other class with probability `noise_level`) mixed into 5 to 15 words from a
//! shared noise vocabulary.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::augment::Thesaurus;
use crate::dataset::{LabeledCorpus, Observation, Provenance};
use crate::textproc::tokenize;
use crate::{Error, Result};

pub const KEYWORDS_PER_CLASS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub size: usize,
    /// Probability that a signature slot uses another class's keyword.
    pub noise_level: f64,
    /// Probability that a signature slot is dropped.
    pub dropout: f64,
    /// Size of the shared noise vocabulary.
    pub noise_vocab: usize,
}

impl SyntheticConfig {
    pub fn new(classes: usize, size: usize) -> Self {
        SyntheticConfig {
            classes,
            size,
            noise_level: 0.1,
            dropout: 0.3,
            noise_vocab: 300,
        }
    }
}

pub fn keyword(class: usize, j: usize) -> String {
    format!("sig{class}k{j}")
}

pub fn noise_word(k: usize) -> String {
    format!("w{k}")
}

pub fn class_name(class: usize) -> String {
    format!("class{class:02}")
}

/// Class whose keyword `token` is, if any.
pub fn keyword_class(token: &str) -> Option<usize> {
    let rest = token.strip_prefix("sig")?;
    let (class, j) = rest.split_once('k')?;
    let j: usize = j.parse().ok()?;
    (j < KEYWORDS_PER_CLASS).then_some(())?;
    class.parse().ok()
}

pub fn make_synthetic_corpus(
    config: &SyntheticConfig,
    rng: &mut impl Rng,
) -> Result<LabeledCorpus> {
    if config.classes < 2 {
        return Err(Error::Config(
            "a synthetic corpus needs at least two classes".into(),
        ));
    }
    if config.noise_vocab == 0 {
        return Err(Error::Config("noise vocabulary must be non-empty".into()));
    }
    let mut labels: Vec<usize> = (0..config.size).map(|i| i % config.classes).collect();
    labels.shuffle(rng);
    let observations = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut words: Vec<String> = (0..rng.gen_range(5..=15))
                .map(|_| noise_word(rng.gen_range(0..config.noise_vocab)))
                .collect();
            for _ in 0..rng.gen_range(2..=4) {
                if rng.gen::<f64>() < config.dropout {
                    continue;
                }
                let class = if rng.gen::<f64>() < config.noise_level {
                    let other = rng.gen_range(0..config.classes - 1);
                    if other >= label {
                        other + 1
                    } else {
                        other
                    }
                } else {
                    label
                };
                let at = rng.gen_range(0..=words.len());
                words.insert(at, keyword(class, rng.gen_range(0..KEYWORDS_PER_CLASS)));
            }
            Observation::new(format!("syn{i:05}"), words.join(" "), label)
        })
        .collect();
    LabeledCorpus::new(
        observations,
        (0..config.classes).map(class_name).collect(),
        Provenance {
            source: format!(
                "synthetic(classes={}, size={}, noise={}, dropout={})",
                config.classes, config.size, config.noise_level, config.dropout
            ),
            filters: Vec::new(),
        },
    )
}

/// Thesaurus for the synthetic vocabulary: keywords of one class are
/// mutual synonyms; noise words pair up (`w0`↔`w1`, `w2`↔`w3`, ...).
pub fn synthetic_thesaurus(classes: usize, noise_vocab: usize) -> Thesaurus {
    let mut t = Thesaurus::default();
    for c in 0..classes {
        let words: Vec<String> = (0..KEYWORDS_PER_CLASS).map(|j| keyword(c, j)).collect();
        for w in &words {
            t.insert(w, words.iter().map(String::as_str));
        }
    }
    for k in 0..noise_vocab {
        let partner = k ^ 1;
        if partner < noise_vocab {
            t.insert(&noise_word(k), [noise_word(partner).as_str()]);
        }
    }
    t
}

/// Predicts the class with the most signature keywords in `text`; ties and
/// keyword-free texts go to the lowest class index.
pub fn majority_signature(text: &str, classes: usize) -> usize {
    let mut votes = vec![0usize; classes];
    for t in tokenize(text).tokens() {
        if let Some(c) = keyword_class(t).filter(|&c| c < classes) {
            votes[c] += 1;
        }
    }
    let mut best = 0;
    for c in 1..classes {
        if votes[c] > votes[best] {
            best = c;
        }
    }
    best
}
