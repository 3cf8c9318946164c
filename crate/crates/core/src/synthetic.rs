//! Synthetic two-topic corpora with matching embedding tables, for smoke
//! runs and end-to-end tests without the real labeled data.
//!
//! Each topic owns a disjoint vocabulary of invented words. A document is
//! drawn from one topic, with a fraction of its tokens replaced by words
//! from a shared noise vocabulary. Topic words get vectors clustered around
//! a per-topic centre; noise words get vectors around the origin.

use std::collections::HashSet;

use rand::Rng;

use crate::corpus::{Dataset, Label, LabeledComment, ReviewComment};
use crate::embeddings::{EmbeddingKind, EmbeddingTable};
use crate::error::Result;
use crate::rng::{self, SeededRng};
use crate::textprep::{lowercase_token, stem, StopwordList};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub documents: usize,
    pub words_per_topic: usize,
    pub noise_words: usize,
    /// Share of tokens drawn from the noise vocabulary.
    pub noise_fraction: f64,
    pub dim: usize,
    /// Standard deviation of word vectors around their topic centre.
    pub spread: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            documents: 400,
            words_per_topic: 50,
            noise_words: 20,
            noise_fraction: 0.1,
            dim: 50,
            spread: 0.5,
            min_len: 8,
            max_len: 20,
            seed: rng::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    /// Keyed by the preprocessed (stemmed) form of each word.
    pub table: EmbeddingTable,
    pub violation_words: Vec<String>,
    pub other_words: Vec<String>,
    pub noise_words: Vec<String>,
}

const SYLLABLES: [&str; 20] = [
    "ka", "lo", "mi", "nu", "pe", "ra", "si", "to", "vu", "ze", "bo", "da", "fi", "gu", "ho", "ja", "ki", "ma", "no", "pu",
];

fn invent_words(count: usize, rng: &mut SeededRng, taken: &mut HashSet<String>) -> Vec<String> {
    let stop = StopwordList::english();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.random_range(3..=4);
        let mut w: String = (0..n).map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())]).collect();
        w.push('x');
        let key = stem(&lowercase_token(&w));
        if stop.contains(&w) || !taken.insert(key) {
            continue;
        }
        out.push(w);
    }
    out
}

fn gaussian(rng: &mut SeededRng) -> f64 {
    // Box–Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn two_topic_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    let mut rng = rng::seeded(spec.seed);
    let mut taken = HashSet::new();
    let violation_words = invent_words(spec.words_per_topic, &mut rng, &mut taken);
    let other_words = invent_words(spec.words_per_topic, &mut rng, &mut taken);
    let noise_words = invent_words(spec.noise_words, &mut rng, &mut taken);

    let centre = |rng: &mut SeededRng| -> Vec<f64> { (0..spec.dim).map(|_| gaussian(rng)).collect() };
    let centres = [centre(&mut rng), centre(&mut rng)];
    let mut pairs = Vec::new();
    for (words, c) in [(&violation_words, Some(&centres[0])), (&other_words, Some(&centres[1])), (&noise_words, None)] {
        for w in words {
            let v: Vec<f64> = (0..spec.dim)
                .map(|j| c.map_or(0.0, |c| c[j]) + spec.spread * gaussian(&mut rng))
                .collect();
            pairs.push((stem(&lowercase_token(w)), v));
        }
    }
    let table = EmbeddingTable::from_pairs("synthetic", EmbeddingKind::Custom, spec.dim, pairs)?;

    let mut items = Vec::with_capacity(spec.documents);
    for i in 0..spec.documents {
        let (label, vocab) = if i % 2 == 0 {
            (Label::Violation, &violation_words)
        } else {
            (Label::NonViolation, &other_words)
        };
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut words: Vec<String> = (0..len)
            .map(|_| {
                if rng.random::<f64>() < spec.noise_fraction {
                    noise_words[rng.random_range(0..noise_words.len())].clone()
                } else {
                    vocab[rng.random_range(0..vocab.len())].clone()
                }
            })
            .collect();
        // surface noise the preprocessor has to undo
        if let Some(first) = words.first_mut() {
            let mut cs = first.chars();
            if let Some(c) = cs.next() {
                *first = c.to_uppercase().chain(cs).collect();
            }
        }
        words.insert(len / 2, "the".into());
        let message = format!("{}.", words.join(" "));
        items.push(LabeledComment {
            comment: ReviewComment {
                id: format!("syn-{i}"),
                project: "synthetic".into(),
                change_number: 1000 + i as u64,
                revision_id: "1".into(),
                file_path: String::new(),
                line: None,
                message,
                url: String::new(),
                timestamp: "2024-01-01T00:00:00Z".into(),
            },
            label,
        });
    }
    Ok(SyntheticCorpus {
        dataset: Dataset::new("synthetic", spec.seed, items)?,
        table,
        violation_words,
        other_words,
        noise_words,
    })
}
