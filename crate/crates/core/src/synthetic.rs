//! Seeded synthetic data for tests, demos and the fixture datasets.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embedding::BaseEmbedding;
use crate::ingest::{Document, Sentiment};
use crate::rng::seeded;

/// Two isotropic unit-variance Gaussians in `dim` dimensions whose means sit at
/// `-separation/2` and `+separation/2` along a random unit direction. Classes
/// alternate, negative first.
pub fn two_gaussians(
    n_per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Vec<(Sentiment, BaseEmbedding)> {
    let mut rng = seeded(seed);
    let mut dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|v| *v /= norm);

    let mut out = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        for (class, sign) in [(Sentiment::Negative, -0.5), (Sentiment::Positive, 0.5)] {
            let values = dir
                .iter()
                .map(|d| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sign * separation * d + z
                })
                .collect::<Vec<f64>>();
            out.push((class, BaseEmbedding::Dense { values }));
        }
    }
    out
}

/// The reference contrastive-training sanity task: two Gaussians 6 units apart
/// in 16 dimensions, projected to 4, trained for 500 steps of 32 pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoGaussianTask {
    pub in_dim: usize,
    pub out_dim: usize,
    pub separation: f64,
    pub n_train_per_class: usize,
    pub n_test_per_class: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub margin: f64,
}

impl Default for TwoGaussianTask {
    fn default() -> Self {
        TwoGaussianTask {
            in_dim: 16,
            out_dim: 4,
            separation: 6.0,
            n_train_per_class: 200,
            n_test_per_class: 100,
            batch_size: 32,
            steps: 500,
            learning_rate: 0.05,
            margin: 1.0,
        }
    }
}

pub type Labelled = Vec<(Sentiment, BaseEmbedding)>;

impl TwoGaussianTask {
    /// Train and test draws share the class means; the test draw uses a
    /// different noise stream.
    pub fn data(&self, seed: u64) -> (Labelled, Labelled) {
        let n = self.n_train_per_class + self.n_test_per_class;
        let mut all = two_gaussians(n, self.in_dim, self.separation, seed);
        let test = all.split_off(2 * self.n_train_per_class);
        (all, test)
    }

    /// One epoch of exactly `steps` batches.
    pub fn train_config(&self, seed: u64) -> crate::trainer::TrainConfig {
        crate::trainer::TrainConfig {
            margin: self.margin,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: 1,
            seed,
            like_fraction: 0.5,
            pairs_per_epoch: Some(self.batch_size * self.steps),
        }
    }
}

const NEGATIVE_WORDS: &[&str] = &[
    "sad", "tired", "miss", "hate", "sick", "lonely", "awful", "cry", "bored", "hurts", "worst",
    "stuck", "exhausted", "depressing", "ugh", "headache", "broke", "alone", "sorry", "lost",
];
const POSITIVE_WORDS: &[&str] = &[
    "happy", "love", "great", "awesome", "fun", "thanks", "excited", "yay", "beautiful", "lol",
    "amazing", "enjoy", "glad", "best", "nice", "smile", "cool", "sunshine", "proud", "win",
];
const NEUTRAL_WORDS: &[&str] = &[
    "i", "the", "today", "work", "school", "home", "my", "so", "is", "at", "night", "day", "to",
    "just", "and", "it", "friends", "weekend", "morning", "this", "going", "now", "with", "again",
];

/// Tweet-like texts: neutral filler plus class-indicative words, with a small
/// chance of an opposite-class word, a mention, a hashtag or a URL.
pub fn synthetic_tweets(n_per_class: usize, seed: u64) -> Vec<Document> {
    let mut rng = seeded(seed);
    let mut docs = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class {
        for class in Sentiment::ALL {
            let (own, other) = match class {
                Sentiment::Negative => (NEGATIVE_WORDS, POSITIVE_WORDS),
                Sentiment::Positive => (POSITIVE_WORDS, NEGATIVE_WORDS),
            };
            let mut words: Vec<String> = Vec::new();
            for _ in 0..rng.random_range(3..8) {
                words.push(NEUTRAL_WORDS.choose(&mut rng).unwrap().to_string());
            }
            for _ in 0..rng.random_range(1..3) {
                let w = own.choose(&mut rng).unwrap();
                let at = rng.random_range(0..=words.len());
                words.insert(at, w.to_string());
            }
            if rng.random_bool(0.15) {
                let at = rng.random_range(0..=words.len());
                words.insert(at, other.choose(&mut rng).unwrap().to_string());
            }
            if rng.random_bool(0.2) {
                words.insert(0, format!("@user{}", rng.random_range(0..1000)));
            }
            if rng.random_bool(0.1) {
                words.push(format!("#{}", own.choose(&mut rng).unwrap()));
            }
            if rng.random_bool(0.1) {
                words.push(format!("http://t.co/{}", rng.random_range(0..100_000)));
            }
            if rng.random_bool(0.3) {
                if let Some(first) = words.first_mut() {
                    *first = capitalise(first);
                }
            }
            let id = (2 * i + class.index() + 1).to_string();
            docs.push(Document::new(id, words.join(" "), Some(class)));
        }
    }
    docs
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
