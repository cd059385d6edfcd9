#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sencorp::corpus::CorpusConfig;
use sencorp::{BaseEmbedding, Document, EncoderSpec, ProjectionHead, Sentiment, StandardCorpus};

/// Square identity head, so a dense base vector is its own embedding.
pub fn identity(dim: usize) -> ProjectionHead {
    let rows = (0..dim)
        .map(|r| (0..dim).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    ProjectionHead::from_rows(rows, 1).unwrap()
}

pub fn item(id: &str, label: Sentiment, values: &[f64]) -> (Document, BaseEmbedding) {
    (
        Document::new(id, format!("text {id}"), Some(label)).cleaned(),
        BaseEmbedding::Dense { values: values.to_vec() },
    )
}

pub fn random_items(n_per_class: usize, dim: usize, seed: u64, prefix: &str) -> Vec<(Document, BaseEmbedding)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..n_per_class {
        for (label, shift) in [(Sentiment::Negative, -1.0), (Sentiment::Positive, 1.0)] {
            let values: Vec<f64> = (0..dim)
                .map(|d| if d == 0 { shift } else { 0.0 } + rng.random_range(-1.0..1.0))
                .collect();
            out.push(item(&format!("{prefix}{}-{i:03}", label.as_str()), label, &values));
        }
    }
    out
}

pub fn config(k: usize, dedup: f64, recluster: usize) -> CorpusConfig {
    CorpusConfig {
        k_per_class: k,
        dedup_threshold: dedup,
        recluster_threshold: recluster,
    }
}

pub fn build(items: Vec<(Document, BaseEmbedding)>, dim: usize, cfg: CorpusConfig) -> StandardCorpus {
    StandardCorpus::build(items, cfg, 9, &identity(dim), EncoderSpec::default()).unwrap()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
