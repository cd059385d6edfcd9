//! Inference: embed a query, pick the class of the most cosine-similar
//! centroid, then attach the comparative report (best same-class exemplar and
//! mean similarity to the opposite class).

use serde::{Deserialize, Serialize};

use crate::clean::clean_text;
use crate::corpus::StandardCorpus;
use crate::embedding::{cosine, project, Embedding, ProjectionHead};
use crate::encoder::TextEncoder;
use crate::error::{Error, Result};
use crate::ingest::Sentiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidSimilarity {
    pub cluster_id: usize,
    pub class_label: Sentiment,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopMatch {
    pub exemplar_id: String,
    pub clean_text: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub query_id: String,
    pub chosen_class: Sentiment,
    pub centroid_similarities: Vec<CentroidSimilarity>,
    pub top_match: TopMatch,
    pub opposite_avg_similarity: f64,
    /// Best negative-centroid similarity minus best positive-centroid
    /// similarity; larger means more depressive-leaning.
    pub score: f64,
    pub snapshot_version: u64,
    pub head_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub exemplar_id: String,
    pub clean_text: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    PerText,
    MeanPool,
}

pub const POOLED_QUERY_ID: &str = "pooled";

/// Exact top-`k` exemplars of `class` by cosine to `q`, best first; equal
/// similarities are ordered by ascending exemplar id.
pub fn semantic_search(
    corpus: &StandardCorpus,
    q: &Embedding,
    class: Sentiment,
    k: usize,
) -> Result<Vec<SearchHit>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if q.is_zero() {
        return Err(Error::UndefinedSimilarity);
    }
    let mut hits = corpus
        .exemplars_of(class)
        .map(|e| {
            Ok(SearchHit {
                exemplar_id: e.doc.id.clone(),
                clean_text: e.doc.clean_text.clone(),
                similarity: cosine(q, &e.embedding)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if hits.is_empty() {
        return Err(Error::EmptyClass(class));
    }
    // Exemplars arrive in id order and the sort is stable.
    hits.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
    hits.truncate(k);
    Ok(hits)
}

/// Clean, encode and project one text.
pub fn embed_text(head: &ProjectionHead, encoder: &dyn TextEncoder, text: &str) -> Result<Embedding> {
    let clean = clean_text(text);
    if clean.is_empty() {
        return Err(Error::EmptyText);
    }
    let e = project(head, &encoder.encode(&clean)?)?;
    if e.is_zero() {
        return Err(Error::UndefinedSimilarity);
    }
    Ok(e)
}

/// Classifies an already embedded query against `corpus`.
pub fn predict(corpus: &StandardCorpus, q: &Embedding, query_id: &str) -> Result<Prediction> {
    if q.is_zero() {
        return Err(Error::UndefinedSimilarity);
    }
    let mut sims = Vec::with_capacity(corpus.centroids().len());
    let mut best: Option<&CentroidSimilarity> = None;
    let mut best_per_class = [f64::NEG_INFINITY; 2];
    for c in corpus.centroids() {
        let s = cosine(q, &c.values)?;
        sims.push(CentroidSimilarity {
            cluster_id: c.cluster_id,
            class_label: c.class_label,
            similarity: s,
        });
        let slot = &mut best_per_class[c.class_label.index()];
        *slot = slot.max(s);
    }
    // Centroids are ordered by (class, cluster id); a strict `>` keeps the
    // first of any tie, i.e. the lower class and then the lower cluster id.
    for s in &sims {
        if best.is_none_or(|b| s.similarity > b.similarity) {
            best = Some(s);
        }
    }
    let chosen = best
        .ok_or(Error::EmptyClass(Sentiment::Negative))?
        .class_label;

    let top = semantic_search(corpus, q, chosen, 1)?
        .into_iter()
        .next()
        .expect("non-empty class yields a hit");
    let opposite = corpus.class_average_similarity(q, chosen.opposite())?;

    Ok(Prediction {
        query_id: query_id.to_string(),
        chosen_class: chosen,
        centroid_similarities: sims,
        top_match: TopMatch {
            exemplar_id: top.exemplar_id,
            clean_text: top.clean_text,
            similarity: top.similarity,
        },
        opposite_avg_similarity: opposite,
        score: best_per_class[Sentiment::Negative.index()] - best_per_class[Sentiment::Positive.index()],
        snapshot_version: corpus.snapshot_version(),
        head_version: corpus.head_version(),
    })
}

fn check_head(corpus: &StandardCorpus, head: &ProjectionHead) -> Result<()> {
    if corpus.head_version() != head.version() {
        return Err(Error::InvalidConfig(format!(
            "corpus embedded with head version {}, query head is version {}",
            corpus.head_version(),
            head.version()
        )));
    }
    Ok(())
}

pub fn classify(
    corpus: &StandardCorpus,
    head: &ProjectionHead,
    encoder: &dyn TextEncoder,
    text: &str,
    query_id: &str,
) -> Result<Prediction> {
    check_head(corpus, head)?;
    predict(corpus, &embed_text(head, encoder, text)?, query_id)
}

/// Classifies a batch either text by text (query ids `"0"`, `"1"`, ...) or as
/// one mean-pooled query (id [`POOLED_QUERY_ID`]).
///
/// Fails with [`Error::EmptyBatch`] when every text cleans to nothing, and with
/// [`Error::ZeroEmbedding`] listing every text whose embedding is zero.
pub fn assess_batch(
    corpus: &StandardCorpus,
    head: &ProjectionHead,
    encoder: &dyn TextEncoder,
    texts: &[String],
    pooling: Pooling,
) -> Result<Vec<Prediction>> {
    check_head(corpus, head)?;
    let cleaned: Vec<String> = texts.iter().map(|t| clean_text(t)).collect();
    if cleaned.iter().all(String::is_empty) {
        return Err(Error::EmptyBatch);
    }
    let mut embeddings = Vec::with_capacity(texts.len());
    let mut zero = Vec::new();
    for (i, clean) in cleaned.iter().enumerate() {
        let e = if clean.is_empty() {
            Embedding::zeros(head.out_dim())
        } else {
            project(head, &encoder.encode(clean)?)?
        };
        if e.is_zero() {
            zero.push(i);
        }
        embeddings.push(e);
    }
    if !zero.is_empty() {
        return Err(Error::ZeroEmbedding { indices: zero });
    }

    match pooling {
        Pooling::PerText => embeddings
            .iter()
            .enumerate()
            .map(|(i, e)| predict(corpus, e, &i.to_string()))
            .collect(),
        Pooling::MeanPool => {
            let pooled = Embedding::mean(&embeddings).expect("batch is non-empty");
            if pooled.is_zero() {
                return Err(Error::ZeroEmbedding {
                    indices: (0..texts.len()).collect(),
                });
            }
            Ok(vec![predict(corpus, &pooled, POOLED_QUERY_ID)?])
        }
    }
}
