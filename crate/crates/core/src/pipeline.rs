//! End-to-end evaluation: split, train, build the corpus from the training
//! side, classify the held-out side, and score.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifier::{predict, Prediction};
use crate::corpus::{CorpusConfig, StandardCorpus};
use crate::embedding::{project, BaseEmbedding, ProjectionHead, DEFAULT_OUT_DIM};
use crate::encoder::{EncoderSpec, HashingEncoder, TextEncoder};
use crate::error::{Error, Result};
use crate::features::{DEFAULT_HASH_DIM, DEFAULT_NGRAM_MAX};
use crate::ingest::{Document, Sentiment};
use crate::metrics::{accuracy_ci, rates, roc_auc, stratified_split, Confusion, MetricsSummary, RocCurve};
use crate::rng::{derive_seed, seeded};
use crate::trainer::{train, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub test_fraction: f64,
    pub hash_dim: usize,
    pub ngram_max: usize,
    pub out_dim: usize,
    /// `train.seed` is ignored; it is derived from `seed`.
    pub train: TrainConfig,
    pub corpus: CorpusConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            test_fraction: 0.10,
            hash_dim: DEFAULT_HASH_DIM,
            ngram_max: DEFAULT_NGRAM_MAX,
            out_dim: DEFAULT_OUT_DIM,
            train: TrainConfig::default(),
            corpus: CorpusConfig::default(),
        }
    }
}

/// Sub-seeds derived from the pipeline seed, one per stochastic stage.
pub struct StageSeeds {
    pub split: u64,
    pub init: u64,
    pub train: u64,
    pub cluster: u64,
}

impl StageSeeds {
    pub fn from(seed: u64) -> Self {
        StageSeeds {
            split: derive_seed(seed, 0),
            init: derive_seed(seed, 1),
            train: derive_seed(seed, 2),
            cluster: derive_seed(seed, 3),
        }
    }
}

/// Median top-match vs. opposite-class average similarity over the held-out
/// negative queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub n_queries: usize,
    pub median_top_match: f64,
    pub median_opposite_avg: f64,
}

impl GapStats {
    pub fn gap(&self) -> f64 {
        self.median_top_match - self.median_opposite_avg
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub summary: MetricsSummary,
    pub confusion: Confusion,
    pub roc: RocCurve,
    pub gap: GapStats,
    /// `(actual, prediction)` for every held-out document in test order.
    pub predictions: Vec<(Sentiment, Prediction)>,
    pub train_report: TrainReport,
    pub head: ProjectionHead,
    pub corpus: StandardCorpus,
    /// Held-out texts whose embedding was zero and so could not be scored.
    pub skipped_queries: usize,
}

/// Cleans every document and drops the ones with nothing left.
pub fn prepare_documents(docs: Vec<Document>) -> (Vec<Document>, usize) {
    let before = docs.len();
    let kept: Vec<Document> = docs
        .into_iter()
        .map(Document::cleaned)
        .filter(|d| !d.clean_text.is_empty())
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// Seeded sample of `per_class` documents from each class, in input order.
pub fn balanced_subset(docs: &[Document], per_class: usize, seed: u64) -> Result<Vec<Document>> {
    let mut rng = seeded(seed);
    let mut keep = vec![false; docs.len()];
    for class in Sentiment::ALL {
        let mut members: Vec<usize> = docs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.label == Some(class))
            .map(|(i, _)| i)
            .collect();
        if members.len() < per_class {
            return Err(Error::InsufficientClass {
                class,
                needed: per_class,
                found: members.len(),
            });
        }
        members.shuffle(&mut rng);
        for &i in &members[..per_class] {
            keep[i] = true;
        }
    }
    Ok(docs
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(d, _)| d.clone())
        .collect())
}

pub fn encode_documents(
    docs: &[Document],
    encoder: &dyn TextEncoder,
) -> Result<Vec<(Document, BaseEmbedding)>> {
    docs.iter()
        .map(|d| {
            let clean = if d.clean_text.is_empty() {
                crate::clean::clean_text(&d.raw_text)
            } else {
                d.clean_text.clone()
            };
            Ok((d.clone(), encoder.encode(&clean)?))
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Runs the full hold-out evaluation on labelled documents.
pub fn run_eval(docs: Vec<Document>, cfg: &PipelineConfig) -> Result<EvalOutcome> {
    let seeds = StageSeeds::from(cfg.seed);
    let (docs, dropped) = prepare_documents(docs);
    if dropped > 0 {
        tracing::warn!(dropped, "documents empty after cleaning were skipped");
    }
    let (train_docs, test_docs) = stratified_split(&docs, cfg.test_fraction, seeds.split)?;
    if test_docs.is_empty() {
        return Err(Error::InvalidConfig("test split is empty".into()));
    }

    let encoder = HashingEncoder::new(cfg.hash_dim, cfg.ngram_max)?;
    let train_items = encode_documents(&train_docs, &encoder)?;
    let examples: Vec<(Sentiment, BaseEmbedding)> = train_items
        .iter()
        .map(|(d, b)| Ok((d.require_label()?, b.clone())))
        .collect::<Result<_>>()?;

    let init = ProjectionHead::random(cfg.hash_dim, cfg.out_dim, seeds.init)?;
    let train_cfg = TrainConfig {
        seed: seeds.train,
        ..cfg.train.clone()
    };
    let (head, train_report) = train(&train_cfg, &examples, &init)?;
    drop(examples);

    let corpus = StandardCorpus::build(
        train_items,
        cfg.corpus,
        seeds.cluster,
        &head,
        EncoderSpec::Hashing {
            dim: cfg.hash_dim,
            ngram_max: cfg.ngram_max,
        },
    )?;

    let mut predictions = Vec::with_capacity(test_docs.len());
    let mut skipped = 0usize;
    for doc in &test_docs {
        let actual = doc.require_label()?;
        let q = project(&head, &encoder.encode(&doc.clean_text)?)?;
        match predict(&corpus, &q, &doc.id) {
            Ok(p) => predictions.push((actual, p)),
            Err(Error::UndefinedSimilarity) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 {
        tracing::warn!(skipped, "held-out texts with a zero embedding were not scored");
    }

    let confusion = Confusion::from_pairs(predictions.iter().map(|(a, p)| (*a, p.chosen_class)));
    let (accuracy, ci_half_width) = accuracy_ci(confusion.correct(), confusion.total())?;
    let (tpr, fpr) = rates(&confusion)?;
    let scores: Vec<f64> = predictions.iter().map(|(_, p)| p.score).collect();
    let labels: Vec<Sentiment> = predictions.iter().map(|(a, _)| *a).collect();
    let roc = roc_auc(&scores, &labels)?;

    let negatives: Vec<&Prediction> = predictions
        .iter()
        .filter(|(a, _)| *a == Sentiment::Negative)
        .map(|(_, p)| p)
        .collect();
    let mut top: Vec<f64> = negatives.iter().map(|p| p.top_match.similarity).collect();
    let mut opp: Vec<f64> = negatives.iter().map(|p| p.opposite_avg_similarity).collect();
    let gap = GapStats {
        n_queries: negatives.len(),
        median_top_match: median(&mut top).unwrap_or(f64::NAN),
        median_opposite_avg: median(&mut opp).unwrap_or(f64::NAN),
    };

    Ok(EvalOutcome {
        summary: MetricsSummary {
            accuracy,
            ci_half_width,
            auc: roc.auc,
            tpr,
            fpr,
            n_test: confusion.total(),
        },
        confusion,
        roc,
        gap,
        predictions,
        train_report,
        head,
        corpus,
        skipped_queries: skipped,
    })
}
