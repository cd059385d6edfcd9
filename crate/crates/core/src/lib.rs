//! Sentiment screening against a curated standard corpus.
//!
//! Texts are cleaned, hashed into sparse base vectors and mapped through a
//! linear projection head tuned with a siamese contrastive loss. Labelled
//! exemplars form a standard corpus clustered per class with k-means; a query
//! takes the class of its most cosine-similar centroid and is reported with
//! its closest same-class exemplar and its mean similarity to the other class.
//! Experts can extend the corpus; near-duplicates are discarded and classes are
//! re-clustered once enough new material has arrived.

pub mod classifier;
pub mod clean;
pub mod corpus;
pub mod embedding;
pub mod encoder;
pub mod error;
pub mod features;
pub mod ingest;
pub mod kmeans;
pub mod metrics;
mod persist;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use classifier::{assess_batch, classify, semantic_search, Pooling, Prediction, SearchHit};
pub use clean::clean_text;
pub use corpus::{CorpusConfig, CorpusStats, StandardCorpus, UpdateReport};
pub use embedding::{cosine, distance, project, BaseEmbedding, Embedding, ProjectionHead};
pub use encoder::{EncoderSpec, HashingEncoder, LookupEncoder, TextEncoder};
pub use error::{Error, Result};
pub use features::{vectorize, SparseVector};
pub use ingest::{load_dataset, DatasetFormat, Document, Sentiment, Source};
pub use metrics::{accuracy_ci, rates, roc_auc, stratified_split, Confusion, MetricsSummary, RocCurve};
pub use trainer::{make_pairs, pair_gradients, pair_loss, train, PairKind, TrainConfig, TrainReport};
