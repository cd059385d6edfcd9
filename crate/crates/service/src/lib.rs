//! JSON-over-HTTP front end for a standard corpus: assessment, similar-case
//! lookup, expert contributions and corpus stats under `/v1`.
//!
//! Readers take an `Arc` of the current snapshot and never wait on writers.
//! Contributions are serialized by one writer lock, built on a private copy,
//! persisted, and only then published.

mod error;
mod routes;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use anyhow::{bail, Context};
use sencorp::{ProjectionHead, StandardCorpus, TextEncoder};

pub use error::ApiError;
pub use routes::{
    router, AssessRequest, AssessResponse, ContributionItem, ContributionRequest, Health, SimilarResponse,
    MAX_ASSESS_TEXTS, MAX_CONTRIBUTION_ITEMS, MAX_SIMILAR_K,
};

pub const API_VERSION: &str = "v1";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind_addr: SocketAddr,
    pub corpus_path: PathBuf,
    pub head_path: PathBuf,
    pub read_only: bool,
    pub dedup_tau: Option<f64>,
    pub recluster_r: Option<usize>,
}

/// Everything a request needs, published as one unit.
pub struct Snapshot {
    pub corpus: StandardCorpus,
    pub head: Arc<ProjectionHead>,
    pub encoder: Arc<dyn TextEncoder>,
}

impl Snapshot {
    pub fn new(corpus: StandardCorpus, head: ProjectionHead) -> sencorp::Result<Self> {
        let encoder = corpus.encoder().build()?;
        Ok(Snapshot {
            corpus,
            head: Arc::new(head),
            encoder,
        })
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    current: RwLock<Arc<Snapshot>>,
    writer: tokio::sync::Mutex<()>,
    corpus_path: Option<PathBuf>,
    read_only: bool,
}

impl AppState {
    /// `corpus_path: None` keeps contributions in memory only.
    pub fn new(snapshot: Snapshot, corpus_path: Option<PathBuf>, read_only: bool) -> Self {
        AppState {
            inner: Arc::new(Inner {
                current: RwLock::new(Arc::new(snapshot)),
                writer: tokio::sync::Mutex::new(()),
                corpus_path,
                read_only,
            }),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.inner.current.read().expect("snapshot lock poisoned").clone()
    }

    pub fn read_only(&self) -> bool {
        self.inner.read_only
    }

    fn publish(&self, next: Snapshot) {
        *self.inner.current.write().expect("snapshot lock poisoned") = Arc::new(next);
    }
}

/// Loads and cross-checks the head and corpus; any inconsistency is fatal.
pub fn load_state(config: &ServiceConfig) -> anyhow::Result<AppState> {
    let head = ProjectionHead::load(&config.head_path)
        .with_context(|| format!("loading head {}", config.head_path.display()))?;
    let mut corpus = StandardCorpus::load(&config.corpus_path)
        .with_context(|| format!("loading corpus {}", config.corpus_path.display()))?;
    if corpus.head_version() != head.version() {
        bail!(
            "corpus was embedded with head version {}, head file is version {}",
            corpus.head_version(),
            head.version()
        );
    }
    corpus.check_against_head(&head)?;
    corpus.set_thresholds(config.dedup_tau, config.recluster_r)?;
    let snapshot = Snapshot::new(corpus, head)?;
    if snapshot.encoder.dim() != snapshot.head.in_dim() {
        bail!(
            "encoder produces {} dimensions, head expects {}",
            snapshot.encoder.dim(),
            snapshot.head.in_dim()
        );
    }
    Ok(AppState::new(snapshot, Some(config.corpus_path.clone()), config.read_only))
}

pub async fn serve_on(listener: tokio::net::TcpListener, state: AppState) -> anyhow::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let state = load_state(&config)?;
    let listener = tokio::net::TcpListener::bind(config.bind_addr)
        .await
        .with_context(|| format!("binding {}", config.bind_addr))?;
    let snap = state.snapshot();
    tracing::info!(
        addr = %listener.local_addr()?,
        exemplars = snap.corpus.len(),
        snapshot_version = snap.corpus.snapshot_version(),
        read_only = config.read_only,
        "listening"
    );
    drop(snap);
    serve_on(listener, state).await
}
