use std::collections::HashMap;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use sencorp::classifier::embed_text;
use sencorp::{
    assess_batch, semantic_search, CorpusStats, Pooling, Prediction, SearchHit, Sentiment, UpdateReport,
};

use crate::error::ApiError;
use crate::{AppState, Snapshot};

pub const MAX_ASSESS_TEXTS: usize = 1000;
pub const MAX_CONTRIBUTION_ITEMS: usize = 500;
pub const MAX_SIMILAR_K: usize = 100;
const DEFAULT_SIMILAR_K: usize = 5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssessRequest {
    pub texts: Vec<String>,
    #[serde(default)]
    pub pooling: Pooling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessResponse {
    pub predictions: Vec<Prediction>,
    pub snapshot_version: u64,
    pub head_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarResponse {
    pub matches: Vec<SearchHit>,
    pub snapshot_version: u64,
    pub head_version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContributionItem {
    pub text: String,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContributionRequest {
    pub items: Vec<ContributionItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub snapshot_version: u64,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/assess", post(assess))
        .route("/v1/similar", get(similar))
        .route("/v1/corpus/contributions", post(contribute))
        .route("/v1/corpus/stats", get(stats))
        .fallback(not_found)
        .with_state(state)
}

fn clinician(headers: &HeaderMap) -> &str {
    headers
        .get("x-clinician-id")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("-")
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request("invalid_json", e.body_text()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn healthz(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        snapshot_version: state.snapshot().corpus.snapshot_version(),
    })
}

async fn stats(State(state): State<AppState>) -> Json<CorpusStats> {
    Json(state.snapshot().corpus.stats())
}

async fn assess(
    State(state): State<AppState>,
    headers: HeaderMap,
    payload: Result<Json<AssessRequest>, JsonRejection>,
) -> Result<Json<AssessResponse>, ApiError> {
    let req = body(payload)?;
    if req.texts.is_empty() {
        return Err(ApiError::bad_request("empty_batch", "texts must not be empty"));
    }
    if req.texts.len() > MAX_ASSESS_TEXTS {
        return Err(ApiError::bad_request(
            "batch_too_large",
            format!("at most {MAX_ASSESS_TEXTS} texts per request"),
        )
        .with_details(json!({ "count": req.texts.len() })));
    }
    tracing::info!(clinician = clinician(&headers), texts = req.texts.len(), pooling = ?req.pooling, "assess");
    let snap = state.snapshot();
    blocking(move || {
        let predictions = assess_batch(&snap.corpus, &snap.head, &*snap.encoder, &req.texts, req.pooling)?;
        Ok(Json(AssessResponse {
            predictions,
            snapshot_version: snap.corpus.snapshot_version(),
            head_version: snap.corpus.head_version(),
        }))
    })
    .await
}

async fn similar(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<SimilarResponse>, ApiError> {
    let text = params
        .get("text")
        .ok_or_else(|| ApiError::bad_request("bad_request", "missing query parameter `text`"))?
        .clone();
    let class: Sentiment = params
        .get("class")
        .ok_or_else(|| ApiError::bad_request("bad_class", "missing query parameter `class`"))?
        .parse()
        .map_err(|_| ApiError::bad_request("bad_class", "class must be `negative` or `positive`"))?;
    let k = match params.get("k") {
        None => DEFAULT_SIMILAR_K,
        Some(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|k| (1..=MAX_SIMILAR_K).contains(k))
            .ok_or_else(|| ApiError::bad_request("bad_k", format!("k must be an integer in 1..={MAX_SIMILAR_K}")))?,
    };
    let snap = state.snapshot();
    blocking(move || {
        let q = embed_text(&snap.head, &*snap.encoder, &text)?;
        let matches = semantic_search(&snap.corpus, &q, class, k)?;
        Ok(Json(SimilarResponse {
            matches,
            snapshot_version: snap.corpus.snapshot_version(),
            head_version: snap.corpus.head_version(),
        }))
    })
    .await
}

async fn contribute(
    State(state): State<AppState>,
    headers: HeaderMap,
    payload: Result<Json<ContributionRequest>, JsonRejection>,
) -> Result<Json<UpdateReport>, ApiError> {
    if state.read_only() {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "read_only",
            "this server does not accept contributions",
        ));
    }
    let req = body(payload)?;
    if req.items.is_empty() {
        return Err(ApiError::bad_request("empty_batch", "items must not be empty"));
    }
    if req.items.len() > MAX_CONTRIBUTION_ITEMS {
        return Err(ApiError::bad_request(
            "batch_too_large",
            format!("at most {MAX_CONTRIBUTION_ITEMS} items per request"),
        )
        .with_details(json!({ "count": req.items.len() })));
    }
    let mut labels = Vec::with_capacity(req.items.len());
    for (index, item) in req.items.iter().enumerate() {
        let Some(raw) = &item.label else {
            return Err(ApiError::bad_request("unlabeled_item", format!("item {index} has no label"))
                .with_details(json!({ "index": index })));
        };
        let label: Sentiment = raw.parse().map_err(|_| {
            ApiError::bad_request("bad_label", format!("item {index} has label {raw:?}"))
                .with_details(json!({ "index": index }))
        })?;
        labels.push(label);
    }
    let who = clinician(&headers).to_string();

    let _writer = state.inner.writer.lock().await;
    let current = state.snapshot();
    let path = state.inner.corpus_path.clone();
    let (next, report) = blocking(move || {
        let texts = req.items.into_iter().map(|i| i.text).zip(labels).collect();
        let (corpus, report) = current.corpus.contributed_texts(texts, &current.head, &*current.encoder)?;
        if let Some(path) = &path {
            if let Err(e) = corpus.save(path) {
                tracing::error!(error = %e, "persisting contribution failed; restoring previous corpus");
                if let Err(restore) = current.corpus.save(path) {
                    tracing::error!(error = %restore, "restoring the previous corpus file failed");
                }
                return Err(ApiError::new(StatusCode::CONFLICT, "persistence_failed", e.to_string()));
            }
        }
        let next = Snapshot {
            corpus,
            head: current.head.clone(),
            encoder: current.encoder.clone(),
        };
        Ok((next, report))
    })
    .await?;
    state.publish(next);
    tracing::info!(
        clinician = %who,
        accepted = report.accepted,
        rejected = report.rejected_duplicates.len(),
        recluster = report.recluster_triggered,
        snapshot_version = report.new_snapshot_version,
        "contribution"
    );
    Ok(Json(report))
}
