use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use sencorp::classifier::embed_text;
use sencorp::{assess_batch, semantic_search, Pooling, Prediction, ProjectionHead, Sentiment, StandardCorpus};
use sencorp_service::{load_state, router, AppState, ServiceConfig};

use crate::{ensure, workspace_root, Outcome};

async fn call(app: &Router, req: Request<Body>) -> Result<(StatusCode, Value), String> {
    let res = app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
    let status = res.status();
    let bytes = res.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
    Ok((status, serde_json::from_slice(&bytes).map_err(|e| e.to_string())?))
}

async fn get(app: &Router, uri: &str) -> Result<(StatusCode, Value), String> {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: Value) -> Result<(StatusCode, Value), String> {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    call(app, req).await
}

fn ok_json(res: (StatusCode, Value), what: &str) -> Result<Value, String> {
    ensure(res.0 == StatusCode::OK, || format!("{what}: status {} {}", res.0, res.1))?;
    Ok(res.1)
}

fn start(dir: &std::path::Path, recluster_r: Option<usize>) -> Result<(AppState, PathBuf, PathBuf), String> {
    let src = workspace_root().join("fixtures/model");
    for name in ["head.json", "corpus.jsonl", "corpus.meta.json"] {
        std::fs::copy(src.join(name), dir.join(name)).map_err(|e| e.to_string())?;
    }
    let config = ServiceConfig {
        bind_addr: "127.0.0.1:0".parse().unwrap(),
        corpus_path: dir.join("corpus.jsonl"),
        head_path: dir.join("head.json"),
        read_only: false,
        dedup_tau: None,
        recluster_r,
    };
    let state = load_state(&config).map_err(|e| format!("{e:#}"))?;
    Ok((state, config.corpus_path, config.head_path))
}

/// Each endpoint against the library on the same snapshot.
async fn endpoints_match_library() -> Result<usize, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (state, corpus_path, head_path) = start(dir.path(), None)?;
    let app = router(state);
    let corpus = StandardCorpus::load(&corpus_path).map_err(|e| e.to_string())?;
    let head = ProjectionHead::load(&head_path).map_err(|e| e.to_string())?;
    let encoder = corpus.encoder().build().map_err(|e| e.to_string())?;
    let enc = &*encoder;
    let mut checked = 0;

    let texts: Vec<String> = ["so tired and alone tonight", "love this sunny weekend", "ugh work again"]
        .map(String::from)
        .to_vec();
    for pooling in [Pooling::PerText, Pooling::MeanPool] {
        let body = ok_json(post(&app, "/v1/assess", json!({ "texts": texts, "pooling": pooling })).await?, "assess")?;
        let got: Vec<Prediction> = serde_json::from_value(body["predictions"].clone()).map_err(|e| e.to_string())?;
        let want = assess_batch(&corpus, &head, enc, &texts, pooling).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("assess {pooling:?} differs from the library"))?;
        ensure(body["snapshot_version"] == corpus.snapshot_version(), || "assess snapshot_version".into())?;
        checked += 1;
    }

    let q = embed_text(&head, enc, "sad and lonely").map_err(|e| e.to_string())?;
    for class in Sentiment::ALL {
        let body = ok_json(
            get(&app, &format!("/v1/similar?text=sad%20and%20lonely&class={class}&k=7")).await?,
            "similar",
        )?;
        let want = semantic_search(&corpus, &q, class, 7).map_err(|e| e.to_string())?;
        ensure(body["matches"] == serde_json::to_value(&want).unwrap(), || {
            format!("similar {class} differs from the library")
        })?;
        checked += 1;
    }

    let body = ok_json(get(&app, "/v1/corpus/stats").await?, "stats")?;
    ensure(body == serde_json::to_value(corpus.stats()).unwrap(), || "stats differ".into())?;
    let body = ok_json(get(&app, "/healthz").await?, "healthz")?;
    ensure(body["snapshot_version"] == corpus.snapshot_version(), || "healthz version".into())?;
    checked += 2;

    let items = vec![
        ("a parcel went missing and nobody answers the phone".to_string(), Sentiment::Negative),
        ("the garden finally bloomed this spring".to_string(), Sentiment::Positive),
    ];
    let payload: Vec<Value> = items.iter().map(|(t, l)| json!({ "text": t, "label": l.as_str() })).collect();
    let body = ok_json(
        post(&app, "/v1/corpus/contributions", json!({ "items": payload })).await?,
        "contributions",
    )?;
    let (next, want) = corpus.contributed_texts(items, &head, enc).map_err(|e| e.to_string())?;
    ensure(body == serde_json::to_value(&want).unwrap(), || "contribution report differs".into())?;
    let saved = StandardCorpus::load(&corpus_path).map_err(|e| e.to_string())?;
    ensure(saved == next, || "persisted corpus differs from the library update".into())?;
    let body = ok_json(get(&app, "/v1/corpus/stats").await?, "stats after write")?;
    ensure(body == serde_json::to_value(next.stats()).unwrap(), || "stats after write differ".into())?;
    checked += 2;
    Ok(checked)
}

/// Readers racing one re-clustering contribution see only whole snapshots.
async fn readers_see_whole_snapshots() -> Result<(usize, usize), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (state, corpus_path, head_path) = start(dir.path(), Some(1))?;
    let app = router(state);
    let old = StandardCorpus::load(&corpus_path).map_err(|e| e.to_string())?;
    let head = ProjectionHead::load(&head_path).map_err(|e| e.to_string())?;
    let encoder = old.encoder().build().map_err(|e| e.to_string())?;
    let queries = ["so sad and tired", "love this sunny day", "missing you tonight"];

    let mut readers = Vec::new();
    for r in 0..8 {
        let app = app.clone();
        readers.push(tokio::spawn(async move {
            let mut seen = Vec::new();
            for i in 0..50 {
                let text = queries[(r + i) % queries.len()];
                let (status, body) = post(&app, "/v1/assess", json!({ "texts": [text] })).await?;
                ensure(status == StatusCode::OK, || format!("reader got {status}"))?;
                let p: Prediction =
                    serde_json::from_value(body["predictions"][0].clone()).map_err(|e| e.to_string())?;
                ensure(body["snapshot_version"] == p.snapshot_version, || "mixed versions in one response".into())?;
                seen.push((text, p));
                tokio::task::yield_now().await;
            }
            Ok::<_, String>(seen)
        }));
    }
    let report = ok_json(
        post(
            &app,
            "/v1/corpus/contributions",
            json!({ "items": [
                { "text": "the bus left without me in the rain", "label": "negative" },
                { "text": "got the job offer this morning", "label": "positive" },
            ] }),
        )
        .await?,
        "contribution",
    )?;
    ensure(report["recluster_triggered"] == true, || "contribution did not re-cluster".into())?;
    let new = StandardCorpus::load(&corpus_path).map_err(|e| e.to_string())?;

    let mut observed = 0;
    let mut versions = std::collections::BTreeSet::new();
    for reader in readers {
        for (text, p) in reader.await.map_err(|e| e.to_string())?? {
            let corpus = if p.snapshot_version == old.snapshot_version() {
                &old
            } else if p.snapshot_version == new.snapshot_version() {
                &new
            } else {
                return Err(format!("partial snapshot version {}", p.snapshot_version));
            };
            let want = sencorp::classify(corpus, &head, &*encoder, text, "0").map_err(|e| e.to_string())?;
            ensure(p == want, || format!("prediction at version {} differs", p.snapshot_version))?;
            versions.insert(p.snapshot_version);
            observed += 1;
        }
    }
    Ok((observed, versions.len()))
}

pub fn contract() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(async {
        let checked = endpoints_match_library().await?;
        let (observed, versions) = readers_see_whole_snapshots().await?;
        Ok(format!(
            "{checked} endpoint checks equal the library; {observed} concurrent reads saw {versions} whole snapshot version(s)"
        ))
    })
}
