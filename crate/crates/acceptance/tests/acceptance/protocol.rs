use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sencorp::classifier::predict;
use sencorp::corpus::CorpusConfig;
use sencorp::{BaseEmbedding, Document, Embedding, EncoderSpec, ProjectionHead, Sentiment, StandardCorpus};

use crate::{ensure, Outcome};

const DIM: usize = 6;
const TAU: f64 = 0.95;

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn identity() -> ProjectionHead {
    let rows = (0..DIM)
        .map(|r| (0..DIM).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    ProjectionHead::from_rows(rows, 1).unwrap()
}

fn item(id: String, label: Sentiment, values: Vec<f64>) -> (Document, BaseEmbedding) {
    (
        Document::new(id.clone(), format!("text {id}"), Some(label)).cleaned(),
        BaseEmbedding::Dense { values },
    )
}

fn random_vec(rng: &mut ChaCha8Rng, label: Sentiment) -> Vec<f64> {
    let shift = if label == Sentiment::Negative { -1.0 } else { 1.0 };
    (0..DIM)
        .map(|d| if d == 0 { shift } else { 0.0 } + rng.random_range(-1.0..1.0))
        .collect()
}

fn values(b: &BaseEmbedding) -> Vec<f64> {
    match b {
        BaseEmbedding::Dense { values } => values.clone(),
        BaseEmbedding::Sparse(s) => s.to_dense(),
    }
}

/// Every centroid against the plain mean of its current members.
fn max_centroid_drift(corpus: &StandardCorpus) -> f64 {
    let mut worst: f64 = 0.0;
    for c in corpus.centroids() {
        let members: Vec<&Embedding> = corpus
            .exemplars()
            .filter(|e| e.cluster_id == c.cluster_id)
            .map(|e| &e.embedding)
            .collect();
        let n = members.len() as f64;
        for (d, v) in c.values.0.iter().enumerate() {
            let mean = members.iter().map(|m| m.0[d]).sum::<f64>() / n;
            worst = worst.max((v - mean).abs());
        }
    }
    worst
}

/// Replays the dedup rule item by item against the retained set.
fn replay(corpus: &StandardCorpus, items: &[(Document, BaseEmbedding)]) -> Vec<bool> {
    let mut retained: Vec<(Sentiment, Vec<f64>)> =
        corpus.exemplars().map(|e| (e.label(), e.embedding.0.clone())).collect();
    items
        .iter()
        .map(|(doc, base)| {
            let (label, v) = (doc.label.unwrap(), values(base));
            let keep = retained.iter().all(|(l, r)| *l != label || cos(&v, r) < TAU);
            if keep {
                retained.push((label, v));
            }
            keep
        })
        .collect()
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// Duplicate rejection, incremental centroids, the re-cluster trigger and a
/// persisted round trip, in one scripted sequence.
pub fn scripted_sequence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let head = identity();
    let mut seed_items = Vec::new();
    for i in 0..30 {
        for label in Sentiment::ALL {
            let v = random_vec(&mut rng, label);
            seed_items.push(item(format!("{}-{i:02}", label.as_str()), label, v));
        }
    }
    let config = CorpusConfig {
        k_per_class: 2,
        dedup_threshold: TAU,
        recluster_threshold: 1000,
    };
    let mut corpus =
        StandardCorpus::build(seed_items, config, 3, &head, EncoderSpec::default()).map_err(err)?;

    // 1. A copy of a stored exemplar is rejected at tau; the same vector under
    //    the other label is kept.
    let stored = corpus.exemplars_of(Sentiment::Negative).next().unwrap().clone();
    let copy = values(&stored.base);
    let (after, report) = corpus
        .contributed(
            vec![
                item("copy-neg".into(), Sentiment::Negative, copy.clone()),
                item("copy-pos".into(), Sentiment::Positive, copy),
            ],
            &head,
        )
        .map_err(err)?;
    ensure(report.rejected_duplicates.len() == 1, || format!("duplicate not rejected: {report:?}"))?;
    let rejection = report.rejected_duplicates[0].clone();
    ensure(rejection.new_id == "copy-neg" && rejection.matched_id == stored.doc.id, || {
        format!("wrong rejection {rejection:?}")
    })?;
    ensure(rejection.similarity >= TAU, || "rejection below tau".into())?;
    ensure(report.accepted_ids == ["copy-pos"], || "opposite-class copy not kept".into())?;
    corpus = after;

    // 2. A mixed batch: novel items plus near copies just above and below tau.
    let mut batch = Vec::new();
    for i in 0..20 {
        let label = Sentiment::ALL[i % 2];
        let v = random_vec(&mut rng, label);
        batch.push(item(format!("new-{i:02}"), label, v));
    }
    let base = values(&batch[0].1);
    let norm = base.iter().map(|x| x * x).sum::<f64>().sqrt();
    for (name, eps) in [("near-above", 0.05), ("near-below", 0.6)] {
        let mut v = base.clone();
        v[DIM - 1] += eps * norm;
        batch.push(item(name.into(), batch[0].0.label.unwrap(), v));
    }
    let expected = replay(&corpus, &batch);
    let (next, report) = corpus.contributed(batch.clone(), &head).map_err(err)?;
    let accepted: Vec<&str> = report.accepted_ids.iter().map(String::as_str).collect();
    let want: Vec<&str> = batch
        .iter()
        .zip(&expected)
        .filter(|(_, keep)| **keep)
        .map(|((d, _), _)| d.id.as_str())
        .collect();
    ensure(accepted == want, || format!("accepted {accepted:?}, brute-force replay accepts {want:?}"))?;
    ensure(!report.recluster_triggered, || "unexpected re-cluster".into())?;
    let n = batch.len();
    ensure(!expected[n - 2] && expected[n - 1], || "near copies did not straddle tau".into())?;
    let drift = max_centroid_drift(&next);
    ensure(drift <= 1e-9, || format!("centroid differs from member mean by {drift:.3e}"))?;
    let incremental = report.accepted;
    corpus = next;

    // 3. The R-th negative acceptance since the last re-cluster re-clusters.
    let pending = corpus.pending_counts().negative;
    let r = pending + 2;
    corpus.set_thresholds(None, Some(r)).map_err(err)?;
    let mut fresh = |id: &str| {
        let v = random_vec(&mut rng, Sentiment::Negative);
        vec![item(id.into(), Sentiment::Negative, v)]
    };
    let first_item = fresh("trigger-1");
    ensure(replay(&corpus, &first_item)[0], || "trigger item 1 is a duplicate".into())?;
    let (next, first) = corpus.contributed(first_item, &head).map_err(err)?;
    ensure(first.accepted == 1 && !first.recluster_triggered, || {
        format!("acceptance {} of {r} already re-clustered", pending + 1)
    })?;
    let second_item = fresh("trigger-2");
    ensure(replay(&next, &second_item)[0], || "trigger item 2 is a duplicate".into())?;
    let (next, second) = next.contributed(second_item, &head).map_err(err)?;
    ensure(second.accepted == 1 && second.recluster_triggered, || {
        format!("acceptance {r} of {r} did not re-cluster: {second:?}")
    })?;
    let mark = next.last_recluster().ok_or("no re-cluster recorded")?;
    ensure(mark.class_label == Sentiment::Negative, || "wrong class re-clustered".into())?;
    ensure(next.pending_counts().negative == 0, || "pending count not reset".into())?;
    let drift = max_centroid_drift(&next);
    ensure(drift <= 1e-9, || format!("post re-cluster drift {drift:.3e}"))?;
    corpus = next;

    // 4. Persist, reload and recheck every invariant.
    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("corpus.jsonl");
    corpus.save(&path).map_err(err)?;
    let loaded = StandardCorpus::load(&path).map_err(err)?;
    loaded.check_invariants().map_err(err)?;
    loaded.check_against_head(&head).map_err(err)?;
    ensure(loaded == corpus, || "reloaded corpus differs".into())?;
    for _ in 0..10 {
        let q = Embedding(random_vec(&mut rng, Sentiment::Positive));
        ensure(predict(&loaded, &q, "q").map_err(err)? == predict(&corpus, &q, "q").map_err(err)?, || {
            "reloaded corpus predicts differently".into()
        })?;
    }
    Ok(format!(
        "duplicate rejected at {:.3}, {incremental} of {n} batch items accepted as replayed, re-cluster on acceptance {r} of {r}, {} exemplars reloaded",
        rejection.similarity,
        loaded.len()
    ))
}
