use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use sencorp::classifier::predict;
use sencorp::corpus::CorpusConfig;
use sencorp::embedding::{distance, project};
use sencorp::kmeans::{kmeans, DEFAULT_MAX_ITER, DEFAULT_TOL};
use sencorp::synthetic::TwoGaussianTask;
use sencorp::{
    pair_gradients, pair_loss, roc_auc, semantic_search, train, BaseEmbedding, Document, Embedding, EncoderSpec,
    PairKind, ProjectionHead, Sentiment, StandardCorpus,
};

use crate::{ensure, workspace_root, Outcome};

fn dense(values: Vec<f64>) -> BaseEmbedding {
    BaseEmbedding::Dense { values }
}

fn loss_at(head: &ProjectionHead, x1: &BaseEmbedding, x2: &BaseEmbedding, kind: PairKind, margin: f64) -> f64 {
    pair_loss(&project(head, x1).unwrap(), &project(head, x2).unwrap(), kind, margin).unwrap()
}

/// Analytic dL/dM against central differences, entry by entry.
pub fn gradient() -> Outcome {
    const H: f64 = 1e-5;
    const SAMPLES: usize = 120;
    let (in_dim, out_dim, margin) = (8, 4, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut accepted = 0;
    let mut hinge_active = 0;
    let mut worst: f64 = 0.0;
    while accepted < SAMPLES {
        let mut head = ProjectionHead::random(in_dim, out_dim, rng.random()).unwrap();
        let scale = rng.random_range(0.1..1.5);
        let mut draw = || dense((0..in_dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect());
        let (x1, x2) = (draw(), draw());
        let kind = if rng.random_bool(0.5) { PairKind::Like } else { PairKind::Unlike };
        let d = distance(&project(&head, &x1).unwrap(), &project(&head, &x2).unwrap()).unwrap();
        if (d - margin).abs() <= 1e-3 {
            continue;
        }
        accepted += 1;
        if kind == PairKind::Unlike && d < margin {
            hinge_active += 1;
        }
        let analytic = pair_gradients(&head, &x1, &x2, kind, margin).unwrap();
        for row in 0..out_dim {
            for col in 0..in_dim {
                let m = head.get(row, col);
                head.set(row, col, m + H);
                let up = loss_at(&head, &x1, &x2, kind, margin);
                head.set(row, col, m - H);
                let down = loss_at(&head, &x1, &x2, kind, margin);
                head.set(row, col, m);
                let numeric = (up - down) / (2.0 * H);
                let a = analytic.get(row, col);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    ensure(hinge_active > 0, || "no sample exercised the hinge".into())?;
    ensure(worst < 1e-4, || format!("max relative error {worst:.3e} >= 1e-4"))?;
    Ok(format!(
        "max relative error {worst:.2e} over {accepted} samples ({hinge_active} with active hinge)"
    ))
}

/// Mann-Whitney fraction of (like, unlike) held-out pair combinations in which
/// the like pair is closer; ties count half.
fn ordering_fraction(test: &[(Sentiment, Embedding)]) -> f64 {
    let (mut like, mut unlike) = (Vec::new(), Vec::new());
    for i in 0..test.len() {
        for j in i + 1..test.len() {
            let d = distance(&test[i].1, &test[j].1).unwrap();
            if test[i].0 == test[j].0 {
                like.push(d);
            } else {
                unlike.push(d);
            }
        }
    }
    unlike.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for d in &like {
        let above = unlike.partition_point(|u| u <= d);
        let ties = above - unlike.partition_point(|u| u < d);
        wins += (unlike.len() - above) as f64 + 0.5 * ties as f64;
    }
    wins / (like.len() * unlike.len()) as f64
}

pub fn two_gaussian() -> Outcome {
    let task = TwoGaussianTask::default();
    let (train_set, test_set) = task.data(2024);
    let head = ProjectionHead::random(task.in_dim, task.out_dim, 7).unwrap();
    let (tuned, report) = train(&task.train_config(99), &train_set, &head).map_err(|e| e.to_string())?;
    ensure(report.loss_history.len() <= 500, || {
        format!("{} steps > 500", report.loss_history.len())
    })?;
    let initial = report.loss_history[0];
    let last = *report.loss_history.last().unwrap();
    let held_out: Vec<(Sentiment, Embedding)> =
        test_set.iter().map(|(l, b)| (*l, project(&tuned, b).unwrap())).collect();
    let ordering = ordering_fraction(&held_out);
    ensure(last < 0.1 * initial, || format!("loss {initial:.4} -> {last:.4}, not below 10%"))?;
    ensure(ordering >= 0.95, || format!("held-out ordering {ordering:.4} < 0.95"))?;
    Ok(format!(
        "loss {initial:.4} -> {last:.4} in {} steps, held-out ordering {ordering:.4}",
        report.loss_history.len()
    ))
}

#[derive(Deserialize)]
struct KmeansFixture {
    k: usize,
    points: Vec<[f64; 2]>,
}

fn partition_sse(points: &[[f64; 2]], labels: &[usize], k: usize) -> Option<f64> {
    let mut sum = vec![[0.0f64; 2]; k];
    let mut count = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        sum[l][0] += p[0];
        sum[l][1] += p[1];
        count[l] += 1;
    }
    if count.contains(&0) {
        return None;
    }
    Some(
        points
            .iter()
            .zip(labels)
            .map(|(p, &l)| {
                let n = count[l] as f64;
                (p[0] - sum[l][0] / n).powi(2) + (p[1] - sum[l][1] / n).powi(2)
            })
            .sum(),
    )
}

/// Minimum SSE over every assignment of the points to k non-empty groups.
fn exhaustive_min_sse(points: &[[f64; 2]], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    'outer: loop {
        if let Some(sse) = partition_sse(points, &labels, k) {
            best = best.min(sse);
        }
        for l in labels.iter_mut() {
            *l += 1;
            if *l < k {
                continue 'outer;
            }
            *l = 0;
        }
        return best;
    }
}

pub fn kmeans_fixtures() -> Outcome {
    let dir = workspace_root().join("fixtures/kmeans");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    ensure(!paths.is_empty(), || "no fixtures".into())?;
    let seeds = 0..20u64;
    for path in &paths {
        let name = path.file_stem().unwrap().to_string_lossy();
        let f: KmeansFixture = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        ensure(f.points.len() <= 8, || format!("{name}: more than 8 points"))?;
        let best = exhaustive_min_sse(&f.points, f.k);
        let points: Vec<Embedding> = f.points.iter().map(|p| Embedding(p.to_vec())).collect();
        for seed in seeds.clone() {
            let km = kmeans(&points, f.k, seed, DEFAULT_MAX_ITER, DEFAULT_TOL).map_err(|e| e.to_string())?;
            let got = partition_sse(&f.points, &km.assignments, f.k)
                .ok_or_else(|| format!("{name} seed {seed}: empty cluster"))?;
            ensure((got - best).abs() <= 1e-9 * best.max(1.0), || {
                format!("{name} seed {seed}: SSE {got} vs exhaustive {best}")
            })?;
            for w in km.sse_history.windows(2) {
                ensure(w[1] <= w[0] + 1e-12 * w[0].max(1.0), || {
                    format!("{name} seed {seed}: SSE rose {} -> {}", w[0], w[1])
                })?;
            }
        }
    }
    Ok(format!("{} fixtures x {} seeds match the exhaustive minimum", paths.len(), seeds.count()))
}

/// O(n^2) Mann-Whitney estimate of P(score of a negative > score of a positive).
fn mann_whitney(scores: &[f64], labels: &[Sentiment]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0usize);
    for (sn, _) in scores.iter().zip(labels).filter(|(_, l)| **l == Sentiment::Negative) {
        for (sp, _) in scores.iter().zip(labels).filter(|(_, l)| **l == Sentiment::Positive) {
            pairs += 1;
            if sn > sp {
                wins += 1.0;
            } else if sn == sp {
                wins += 0.5;
            }
        }
    }
    wins / pairs as f64
}

pub fn auc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    let mut largest = 0;
    for instance in 0..50 {
        let n = if instance == 0 { 1000 } else { rng.random_range(2..=1000) };
        largest = largest.max(n);
        let mut labels: Vec<Sentiment> = (0..n)
            .map(|_| if rng.random_bool(0.5) { Sentiment::Negative } else { Sentiment::Positive })
            .collect();
        labels[0] = Sentiment::Negative;
        labels[n - 1] = Sentiment::Positive;
        // A coarse grid forces many ties.
        let grid: f64 = [0.5, 0.1, 0.01][instance % 3];
        let scores: Vec<f64> = labels
            .iter()
            .map(|l| {
                let shift = if *l == Sentiment::Negative { 0.3 } else { 0.0 };
                ((rng.random_range(-1.0..1.0) + shift) / grid).round() * grid
            })
            .collect();
        let roc = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let oracle = mann_whitney(&scores, &labels);
        worst = worst.max((roc.auc - oracle).abs());
    }
    ensure(worst <= 1e-9, || format!("max |trapezoid - Mann-Whitney| {worst:.3e}"))?;
    Ok(format!("50 instances up to n={largest}, max difference {worst:.1e}"))
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn identity(dim: usize) -> ProjectionHead {
    let rows = (0..dim)
        .map(|r| (0..dim).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    ProjectionHead::from_rows(rows, 1).unwrap()
}

fn random_corpus(rng: &mut ChaCha8Rng, dim: usize) -> StandardCorpus {
    let k = rng.random_range(1..=3);
    let mut items = Vec::new();
    for (label, shift) in [(Sentiment::Negative, -0.5), (Sentiment::Positive, 0.5)] {
        let n = rng.random_range(k..=50);
        for i in 0..n {
            let values: Vec<f64> = (0..dim)
                .map(|d| if d == 0 { shift } else { 0.0 } + rng.random_range(-1.0..1.0))
                .collect();
            let doc = Document::new(format!("{}-{i:02}", label.as_str()), format!("t{i}"), Some(label)).cleaned();
            items.push((doc, dense(values)));
        }
    }
    let config = CorpusConfig {
        k_per_class: k,
        ..CorpusConfig::default()
    };
    StandardCorpus::build(items, config, rng.random(), &identity(dim), EncoderSpec::default()).unwrap()
}

struct Expected {
    class: Sentiment,
    cluster: usize,
    score: f64,
    top_id: String,
    top_sim: f64,
    opposite_avg: f64,
}

/// The prediction recomputed from the definitions; ties go to the lower class,
/// then the lower cluster id, then the lower exemplar id.
fn brute_force(corpus: &StandardCorpus, q: &[f64]) -> Expected {
    let mut best: Option<(Sentiment, usize, f64)> = None;
    let mut best_per = [f64::NEG_INFINITY; 2];
    for c in corpus.centroids() {
        let s = cos(q, &c.values.0);
        let slot = &mut best_per[c.class_label.index()];
        *slot = slot.max(s);
        if best.is_none_or(|(bc, bid, bs)| s > bs || (s == bs && (c.class_label, c.cluster_id) < (bc, bid))) {
            best = Some((c.class_label, c.cluster_id, s));
        }
    }
    let (class, cluster, _) = best.unwrap();
    let mut top: Option<(String, f64)> = None;
    let mut opposite = Vec::new();
    for e in corpus.exemplars() {
        let s = cos(q, &e.embedding.0);
        if e.label() != class {
            opposite.push(s);
        } else if top.as_ref().is_none_or(|(id, ts)| s > *ts || (s == *ts && e.doc.id < *id)) {
            top = Some((e.doc.id.clone(), s));
        }
    }
    let (top_id, top_sim) = top.unwrap();
    Expected {
        class,
        cluster,
        score: best_per[0] - best_per[1],
        top_id,
        top_sim,
        opposite_avg: opposite.iter().sum::<f64>() / opposite.len() as f64,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

pub fn classifier() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut queries, mut searches, mut scalings) = (0, 0, 0);
    for round in 0..20 {
        let dim = rng.random_range(2..=6);
        let corpus = random_corpus(&mut rng, dim);
        ensure(corpus.len() <= 100, || "corpus too large".into())?;
        for qi in 0..10 {
            let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let at = || format!("corpus {round} query {qi}");
            let p = predict(&corpus, &Embedding(q.clone()), "q").map_err(|e| e.to_string())?;
            let want = brute_force(&corpus, &q);
            ensure(p.chosen_class == want.class, || format!("{}: class", at()))?;
            ensure(p.top_match.exemplar_id == want.top_id, || format!("{}: top match id", at()))?;
            ensure(close(p.top_match.similarity, want.top_sim), || format!("{}: top similarity", at()))?;
            ensure(close(p.score, want.score), || format!("{}: score", at()))?;
            ensure(close(p.opposite_avg_similarity, want.opposite_avg), || {
                format!("{}: opposite average", at())
            })?;
            for (cs, c) in p.centroid_similarities.iter().zip(corpus.centroids()) {
                ensure(cs.cluster_id == c.cluster_id && close(cs.similarity, cos(&q, &c.values.0)), || {
                    format!("{}: centroid {}", at(), c.cluster_id)
                })?;
            }
            queries += 1;

            for class in Sentiment::ALL {
                let mut all: Vec<(String, f64)> = corpus
                    .exemplars()
                    .filter(|e| e.label() == class)
                    .map(|e| (e.doc.id.clone(), cos(&q, &e.embedding.0)))
                    .collect();
                all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let k = rng.random_range(1..=all.len() + 2);
                let hits = semantic_search(&corpus, &Embedding(q.clone()), class, k).map_err(|e| e.to_string())?;
                ensure(hits.len() == k.min(all.len()), || format!("{}: search length", at()))?;
                for (h, (id, s)) in hits.iter().zip(&all) {
                    ensure(h.exemplar_id == *id && close(h.similarity, *s), || format!("{}: search order", at()))?;
                }
                searches += 1;
            }

            for _ in 0..100 {
                let alpha = 10f64.powf(rng.random_range(-3.0..3.0));
                let scaled: Vec<f64> = q.iter().map(|v| v * alpha).collect();
                let ps = predict(&corpus, &Embedding(scaled.clone()), "q").map_err(|e| e.to_string())?;
                let ws = brute_force(&corpus, &scaled);
                ensure(ps.chosen_class == want.class && ws.cluster == want.cluster, || {
                    format!("{}: argmax moved under scaling by {alpha}", at())
                })?;
                scalings += 1;
            }
        }
    }
    Ok(format!(
        "{queries} queries on 20 corpora, {searches} searches, {scalings} positive scalings"
    ))
}
