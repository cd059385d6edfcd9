//! Siamese contrastive training of the projection head.
//!
//! Pairs of labelled base vectors go through the same head; the per-pair loss is
//!
//! ```text
//! L = 1/2 (1 - y) D^2 + 1/2 y max(0, m - D)^2,   D = ||M x1 - M x2||
//! ```
//!
//! with `y = 0` for a same-class ("like") pair and `y = 1` otherwise. Training
//! is plain minibatch SGD on the mean batch loss, sequential and deterministic.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{distance, project, BaseEmbedding, Embedding, ProjectionHead};
use crate::error::{Error, Result};
use crate::ingest::Sentiment;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairKind {
    /// Same class, `y = 0`.
    Like,
    /// Different classes, `y = 1`.
    Unlike,
}

impl PairKind {
    pub fn of(a: Sentiment, b: Sentiment) -> Self {
        if a == b {
            PairKind::Like
        } else {
            PairKind::Unlike
        }
    }

    pub fn y(self) -> f64 {
        match self {
            PairKind::Like => 0.0,
            PairKind::Unlike => 1.0,
        }
    }
}

/// A training pair as indices into the example slice it was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexPair {
    pub left: usize,
    pub right: usize,
    pub kind: PairKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub like_fraction: f64,
    /// Pairs drawn per epoch; `None` means one pair per training example.
    pub pairs_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 1.0,
            learning_rate: 0.05,
            batch_size: 64,
            epochs: 30,
            seed: 42,
            like_fraction: 0.5,
            pairs_per_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be positive, got {}", self.margin));
        }
        // lr = 0 is allowed: it is the documented no-op training run.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be >= 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.like_fraction > 0.0 && self.like_fraction < 1.0) {
            return bad(format!("like_fraction must be in (0, 1), got {}", self.like_fraction));
        }
        if self.pairs_per_epoch == Some(0) {
            return bad("pairs_per_epoch must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub like: usize,
    pub unlike: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean pair loss of every batch, measured before that batch's update.
    pub loss_history: Vec<f64>,
    pub final_head_version: u64,
    pub pair_counts: PairCounts,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch_index,mean_loss\n");
        for (i, loss) in self.loss_history.iter().enumerate() {
            let _ = writeln!(out, "{i},{loss}");
        }
        out
    }
}

/// Cycles through a shuffled copy of one class, reshuffling when exhausted, so
/// consecutive draws are without replacement as far as the class size allows.
struct ClassPool {
    members: Vec<usize>,
    cursor: usize,
}

impl ClassPool {
    fn new(members: Vec<usize>, rng: &mut ChaCha8Rng) -> Self {
        let mut pool = ClassPool { members, cursor: 0 };
        pool.members.shuffle(rng);
        pool
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.cursor == self.members.len() {
            self.members.shuffle(rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.members[self.cursor - 1]
    }

    fn draw_distinct_pair(&mut self, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let a = self.draw(rng);
        let mut b = self.draw(rng);
        while b == a {
            b = self.draw(rng);
        }
        (a, b)
    }
}

/// Draws `n_pairs` pairs, exactly `round(n_pairs * like_fraction)` of them like
/// pairs, in a seeded random order. Like pairs pick their class uniformly.
pub fn make_pairs(
    labels: &[Sentiment],
    n_pairs: usize,
    like_fraction: f64,
    seed: u64,
) -> Result<Vec<IndexPair>> {
    if n_pairs == 0 {
        return Err(Error::InvalidConfig("n_pairs must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&like_fraction) {
        return Err(Error::InvalidConfig(format!(
            "like_fraction must be in [0, 1], got {like_fraction}"
        )));
    }
    let n_like = (n_pairs as f64 * like_fraction).round() as usize;
    let n_unlike = n_pairs - n_like;

    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, label) in labels.iter().enumerate() {
        by_class[label.index()].push(i);
    }
    for class in Sentiment::ALL {
        let found = by_class[class.index()].len();
        let needed = if n_like > 0 { 2 } else if n_unlike > 0 { 1 } else { 0 };
        if found < needed {
            return Err(Error::InsufficientClass { class, needed, found });
        }
    }

    let mut rng = seeded(seed);
    let mut kinds = vec![PairKind::Like; n_like];
    kinds.resize(n_pairs, PairKind::Unlike);
    kinds.shuffle(&mut rng);

    let [neg, pos] = by_class;
    let mut pools = [ClassPool::new(neg, &mut rng), ClassPool::new(pos, &mut rng)];
    let pairs = kinds
        .into_iter()
        .map(|kind| {
            let (left, right) = match kind {
                PairKind::Like => {
                    let class = usize::from(rng.random_bool(0.5));
                    pools[class].draw_distinct_pair(&mut rng)
                }
                PairKind::Unlike => {
                    let a = pools[0].draw(&mut rng);
                    let b = pools[1].draw(&mut rng);
                    if rng.random_bool(0.5) {
                        (a, b)
                    } else {
                        (b, a)
                    }
                }
            };
            IndexPair { left, right, kind }
        })
        .collect();
    Ok(pairs)
}

pub fn loss_from_distance(d: f64, kind: PairKind, margin: f64) -> f64 {
    let y = kind.y();
    let hinge = (margin - d).max(0.0);
    0.5 * (1.0 - y) * d * d + 0.5 * y * hinge * hinge
}

pub fn pair_loss(e1: &Embedding, e2: &Embedding, kind: PairKind, margin: f64) -> Result<f64> {
    Ok(loss_from_distance(distance(e1, e2)?, kind, margin))
}

/// dL/dM restricted to the columns touched by either input.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    out_dim: usize,
    in_dim: usize,
    cols: BTreeMap<usize, Vec<f64>>,
}

impl HeadGradient {
    pub fn new(out_dim: usize, in_dim: usize) -> Self {
        HeadGradient {
            out_dim,
            in_dim,
            cols: BTreeMap::new(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cols.get(&col).map_or(0.0, |c| c[row])
    }

    pub fn is_zero(&self) -> bool {
        self.cols.values().flatten().all(|&v| v == 0.0)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.out_dim)
            .map(|i| (0..self.in_dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    fn add_outer(&mut self, g: &[f64], x: &BaseEmbedding, scale: f64) {
        let out_dim = self.out_dim;
        x.for_each_nonzero(|j, v| {
            let col = self.cols.entry(j).or_insert_with(|| vec![0.0; out_dim]);
            for (c, gi) in col.iter_mut().zip(g) {
                *c += gi * v * scale;
            }
        });
    }

    /// `head -= lr * self`.
    pub fn apply(&self, head: &mut ProjectionHead, lr: f64) {
        for (&j, grad) in &self.cols {
            for (m, g) in head.column_mut(j).iter_mut().zip(grad) {
                *m -= lr * g;
            }
        }
    }
}

/// Accumulates `scale * dL/dM` for one pair into `grad` and returns the loss.
///
/// With `d = e1 - e2`, `dL/de1 = [(1 - y) - y max(0, m - D) / D] d`, and the
/// subgradient is taken as zero at `D = 0` and at the hinge kink `D = m`.
fn accumulate_pair(
    head: &ProjectionHead,
    x1: &BaseEmbedding,
    x2: &BaseEmbedding,
    kind: PairKind,
    margin: f64,
    scale: f64,
    grad: &mut HeadGradient,
) -> Result<f64> {
    let e1 = project(head, x1)?;
    let e2 = project(head, x2)?;
    let d = distance(&e1, &e2)?;
    let loss = loss_from_distance(d, kind, margin);
    let y = kind.y();
    let coeff = if d > 0.0 {
        (1.0 - y) - y * (margin - d).max(0.0) / d
    } else {
        0.0
    };
    if coeff != 0.0 {
        let g: Vec<f64> = e1.0.iter().zip(&e2.0).map(|(a, b)| coeff * (a - b)).collect();
        grad.add_outer(&g, x1, scale);
        grad.add_outer(&g, x2, -scale);
    }
    Ok(loss)
}

pub fn pair_gradients(
    head: &ProjectionHead,
    x1: &BaseEmbedding,
    x2: &BaseEmbedding,
    kind: PairKind,
    margin: f64,
) -> Result<HeadGradient> {
    let mut grad = HeadGradient::new(head.out_dim(), head.in_dim());
    accumulate_pair(head, x1, x2, kind, margin, 1.0, &mut grad)?;
    Ok(grad)
}

/// Runs minibatch SGD over freshly drawn pairs each epoch and returns the
/// tuned head (version bumped by one) with its loss trace.
pub fn train(
    config: &TrainConfig,
    examples: &[(Sentiment, BaseEmbedding)],
    head: &ProjectionHead,
) -> Result<(ProjectionHead, TrainReport)> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::InvalidConfig("no training documents".into()));
    }
    if let Some((_, bad)) = examples.iter().find(|(_, b)| b.dim() != head.in_dim()) {
        return Err(Error::DimensionMismatch {
            expected: head.in_dim(),
            found: bad.dim(),
        });
    }
    let labels: Vec<Sentiment> = examples.iter().map(|(l, _)| *l).collect();
    let pairs_per_epoch = config.pairs_per_epoch.unwrap_or(examples.len());

    let mut head = head.clone();
    let mut report = TrainReport {
        loss_history: Vec::new(),
        final_head_version: 0,
        pair_counts: PairCounts::default(),
    };

    for epoch in 0..config.epochs {
        let pairs = make_pairs(
            &labels,
            pairs_per_epoch,
            config.like_fraction,
            derive_seed(config.seed, epoch as u64),
        )?;
        for batch in pairs.chunks(config.batch_size) {
            let batch_index = report.loss_history.len();
            let scale = 1.0 / batch.len() as f64;
            let mut grad = HeadGradient::new(head.out_dim(), head.in_dim());
            let mut loss_sum = 0.0;
            for pair in batch {
                loss_sum += accumulate_pair(
                    &head,
                    &examples[pair.left].1,
                    &examples[pair.right].1,
                    pair.kind,
                    config.margin,
                    scale,
                    &mut grad,
                )?;
                match pair.kind {
                    PairKind::Like => report.pair_counts.like += 1,
                    PairKind::Unlike => report.pair_counts.unlike += 1,
                }
            }
            let mean = loss_sum * scale;
            if !mean.is_finite() {
                return Err(Error::NonFiniteLoss { batch: batch_index });
            }
            report.loss_history.push(mean);
            grad.apply(&mut head, config.learning_rate);
        }
        tracing::debug!(epoch, last_loss = report.loss_history.last().copied(), "epoch done");
    }

    let version = head.version() + 1;
    report.final_head_version = version;
    Ok((head.with_version(version), report))
}
