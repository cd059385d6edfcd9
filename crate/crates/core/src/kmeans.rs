//! Lloyd's k-means with k-means++ seeding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::rng::seeded;

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Cluster index of every input point.
    pub assignments: Vec<usize>,
    /// Mean of each cluster's members; every cluster is non-empty.
    pub centroids: Vec<Embedding>,
    /// SSE measured at each assignment step.
    pub sse_history: Vec<f64>,
}

impl KMeans {
    pub fn sse(&self) -> f64 {
        self.sse_history.last().copied().unwrap_or(0.0)
    }

    pub fn member_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            counts[a] += 1;
        }
        counts
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances from each point to the mean of its cluster.
pub fn partition_sse(points: &[Embedding], assignments: &[usize], k: usize) -> f64 {
    let means = cluster_means(points, assignments, k);
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(&p.0, &means[a].0))
        .sum()
}

pub fn kmeans(points: &[Embedding], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KMeans> {
    let n = points.len();
    if k < 1 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    if !points.iter().all(Embedding::is_finite) {
        return Err(Error::InvalidConfig("k-means input contains non-finite values".into()));
    }

    let mut rng = seeded(seed);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut sse_history: Vec<f64> = Vec::new();

    for _ in 0..max_iter.max(1) {
        let mut dists = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (best, d) = nearest(&p.0, &centroids);
            assignments[i] = best;
            dists[i] = d;
        }
        fill_empty_clusters(points, &mut assignments, &mut dists, &mut centroids);

        let sse: f64 = dists.iter().sum();
        let converged = match sse_history.last() {
            Some(&prev) => prev == 0.0 || (prev - sse).abs() <= tol * prev,
            None => sse == 0.0,
        };
        sse_history.push(sse);
        centroids = cluster_means(points, &assignments, k);
        if converged {
            break;
        }
    }

    Ok(KMeans {
        assignments,
        centroids,
        sse_history,
    })
}

fn plus_plus_seeds(points: &[Embedding], k: usize, rng: &mut ChaCha8Rng) -> Vec<Embedding> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut weights: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(&p.0, &points[first].0))
        .collect();

    while centroids.len() < k {
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if r < acc {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave r == total; fall back to the last positive weight.
            pick.unwrap_or_else(|| weights.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // Every point coincides with a chosen centre.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.push(points[pick].clone());
        for (w, p) in weights.iter_mut().zip(points) {
            *w = w.min(squared_distance(&p.0, &points[pick].0));
        }
    }
    centroids
}

/// Nearest centroid by squared distance; ties go to the lowest index.
fn nearest(p: &[f64], centroids: &[Embedding]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(p, &centroid.0);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Moves the point farthest from its centroid (taken from a cluster with at
/// least two members) into each empty cluster.
fn fill_empty_clusters(
    points: &[Embedding],
    assignments: &mut [usize],
    dists: &mut [f64],
    centroids: &mut [Embedding],
) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            })
            .expect("k <= n guarantees a cluster with two members");
        assignments[donor] = empty;
        dists[donor] = 0.0;
        centroids[empty] = points[donor].clone();
    }
}

fn cluster_means(points: &[Embedding], assignments: &[usize], k: usize) -> Vec<Embedding> {
    let dim = points.first().map_or(0, Embedding::len);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(&p.0) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(mut s, c)| {
            if c > 0 {
                s.iter_mut().for_each(|v| *v /= c as f64);
            }
            Embedding(s)
        })
        .collect()
}
