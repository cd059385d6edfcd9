//! Evaluation: stratified hold-out split, confusion rates, accuracy with a
//! normal-approximation interval, and ROC/AUC.
//!
//! Negative sentiment is the detection target throughout, so a "true
//! positive" is a negative-sentiment text predicted as negative.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Document, Sentiment};
use crate::rng::seeded;

pub const DETECTION_CLASS: Sentiment = Sentiment::Negative;

/// Per class, moves `floor(test_fraction * n)` seeded-random documents into
/// the test set. Both sides keep the input order.
pub fn stratified_split(
    docs: &[Document],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<Document>, Vec<Document>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, d) in docs.iter().enumerate() {
        by_class[d.require_label()?.index()].push(i);
    }
    let mut in_test = vec![false; docs.len()];
    let mut rng = seeded(seed);
    for class in Sentiment::ALL {
        let members = &mut by_class[class.index()];
        if members.is_empty() {
            return Err(Error::InsufficientClass {
                class,
                needed: 1,
                found: 0,
            });
        }
        let n_test = (test_fraction * members.len() as f64).floor() as usize;
        if n_test == 0 {
            tracing::warn!(%class, size = members.len(), "class too small to contribute test documents");
        }
        members.shuffle(&mut rng);
        for &i in &members[..n_test] {
            in_test[i] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = docs
        .iter()
        .cloned()
        .zip(in_test)
        .partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(d, _)| d).collect(),
        test.into_iter().map(|(d, _)| d).collect(),
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, actual: Sentiment, predicted: Sentiment) {
        match (actual == DETECTION_CLASS, predicted == DETECTION_CLASS) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Sentiment, Sentiment)>) -> Self {
        let mut c = Confusion::default();
        for (a, p) in pairs {
            c.record(a, p);
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }
}

/// `(TP / (TP + FN), FP / (FP + TN))`.
pub fn rates(c: &Confusion) -> Result<(f64, f64)> {
    if c.tp + c.fn_ == 0 {
        return Err(Error::UndefinedRate { rate: "TPR" });
    }
    if c.fp + c.tn == 0 {
        return Err(Error::UndefinedRate { rate: "FPR" });
    }
    Ok((
        c.tp as f64 / (c.tp + c.fn_) as f64,
        c.fp as f64 / (c.fp + c.tn) as f64,
    ))
}

/// Accuracy and the half-width of its 95% Wald interval, both as fractions.
pub fn accuracy_ci(n_correct: usize, n_total: usize) -> Result<(f64, f64)> {
    if n_total == 0 {
        return Err(Error::InvalidConfig("accuracy of an empty test set".into()));
    }
    if n_correct > n_total {
        return Err(Error::InvalidConfig(format!("{n_correct} correct out of {n_total}")));
    }
    let p = n_correct as f64 / n_total as f64;
    Ok((p, 1.96 * (p * (1.0 - p) / n_total as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Sorted by threshold, descending; starts at (0, 0, +inf), ends at (1, 1, -inf).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold);
        }
        out
    }
}

/// ROC over every distinct score (predict the detection class when
/// `score >= threshold`) and its trapezoidal AUC. Tied scores move together.
pub fn roc_auc(scores: &[f64], labels: &[Sentiment]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == DETECTION_CLASS).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == DETECTION_CLASS {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold,
        });
    }
    points.push(RocPoint {
        fpr: 1.0,
        tpr: 1.0,
        threshold: f64::NEG_INFINITY,
    });

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub accuracy: f64,
    pub ci_half_width: f64,
    pub auc: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub n_test: usize,
}
