//! Signed feature hashing of word n-grams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HASH_DIM: usize = 1 << 18;
pub const DEFAULT_NGRAM_MAX: usize = 2;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from unsorted `(index, value)` pairs, summing duplicates
    /// and dropping entries that cancel to zero.
    pub fn from_unsorted(dim: usize, mut pairs: Vec<(u32, f64)>) -> Result<Self> {
        if let Some(&(i, _)) = pairs.iter().find(|(i, _)| *i as usize >= dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: i as usize + 1,
            });
        }
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        Ok(SparseVector { dim, entries })
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let mut prev: Option<u32> = None;
        for &(i, v) in &self.entries {
            if i as usize >= self.dim || prev.is_some_and(|p| p >= i) || !v.is_finite() {
                return Err(Error::CorruptCorpus(format!(
                    "sparse entry ({i}, {v}) out of order, range or non-finite"
                )));
            }
            prev = Some(i);
        }
        Ok(())
    }
}

/// Hashes the whitespace tokens of an already cleaned text.
///
/// Each n-gram (tokens joined by one space, `1..=ngram_max`) is hashed with
/// FNV-1a-64; the low bits select the bucket and bit 63 the sign. The summed
/// counts are then l2-normalised. `dim` must be a power of two.
pub fn vectorize(clean: &str, dim: usize, ngram_max: usize) -> Result<SparseVector> {
    check_hash_params(dim, ngram_max)?;
    let tokens: Vec<&str> = clean.split_whitespace().collect();
    let mask = (dim - 1) as u64;
    let mut pairs = Vec::new();
    let mut gram = String::new();
    for n in 1..=ngram_max {
        for window in tokens.windows(n) {
            gram.clear();
            for (k, tok) in window.iter().enumerate() {
                if k > 0 {
                    gram.push(' ');
                }
                gram.push_str(tok);
            }
            let h = fnv1a64(gram.as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            pairs.push(((h & mask) as u32, sign));
        }
    }
    let mut v = SparseVector::from_unsorted(dim, pairs)?;
    let norm = v.norm();
    if norm > 0.0 {
        for (_, x) in &mut v.entries {
            *x /= norm;
        }
    }
    Ok(v)
}

pub fn check_hash_params(dim: usize, ngram_max: usize) -> Result<()> {
    if dim < 2 || !dim.is_power_of_two() || dim > u32::MAX as usize {
        return Err(Error::InvalidConfig(format!(
            "hash dimension must be a power of two >= 2, got {dim}"
        )));
    }
    if !(1..=2).contains(&ngram_max) {
        return Err(Error::InvalidConfig(format!(
            "ngram_max must be 1 or 2, got {ngram_max}"
        )));
    }
    Ok(())
}
