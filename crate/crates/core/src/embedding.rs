//! The shared projection head and the vector primitives used on its outputs.
//!
//! A text's base vector (hashed features or an imported dense embedding) is
//! mapped through one linear layer `e = M v` with no bias. Both branches of a
//! training pair use the same head, and so does inference.

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::SparseVector;

pub const DEFAULT_OUT_DIM: usize = 64;

/// Input to the projection head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseEmbedding {
    Sparse(SparseVector),
    Dense { values: Vec<f64> },
}

impl BaseEmbedding {
    pub fn dim(&self) -> usize {
        match self {
            BaseEmbedding::Sparse(s) => s.dim,
            BaseEmbedding::Dense { values } => values.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BaseEmbedding::Sparse(s) => s.is_zero(),
            BaseEmbedding::Dense { values } => values.iter().all(|&v| v == 0.0),
        }
    }

    /// Calls `f(index, value)` for every stored entry in increasing index order.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            BaseEmbedding::Sparse(s) => s.entries.iter().for_each(|&(i, v)| f(i as usize, v)),
            BaseEmbedding::Dense { values } => values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .for_each(|(i, &v)| f(i, v)),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            BaseEmbedding::Sparse(s) => s.to_dense(),
            BaseEmbedding::Dense { values } => values.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::CorruptCorpus("base embedding has dim 0".into()));
        }
        match self {
            BaseEmbedding::Sparse(s) => s.validate(),
            BaseEmbedding::Dense { values } if values.iter().all(|v| v.is_finite()) => Ok(()),
            BaseEmbedding::Dense { .. } => {
                Err(Error::CorruptCorpus("non-finite dense base entry".into()))
            }
        }
    }
}

impl From<SparseVector> for BaseEmbedding {
    fn from(v: SparseVector) -> Self {
        BaseEmbedding::Sparse(v)
    }
}

impl From<Vec<f64>> for BaseEmbedding {
    fn from(values: Vec<f64>) -> Self {
        BaseEmbedding::Dense { values }
    }
}

/// Output of the projection head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn zeros(dim: usize) -> Self {
        Embedding(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, alpha: f64) -> Embedding {
        Embedding(self.0.iter().map(|v| v * alpha).collect())
    }

    /// Element-wise mean, summing in slice order.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a Embedding>) -> Option<Embedding> {
        let mut iter = items.into_iter();
        let first = iter.next()?;
        let mut acc = first.0.clone();
        let mut n = 1usize;
        for e in iter {
            for (a, v) in acc.iter_mut().zip(&e.0) {
                *a += v;
            }
            n += 1;
        }
        let n = n as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Some(Embedding(acc))
    }
}

/// Linear map from `in_dim` base features to `out_dim` embedding coordinates.
///
/// Stored column-major so that a sparse input only touches the columns of its
/// active features; serialized row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    in_dim: usize,
    out_dim: usize,
    version: u64,
    cols: Vec<f64>,
}

impl ProjectionHead {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Result<Self> {
        check_dims(in_dim, out_dim)?;
        Ok(ProjectionHead {
            in_dim,
            out_dim,
            version: 0,
            cols: vec![0.0; in_dim * out_dim],
        })
    }

    /// Entries drawn i.i.d. from `U[-1/sqrt(in_dim), 1/sqrt(in_dim)]`, filled
    /// in row-major order from a ChaCha8 stream seeded with `seed`.
    pub fn random(in_dim: usize, out_dim: usize, seed: u64) -> Result<Self> {
        let mut head = Self::zeros(in_dim, out_dim)?;
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..out_dim {
            for j in 0..in_dim {
                head.set(i, j, rng.random_range(-bound..=bound));
            }
        }
        Ok(head)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, version: u64) -> Result<Self> {
        let out_dim = rows.len();
        let in_dim = rows.first().map_or(0, Vec::len);
        let mut head = Self::zeros(in_dim, out_dim)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != in_dim {
                return Err(Error::DimensionMismatch {
                    expected: in_dim,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "non-finite head entry at ({i}, {j})"
                    )));
                }
                head.set(i, j, v);
            }
        }
        head.version = version;
        Ok(head)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn with_version(mut self, version: u64) -> Self {
        self.version = version;
        self
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cols[col * self.out_dim + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.cols[col * self.out_dim + row] = v;
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.cols[col * self.out_dim..(col + 1) * self.out_dim]
    }

    pub(crate) fn column_mut(&mut self, col: usize) -> &mut [f64] {
        &mut self.cols[col * self.out_dim..(col + 1) * self.out_dim]
    }

    pub fn is_finite(&self) -> bool {
        self.cols.iter().all(|v| v.is_finite())
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.out_dim)
            .map(|i| (0..self.in_dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::persist::write_atomically(path, |w| {
            let mut w = BufWriter::new(w);
            serde_json::to_writer(&mut w, self)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            w.flush().map_err(|e| Error::io(path, e))
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

fn check_dims(in_dim: usize, out_dim: usize) -> Result<()> {
    if in_dim == 0 || out_dim == 0 {
        return Err(Error::InvalidConfig(format!(
            "projection head needs positive dims, got {out_dim}x{in_dim}"
        )));
    }
    Ok(())
}

struct RowsView<'a>(&'a ProjectionHead);
struct RowView<'a>(&'a ProjectionHead, usize);

impl Serialize for RowsView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.out_dim))?;
        for i in 0..self.0.out_dim {
            seq.serialize_element(&RowView(self.0, i))?;
        }
        seq.end()
    }
}

impl Serialize for RowView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.in_dim))?;
        for j in 0..self.0.in_dim {
            seq.serialize_element(&self.0.get(self.1, j))?;
        }
        seq.end()
    }
}

#[derive(Serialize)]
struct HeadOut<'a> {
    in_dim: usize,
    out_dim: usize,
    version: u64,
    matrix: RowsView<'a>,
}

#[derive(Deserialize)]
struct HeadIn {
    in_dim: usize,
    out_dim: usize,
    version: u64,
    matrix: Vec<Vec<f64>>,
}

impl Serialize for ProjectionHead {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HeadOut {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            version: self.version,
            matrix: RowsView(self),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProjectionHead {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = HeadIn::deserialize(d)?;
        if raw.matrix.len() != raw.out_dim || raw.matrix.iter().any(|r| r.len() != raw.in_dim) {
            return Err(D::Error::custom(format!(
                "matrix shape does not match declared {}x{}",
                raw.out_dim, raw.in_dim
            )));
        }
        ProjectionHead::from_rows(raw.matrix, raw.version).map_err(D::Error::custom)
    }
}

/// `M v`, accumulated over input coordinates in increasing index order.
pub fn project(head: &ProjectionHead, base: &BaseEmbedding) -> Result<Embedding> {
    if base.dim() != head.in_dim {
        return Err(Error::DimensionMismatch {
            expected: head.in_dim,
            found: base.dim(),
        });
    }
    let mut out = vec![0.0; head.out_dim];
    base.for_each_nonzero(|j, v| {
        for (o, m) in out.iter_mut().zip(head.column(j)) {
            *o += m * v;
        }
    });
    Ok(Embedding(out))
}

/// Euclidean distance `||e1 - e2||`.
pub fn distance(e1: &Embedding, e2: &Embedding) -> Result<f64> {
    check_len(e1, e2)?;
    Ok(e1
        .0
        .iter()
        .zip(&e2.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Cosine similarity, clamped to `[-1, 1]`. A zero vector on either side is
/// an error rather than a silent 0.
pub fn cosine(q: &Embedding, a: &Embedding) -> Result<f64> {
    check_len(q, a)?;
    let (mut dot, mut qq, mut aa) = (0.0, 0.0, 0.0);
    for (x, y) in q.0.iter().zip(&a.0) {
        dot += x * y;
        qq += x * x;
        aa += y * y;
    }
    if qq == 0.0 || aa == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot / (qq.sqrt() * aa.sqrt())).clamp(-1.0, 1.0))
}

fn check_len(a: &Embedding, b: &Embedding) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}
