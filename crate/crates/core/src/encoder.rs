//! Pluggable base encoders: cleaned text in, base vector out.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clean::clean_text;
use crate::embedding::BaseEmbedding;
use crate::error::{Error, Result};
use crate::features::{check_hash_params, vectorize, DEFAULT_HASH_DIM, DEFAULT_NGRAM_MAX};

pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;

    /// `clean` must already have been through [`clean_text`].
    fn encode(&self, clean: &str) -> Result<BaseEmbedding>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEncoder {
    pub dim: usize,
    pub ngram_max: usize,
}

impl HashingEncoder {
    pub fn new(dim: usize, ngram_max: usize) -> Result<Self> {
        check_hash_params(dim, ngram_max)?;
        Ok(HashingEncoder { dim, ngram_max })
    }
}

impl Default for HashingEncoder {
    fn default() -> Self {
        HashingEncoder {
            dim: DEFAULT_HASH_DIM,
            ngram_max: DEFAULT_NGRAM_MAX,
        }
    }
}

impl TextEncoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, clean: &str) -> Result<BaseEmbedding> {
        vectorize(clean, self.dim, self.ngram_max).map(BaseEmbedding::Sparse)
    }
}

/// Dense vectors computed elsewhere (e.g. by a sentence transformer), looked up
/// by cleaned text. File format: JSON lines `{"text": ..., "embedding": [...]}`.
#[derive(Debug, Clone)]
pub struct LookupEncoder {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
struct LookupLine {
    text: String,
    embedding: Vec<f64>,
}

impl LookupEncoder {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut dim = None;
        let mut table = HashMap::new();
        for (text, v) in pairs {
            let d = *dim.get_or_insert(v.len());
            if d == 0 || v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "non-finite embedding for {text:?}"
                )));
            }
            table.insert(clean_text(&text), v);
        }
        let dim = dim.ok_or_else(|| Error::InvalidConfig("empty embedding table".into()))?;
        Ok(LookupEncoder { dim, table })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LookupLine = serde_json::from_str(&line)?;
            pairs.push((parsed.text, parsed.embedding));
        }
        Self::from_pairs(pairs)
    }
}

impl TextEncoder for LookupEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, clean: &str) -> Result<BaseEmbedding> {
        self.table
            .get(clean)
            .map(|v| BaseEmbedding::Dense { values: v.clone() })
            .ok_or_else(|| Error::UnknownText(clean.to_string()))
    }
}

/// Persistable description of an encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderSpec {
    Hashing { dim: usize, ngram_max: usize },
    Lookup { path: PathBuf },
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec::Hashing {
            dim: DEFAULT_HASH_DIM,
            ngram_max: DEFAULT_NGRAM_MAX,
        }
    }
}

impl EncoderSpec {
    pub fn build(&self) -> Result<Arc<dyn TextEncoder>> {
        Ok(match self {
            EncoderSpec::Hashing { dim, ngram_max } => Arc::new(HashingEncoder::new(*dim, *ngram_max)?),
            EncoderSpec::Lookup { path } => Arc::new(LookupEncoder::load(path)?),
        })
    }
}
