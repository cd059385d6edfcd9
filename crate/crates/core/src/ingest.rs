//! Dataset loading.
//!
//! Two CSV layouts are understood. The six-column layout is the common public
//! twitter-sentiment dump (`target,id,date,flag,user,text`, no header) where
//! `target` is `0` for negative and `4` for positive sentiment. The two-column
//! layout is `label,text` with `0` negative and `1` positive. Rows whose text is
//! blank are skipped and counted; any other label value is an error.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clean::clean_text;
use crate::error::{Error, Result};

/// Binary sentiment class. Negative sentiment is the depressive-indicator
/// class; its lower ordinal is also the tie-break winner during inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative,
    Positive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 2] = [Sentiment::Negative, Sentiment::Positive];

    pub fn opposite(self) -> Sentiment {
        match self {
            Sentiment::Negative => Sentiment::Positive,
            Sentiment::Positive => Sentiment::Negative,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Positive => "positive",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sentiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" | "neg" => Ok(Sentiment::Negative),
            "positive" | "pos" => Ok(Sentiment::Positive),
            other => Err(Error::InvalidConfig(format!("unknown class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Dataset,
    ExpertContribution,
}

/// One tweet or free text. `label == None` means unlabeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    #[serde(default)]
    pub clean_text: String,
    pub label: Option<Sentiment>,
    #[serde(default)]
    pub source: Source,
}

impl Document {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>, label: Option<Sentiment>) -> Self {
        Document {
            id: id.into(),
            raw_text: raw_text.into(),
            clean_text: String::new(),
            label,
            source: Source::Dataset,
        }
    }

    /// Fills `clean_text` from `raw_text`.
    pub fn cleaned(mut self) -> Self {
        self.clean_text = clean_text(&self.raw_text);
        self
    }

    pub fn require_label(&self) -> Result<Sentiment> {
        self.label.ok_or_else(|| Error::Unlabeled { id: self.id.clone() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    SixColumnSentimentCsv,
    TwoColumnCsv,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "six-column" | "six" | "sentiment140" => Ok(DatasetFormat::SixColumnSentimentCsv),
            "two-column" | "two" => Ok(DatasetFormat::TwoColumnCsv),
            other => Err(Error::InvalidConfig(format!("unknown dataset format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub documents: Vec<Document>,
    /// Rows skipped because their text column was blank.
    pub dropped_empty: usize,
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let loaded = read_dataset(std::io::BufReader::new(file), format)?;
    if loaded.dropped_empty > 0 {
        tracing::warn!(
            dropped = loaded.dropped_empty,
            path = %path.display(),
            "skipped rows with empty text"
        );
    }
    Ok(loaded)
}

/// Parses a dataset from any reader. Text is decoded lossily so a stray
/// non-UTF-8 byte does not abort a large import.
pub fn read_dataset<R: std::io::Read>(reader: R, format: DatasetFormat) -> Result<LoadedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let (label_col, text_col, min_cols) = match format {
        DatasetFormat::SixColumnSentimentCsv => (0usize, 5usize, 6usize),
        DatasetFormat::TwoColumnCsv => (0, 1, 2),
    };

    let mut out = LoadedDataset::default();
    let mut record = csv::ByteRecord::new();
    let mut ordinal = 0u64;
    let mut first = true;
    while rdr.read_byte_record(&mut record)? {
        let row = record.position().map_or(ordinal + 1, |p| p.line());
        let label_raw = String::from_utf8_lossy(record.get(label_col).unwrap_or_default());
        let label_raw = label_raw.trim();

        if first {
            first = false;
            // Optional header row: a non-numeric first cell.
            if !label_raw.is_empty() && label_raw.parse::<i64>().is_err() {
                continue;
            }
        }
        if record.len() < min_cols {
            return Err(Error::MalformedRow {
                row,
                expected: min_cols,
                found: record.len(),
            });
        }

        let label = match (format, label_raw) {
            (DatasetFormat::SixColumnSentimentCsv, "0") => Sentiment::Negative,
            (DatasetFormat::SixColumnSentimentCsv, "4") => Sentiment::Positive,
            (DatasetFormat::TwoColumnCsv, "0") => Sentiment::Negative,
            (DatasetFormat::TwoColumnCsv, "1") => Sentiment::Positive,
            _ => {
                return Err(Error::UnmappableLabel {
                    row,
                    value: label_raw.to_string(),
                })
            }
        };

        // Unquoted commas in the trailing text column split it; glue it back.
        let text = record
            .iter()
            .skip(text_col)
            .map(String::from_utf8_lossy)
            .collect::<Vec<_>>()
            .join(",");

        ordinal += 1;
        if text.trim().is_empty() {
            out.dropped_empty += 1;
            continue;
        }
        out.documents
            .push(Document::new(ordinal.to_string(), text, Some(label)));
    }
    Ok(out)
}
