//! The standard corpus: labelled exemplars, per-class k-means centroids and the
//! expert contribution protocol.
//!
//! Centroids of class `c` occupy cluster ids `c * k .. (c + 1) * k`, so the
//! centroid list is indexed by cluster id. Between re-clusters a centroid is
//! kept as a running mean of its members; a re-cluster recomputes it exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, project, BaseEmbedding, Embedding, ProjectionHead};
use crate::encoder::{EncoderSpec, TextEncoder};
use crate::error::{Error, Result};
use crate::ingest::{Document, Sentiment, Source};
use crate::kmeans::{kmeans, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::persist::write_atomically;
use crate::rng::derive_seed;

pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.95;
pub const DEFAULT_RECLUSTER_THRESHOLD: usize = 100;
pub const DEFAULT_K_PER_CLASS: usize = 4;

/// Relative tolerance for centroid/mean and embedding/projection agreement.
pub const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub doc: Document,
    pub base: BaseEmbedding,
    pub embedding: Embedding,
    pub head_version: u64,
    pub cluster_id: usize,
}

impl Exemplar {
    pub fn label(&self) -> Sentiment {
        self.doc.label.expect("exemplars are always labelled")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub cluster_id: usize,
    pub class_label: Sentiment,
    pub member_count: usize,
    pub values: Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub k_per_class: usize,
    pub dedup_threshold: f64,
    pub recluster_threshold: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            k_per_class: DEFAULT_K_PER_CLASS,
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
            recluster_threshold: DEFAULT_RECLUSTER_THRESHOLD,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_per_class == 0 {
            return Err(Error::InvalidConfig("k_per_class must be >= 1".into()));
        }
        if !(self.dedup_threshold > 0.0 && self.dedup_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dedup threshold must be in (0, 1), got {}",
                self.dedup_threshold
            )));
        }
        if self.recluster_threshold == 0 {
            return Err(Error::InvalidConfig("recluster threshold must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerClass<T> {
    pub negative: T,
    pub positive: T,
}

impl<T> PerClass<T> {
    pub fn get(&self, class: Sentiment) -> &T {
        match class {
            Sentiment::Negative => &self.negative,
            Sentiment::Positive => &self.positive,
        }
    }

    pub fn get_mut(&mut self, class: Sentiment) -> &mut T {
        match class {
            Sentiment::Negative => &mut self.negative,
            Sentiment::Positive => &mut self.positive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReclusterMark {
    pub class_label: Sentiment,
    /// Snapshot version the re-cluster produced.
    pub snapshot_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateRejection {
    pub new_id: String,
    pub matched_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub accepted: usize,
    pub accepted_ids: Vec<String>,
    pub rejected_duplicates: Vec<DuplicateRejection>,
    pub recluster_triggered: bool,
    pub new_snapshot_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_class_counts: PerClass<usize>,
    pub centroid_count: usize,
    pub k_per_class: usize,
    pub snapshot_version: u64,
    pub head_version: u64,
    pub last_recluster: Option<ReclusterMark>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardCorpus {
    exemplars: BTreeMap<String, Exemplar>,
    centroids: Vec<Centroid>,
    config: CorpusConfig,
    pending_counts: PerClass<usize>,
    head_version: u64,
    snapshot_version: u64,
    encoder: EncoderSpec,
    next_contribution: u64,
    last_recluster: Option<ReclusterMark>,
}

impl StandardCorpus {
    /// Projects every item through `head` and clusters each class separately.
    pub fn build(
        items: Vec<(Document, BaseEmbedding)>,
        config: CorpusConfig,
        seed: u64,
        head: &ProjectionHead,
        encoder: EncoderSpec,
    ) -> Result<Self> {
        config.validate()?;
        let mut exemplars = BTreeMap::new();
        for (doc, base) in items {
            let label = doc.require_label()?;
            let embedding = project(head, &base)?;
            let id = doc.id.clone();
            let ex = Exemplar {
                doc,
                base,
                embedding,
                head_version: head.version(),
                cluster_id: label.index() * config.k_per_class,
            };
            if exemplars.insert(id.clone(), ex).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        let mut corpus = StandardCorpus {
            exemplars,
            centroids: Vec::new(),
            config,
            pending_counts: PerClass::default(),
            head_version: head.version(),
            snapshot_version: 1,
            encoder,
            next_contribution: 0,
            last_recluster: None,
        };
        for class in Sentiment::ALL {
            let found = corpus.class_size(class);
            if found < config.k_per_class {
                return Err(Error::InsufficientClass {
                    class,
                    needed: config.k_per_class,
                    found,
                });
            }
        }
        corpus.centroids = (0..2 * config.k_per_class)
            .map(|cluster_id| Centroid {
                cluster_id,
                class_label: Sentiment::ALL[cluster_id / config.k_per_class],
                member_count: 0,
                values: Embedding::zeros(head.out_dim()),
            })
            .collect();
        for class in Sentiment::ALL {
            corpus.recluster(class, derive_seed(seed, class.index() as u64))?;
        }
        Ok(corpus)
    }

    pub fn config(&self) -> &CorpusConfig {
        &self.config
    }

    pub fn k_per_class(&self) -> usize {
        self.config.k_per_class
    }

    pub fn dedup_threshold(&self) -> f64 {
        self.config.dedup_threshold
    }

    pub fn recluster_threshold(&self) -> usize {
        self.config.recluster_threshold
    }

    /// Overrides the dedup and re-cluster thresholds (e.g. from service flags).
    pub fn set_thresholds(&mut self, dedup: Option<f64>, recluster: Option<usize>) -> Result<()> {
        let mut cfg = self.config;
        if let Some(t) = dedup {
            cfg.dedup_threshold = t;
        }
        if let Some(r) = recluster {
            cfg.recluster_threshold = r;
        }
        cfg.validate()?;
        if Sentiment::ALL
            .iter()
            .any(|&c| *self.pending_counts.get(c) >= cfg.recluster_threshold)
        {
            return Err(Error::InvalidConfig(
                "recluster threshold is not above the current pending counts".into(),
            ));
        }
        self.config = cfg;
        Ok(())
    }

    pub fn pending_counts(&self) -> PerClass<usize> {
        self.pending_counts
    }

    pub fn head_version(&self) -> u64 {
        self.head_version
    }

    pub fn snapshot_version(&self) -> u64 {
        self.snapshot_version
    }

    pub fn encoder(&self) -> &EncoderSpec {
        &self.encoder
    }

    pub fn last_recluster(&self) -> Option<ReclusterMark> {
        self.last_recluster
    }

    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Exemplar> {
        self.exemplars.get(id)
    }

    /// All exemplars in ascending id order.
    pub fn exemplars(&self) -> impl Iterator<Item = &Exemplar> {
        self.exemplars.values()
    }

    pub fn exemplars_of(&self, class: Sentiment) -> impl Iterator<Item = &Exemplar> {
        self.exemplars.values().filter(move |e| e.label() == class)
    }

    pub fn class_size(&self, class: Sentiment) -> usize {
        self.exemplars_of(class).count()
    }

    pub fn members_of(&self, cluster_id: usize) -> impl Iterator<Item = &Exemplar> {
        self.exemplars.values().filter(move |e| e.cluster_id == cluster_id)
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            per_class_counts: PerClass {
                negative: self.class_size(Sentiment::Negative),
                positive: self.class_size(Sentiment::Positive),
            },
            centroid_count: self.centroids.len(),
            k_per_class: self.config.k_per_class,
            snapshot_version: self.snapshot_version,
            head_version: self.head_version,
            last_recluster: self.last_recluster,
        }
    }

    /// Hands out the next id for an expert contribution (`contrib-N`).
    pub fn next_contribution_id(&mut self) -> String {
        loop {
            let id = format!("contrib-{}", self.next_contribution);
            self.next_contribution += 1;
            if !self.exemplars.contains_key(&id) {
                return id;
            }
        }
    }

    /// Mean cosine between `q` and every exemplar of `class` (not centroids).
    pub fn class_average_similarity(&self, q: &Embedding, class: Sentiment) -> Result<f64> {
        if q.is_zero() {
            return Err(Error::UndefinedSimilarity);
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for e in self.exemplars_of(class) {
            sum += cosine(q, &e.embedding)?;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyClass(class));
        }
        Ok(sum / n as f64)
    }

    /// Re-embeds every exemplar with `head` and recomputes centroids exactly
    /// from the current assignments.
    pub fn reproject(&mut self, head: &ProjectionHead) -> Result<()> {
        for ex in self.exemplars.values_mut() {
            ex.embedding = project(head, &ex.base)?;
            ex.head_version = head.version();
        }
        self.head_version = head.version();
        for cid in 0..self.centroids.len() {
            self.recompute_centroid(cid, head.out_dim());
        }
        Ok(())
    }

    fn recompute_centroid(&mut self, cluster_id: usize, dim: usize) {
        let members: Vec<&Embedding> = self.members_of(cluster_id).map(|e| &e.embedding).collect();
        let count = members.len();
        let values = Embedding::mean(members).unwrap_or_else(|| Embedding::zeros(dim));
        let centroid = &mut self.centroids[cluster_id];
        centroid.member_count = count;
        centroid.values = values;
    }

    /// Runs k-means over one class and replaces that class's centroids.
    fn recluster(&mut self, class: Sentiment, seed: u64) -> Result<()> {
        let k = self.config.k_per_class;
        let ids: Vec<String> = self.exemplars_of(class).map(|e| e.doc.id.clone()).collect();
        let points: Vec<Embedding> = ids.iter().map(|id| self.exemplars[id].embedding.clone()).collect();
        let result = kmeans(&points, k, seed, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
        let offset = class.index() * k;
        for (id, &a) in ids.iter().zip(&result.assignments) {
            self.exemplars.get_mut(id).unwrap().cluster_id = offset + a;
        }
        let counts = result.member_counts();
        for (local, values) in result.centroids.into_iter().enumerate() {
            self.centroids[offset + local] = Centroid {
                cluster_id: offset + local,
                class_label: class,
                member_count: counts[local],
                values,
            };
        }
        Ok(())
    }

    /// Applies an expert submission atomically and returns the new corpus; the
    /// receiver is left untouched, so a failed call changes nothing.
    pub fn contributed(
        &self,
        items: Vec<(Document, BaseEmbedding)>,
        head: &ProjectionHead,
    ) -> Result<(StandardCorpus, UpdateReport)> {
        let mut next = self.clone();
        let report = next.apply(items, head)?;
        Ok((next, report))
    }

    /// Like [`StandardCorpus::contributed`] for raw expert texts: each gets a
    /// fresh `contrib-N` id and is cleaned and encoded with `encoder`.
    pub fn contributed_texts(
        &self,
        texts: Vec<(String, Sentiment)>,
        head: &ProjectionHead,
        encoder: &dyn TextEncoder,
    ) -> Result<(StandardCorpus, UpdateReport)> {
        let mut next = self.clone();
        let mut items = Vec::with_capacity(texts.len());
        for (text, label) in texts {
            let doc = Document::new(next.next_contribution_id(), text, Some(label)).cleaned();
            let base = encoder.encode(&doc.clean_text)?;
            items.push((doc, base));
        }
        let report = next.apply(items, head)?;
        Ok((next, report))
    }

    fn apply(&mut self, items: Vec<(Document, BaseEmbedding)>, head: &ProjectionHead) -> Result<UpdateReport> {
        let next = self;
        if head.version() != next.head_version {
            next.reproject(head)?;
        }
        let mut report = UpdateReport {
            accepted: 0,
            accepted_ids: Vec::new(),
            rejected_duplicates: Vec::new(),
            recluster_triggered: false,
            new_snapshot_version: next.snapshot_version,
        };

        for (index, (mut doc, base)) in items.into_iter().enumerate() {
            let class = doc.require_label()?;
            if next.exemplars.contains_key(&doc.id) {
                return Err(Error::DuplicateId(doc.id));
            }
            let embedding = project(head, &base)?;
            if embedding.is_zero() {
                return Err(Error::ZeroEmbedding { indices: vec![index] });
            }

            if let Some((matched, sim)) = next.most_similar(&embedding, class)? {
                if sim >= next.config.dedup_threshold {
                    report.rejected_duplicates.push(DuplicateRejection {
                        new_id: doc.id,
                        matched_id: matched,
                        similarity: sim,
                    });
                    continue;
                }
            }

            let cluster_id = next.nearest_centroid(&embedding, class)?;
            let centroid = &mut next.centroids[cluster_id];
            let n = centroid.member_count as f64 + 1.0;
            for (c, v) in centroid.values.0.iter_mut().zip(&embedding.0) {
                *c += (v - *c) / n;
            }
            centroid.member_count += 1;

            if doc.clean_text.is_empty() {
                doc.clean_text = crate::clean::clean_text(&doc.raw_text);
            }
            doc.source = Source::ExpertContribution;
            report.accepted += 1;
            report.accepted_ids.push(doc.id.clone());
            next.exemplars.insert(
                doc.id.clone(),
                Exemplar {
                    doc,
                    base,
                    embedding,
                    head_version: head.version(),
                    cluster_id,
                },
            );

            let pending = next.pending_counts.get_mut(class);
            *pending += 1;
            if *pending >= next.config.recluster_threshold {
                *pending = 0;
                next.recluster(class, next.snapshot_version)?;
                next.snapshot_version += 1;
                next.last_recluster = Some(ReclusterMark {
                    class_label: class,
                    snapshot_version: next.snapshot_version,
                });
                report.recluster_triggered = true;
            }
        }

        if report.accepted > 0 {
            next.snapshot_version += 1;
        }
        report.new_snapshot_version = next.snapshot_version;
        Ok(report)
    }

    /// In-place variant of [`StandardCorpus::contributed`].
    pub fn contribute(
        &mut self,
        items: Vec<(Document, BaseEmbedding)>,
        head: &ProjectionHead,
    ) -> Result<UpdateReport> {
        let (next, report) = self.contributed(items, head)?;
        *self = next;
        Ok(report)
    }

    /// Highest-cosine exemplar of `class`; ties go to the smaller id.
    fn most_similar(&self, q: &Embedding, class: Sentiment) -> Result<Option<(String, f64)>> {
        let mut best: Option<(&str, f64)> = None;
        for e in self.exemplars_of(class) {
            let sim = cosine(q, &e.embedding)?;
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((&e.doc.id, sim));
            }
        }
        Ok(best.map(|(id, s)| (id.to_string(), s)))
    }

    fn nearest_centroid(&self, q: &Embedding, class: Sentiment) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for c in self.centroids.iter().filter(|c| c.class_label == class) {
            let sim = cosine(q, &c.values)?;
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((c.cluster_id, sim));
            }
        }
        best.map(|(id, _)| id).ok_or(Error::EmptyClass(class))
    }

    /// Checks every structural invariant; used on load and in tests.
    pub fn check_invariants(&self) -> Result<()> {
        let corrupt = |msg: String| Err(Error::CorruptCorpus(msg));
        if let Err(e) = self.config.validate() {
            return corrupt(e.to_string());
        }
        let k = self.config.k_per_class;
        if self.centroids.len() != 2 * k {
            return corrupt(format!("expected {} centroids, found {}", 2 * k, self.centroids.len()));
        }
        let dim = self.centroids[0].values.len();
        for (i, c) in self.centroids.iter().enumerate() {
            if c.cluster_id != i || c.class_label != Sentiment::ALL[i / k] {
                return corrupt(format!("centroid {i} has wrong id or class"));
            }
            if c.values.len() != dim || !c.values.is_finite() {
                return corrupt(format!("centroid {i} has bad values"));
            }
        }
        for class in Sentiment::ALL {
            if *self.pending_counts.get(class) >= self.config.recluster_threshold {
                return corrupt(format!("pending count for {class} reached the re-cluster threshold"));
            }
        }

        let mut counts = vec![0usize; 2 * k];
        let mut sums = vec![vec![0.0; dim]; 2 * k];
        let mut scale = vec![0.0f64; 2 * k];
        for (id, e) in &self.exemplars {
            if *id != e.doc.id {
                return corrupt(format!("exemplar key {id:?} does not match its id"));
            }
            let Some(label) = e.doc.label else {
                return corrupt(format!("exemplar {id:?} is unlabelled"));
            };
            e.base.validate()?;
            if e.embedding.len() != dim || !e.embedding.is_finite() {
                return corrupt(format!("exemplar {id:?} has a bad embedding"));
            }
            if e.head_version != self.head_version {
                return corrupt(format!("exemplar {id:?} was embedded with another head"));
            }
            if e.cluster_id >= 2 * k || self.centroids[e.cluster_id].class_label != label {
                return corrupt(format!("exemplar {id:?} is assigned to a foreign cluster"));
            }
            counts[e.cluster_id] += 1;
            for (s, v) in sums[e.cluster_id].iter_mut().zip(&e.embedding.0) {
                *s += v;
            }
            let m = e.embedding.0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            scale[e.cluster_id] = scale[e.cluster_id].max(m);
        }
        for (cid, c) in self.centroids.iter().enumerate() {
            if c.member_count != counts[cid] || counts[cid] == 0 {
                return corrupt(format!(
                    "centroid {cid} claims {} members, found {}",
                    c.member_count, counts[cid]
                ));
            }
            let n = counts[cid] as f64;
            let tol = CONSISTENCY_TOL * scale[cid].max(f64::MIN_POSITIVE);
            let drift = sums[cid]
                .iter()
                .zip(&c.values.0)
                .map(|(s, v)| (s / n - v).abs())
                .fold(0.0, f64::max);
            if drift > tol {
                return corrupt(format!("centroid {cid} is not the mean of its members ({drift:e})"));
            }
        }
        Ok(())
    }

    /// Confirms every stored embedding is the projection of its base vector.
    pub fn check_against_head(&self, head: &ProjectionHead) -> Result<()> {
        if head.version() != self.head_version {
            return Err(Error::CorruptCorpus(format!(
                "corpus was embedded with head version {}, got {}",
                self.head_version,
                head.version()
            )));
        }
        for e in self.exemplars.values() {
            let fresh = project(head, &e.base)?;
            let scale = fresh.0.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
            let drift = fresh.0.iter().zip(&e.embedding.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if drift > CONSISTENCY_TOL * scale {
                return Err(Error::CorruptCorpus(format!(
                    "exemplar {:?} does not match the head projection",
                    e.doc.id
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_atomically(path, |file| {
            let mut w = BufWriter::new(file);
            for e in self.exemplars.values() {
                serde_json::to_writer(&mut w, &ExemplarLine::from(e))?;
                w.write_all(b"\n").map_err(|err| Error::io(path, err))?;
            }
            w.flush().map_err(|err| Error::io(path, err))
        })?;
        let sidecar = sidecar_path(path);
        let meta = Sidecar {
            format_version: 1,
            k_per_class: self.config.k_per_class,
            dedup_threshold: self.config.dedup_threshold,
            recluster_threshold: self.config.recluster_threshold,
            pending_counts: self.pending_counts,
            snapshot_version: self.snapshot_version,
            head_version: self.head_version,
            exemplar_count: self.exemplars.len(),
            next_contribution: self.next_contribution,
            last_recluster: self.last_recluster,
            encoder: self.encoder.clone(),
            centroids: self.centroids.clone(),
        };
        write_atomically(&sidecar, |file| {
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &meta)?;
            w.write_all(b"\n").map_err(|err| Error::io(&sidecar, err))?;
            w.flush().map_err(|err| Error::io(&sidecar, err))
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let sidecar = sidecar_path(path);
        let meta_file = std::fs::File::open(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: Sidecar = serde_json::from_reader(BufReader::new(meta_file))
            .map_err(|e| Error::CorruptCorpus(format!("{}: {e}", sidecar.display())))?;
        if meta.format_version != 1 {
            return Err(Error::CorruptCorpus(format!(
                "unsupported format version {}",
                meta.format_version
            )));
        }

        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut exemplars = BTreeMap::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ExemplarLine = serde_json::from_str(&line).map_err(|e| {
                Error::CorruptCorpus(format!("{} line {}: {e}", path.display(), lineno + 1))
            })?;
            let ex = parsed.into_exemplar();
            let id = ex.doc.id.clone();
            if exemplars.insert(id.clone(), ex).is_some() {
                return Err(Error::CorruptCorpus(format!("duplicate exemplar id {id:?}")));
            }
        }
        if exemplars.len() != meta.exemplar_count {
            return Err(Error::CorruptCorpus(format!(
                "sidecar expects {} exemplars, file has {}",
                meta.exemplar_count,
                exemplars.len()
            )));
        }

        let corpus = StandardCorpus {
            exemplars,
            centroids: meta.centroids,
            config: CorpusConfig {
                k_per_class: meta.k_per_class,
                dedup_threshold: meta.dedup_threshold,
                recluster_threshold: meta.recluster_threshold,
            },
            pending_counts: meta.pending_counts,
            head_version: meta.head_version,
            snapshot_version: meta.snapshot_version,
            encoder: meta.encoder,
            next_contribution: meta.next_contribution,
            last_recluster: meta.last_recluster,
        };
        corpus.check_invariants()?;
        Ok(corpus)
    }
}

/// `corpus.jsonl` -> `corpus.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

#[derive(Serialize, Deserialize)]
struct ExemplarLine {
    id: String,
    clean_text: String,
    label: Sentiment,
    #[serde(default)]
    source: Source,
    base: BaseEmbedding,
    embedding: Embedding,
    head_version: u64,
    cluster_id: usize,
}

impl From<&Exemplar> for ExemplarLine {
    fn from(e: &Exemplar) -> Self {
        ExemplarLine {
            id: e.doc.id.clone(),
            clean_text: e.doc.clean_text.clone(),
            label: e.label(),
            source: e.doc.source,
            base: e.base.clone(),
            embedding: e.embedding.clone(),
            head_version: e.head_version,
            cluster_id: e.cluster_id,
        }
    }
}

impl ExemplarLine {
    fn into_exemplar(self) -> Exemplar {
        Exemplar {
            doc: Document {
                id: self.id,
                // Raw text is not persisted; only the cleaned form is kept.
                raw_text: self.clean_text.clone(),
                clean_text: self.clean_text,
                label: Some(self.label),
                source: self.source,
            },
            base: self.base,
            embedding: self.embedding,
            head_version: self.head_version,
            cluster_id: self.cluster_id,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    k_per_class: usize,
    dedup_threshold: f64,
    recluster_threshold: usize,
    pending_counts: PerClass<usize>,
    snapshot_version: u64,
    head_version: u64,
    exemplar_count: usize,
    next_contribution: u64,
    last_recluster: Option<ReclusterMark>,
    encoder: EncoderSpec,
    centroids: Vec<Centroid>,
}
