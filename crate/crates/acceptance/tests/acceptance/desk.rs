use std::path::PathBuf;

use sencorp::pipeline::{self, GapStats, PipelineConfig};
use sencorp::rng::derive_seed;
use sencorp::{load_dataset, DatasetFormat, MetricsSummary};

use crate::{ensure, workspace_root, Outcome};

const PER_CLASS: usize = 10_000;
const MIN_ACCURACY: f64 = 0.70;
const MIN_AUC: f64 = 0.75;
const MIN_GAP: f64 = 0.1;

pub struct DeskResult {
    summary: MetricsSummary,
    gap: GapStats,
    skipped: usize,
}

pub type DeskRun = Result<DeskResult, String>;

fn dataset_path() -> PathBuf {
    std::env::var_os("SENCORP_SENTIMENT_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/training.1600000.processed.noemoticon.csv"))
}

/// Seeded 20,000-tweet balanced subset through the default pipeline.
pub fn run() -> DeskRun {
    let path = dataset_path();
    if !path.is_file() {
        return Err(format!(
            "dataset not available at {} (set SENCORP_SENTIMENT_CSV)",
            path.display()
        ));
    }
    let cfg = PipelineConfig::default();
    let loaded = load_dataset(&path, DatasetFormat::SixColumnSentimentCsv).map_err(|e| e.to_string())?;
    let (docs, _) = pipeline::prepare_documents(loaded.documents);
    let subset = pipeline::balanced_subset(&docs, PER_CLASS, derive_seed(cfg.seed, 4)).map_err(|e| e.to_string())?;
    let outcome = pipeline::run_eval(subset, &cfg).map_err(|e| e.to_string())?;
    Ok(DeskResult {
        summary: outcome.summary,
        gap: outcome.gap,
        skipped: outcome.skipped_queries,
    })
}

pub fn end_to_end(run: &DeskRun) -> Outcome {
    let r = run.as_ref().map_err(Clone::clone)?;
    let s = &r.summary;
    let detail = format!(
        "accuracy {:.4} +/- {:.4}, AUC {:.4}, n_test {}, skipped {}",
        s.accuracy, s.ci_half_width, s.auc, s.n_test, r.skipped
    );
    ensure(s.accuracy >= MIN_ACCURACY && s.auc >= MIN_AUC, || {
        format!("{detail}; need accuracy >= {MIN_ACCURACY} and AUC >= {MIN_AUC}")
    })?;
    Ok(detail)
}

pub fn gap(run: &DeskRun) -> Outcome {
    let r = run.as_ref().map_err(Clone::clone)?;
    let g = &r.gap;
    let detail = format!(
        "median top match {:.4} - median opposite average {:.4} = {:.4} over {} negative queries",
        g.median_top_match,
        g.median_opposite_avg,
        g.gap(),
        g.n_queries
    );
    ensure(g.gap() >= MIN_GAP, || format!("{detail}; need >= {MIN_GAP}"))?;
    Ok(detail)
}
