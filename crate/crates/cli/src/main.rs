use std::io::{BufRead, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sencorp::corpus::{DEFAULT_DEDUP_THRESHOLD, DEFAULT_K_PER_CLASS, DEFAULT_RECLUSTER_THRESHOLD};
use sencorp::embedding::DEFAULT_OUT_DIM;
use sencorp::features::{DEFAULT_HASH_DIM, DEFAULT_NGRAM_MAX};
use sencorp::pipeline::{self, PipelineConfig};
use sencorp::rng::derive_seed;
use sencorp::{
    classify, load_dataset, BaseEmbedding, CorpusConfig, DatasetFormat, Document, EncoderSpec, HashingEncoder,
    ProjectionHead, Sentiment, StandardCorpus, TextEncoder, TrainConfig,
};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "sencorp", version, about = "Tweet sentiment screening against a curated standard corpus")]
struct Cli {
    /// Raise log verbosity (-v debug, -vv trace). Logs go to stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a labelled dataset, clean it and write documents as JSON lines.
    Ingest(IngestArgs),
    /// Tune a projection head with the contrastive loss.
    Train(TrainArgs),
    /// Embed labelled documents and cluster them into a standard corpus.
    BuildCorpus(BuildCorpusArgs),
    /// Hold-out evaluation: split, train, build, classify and score.
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Classify texts against a saved corpus; one JSON prediction per line.
    Classify(ClassifyArgs),
    /// Add expert-labelled texts to a saved corpus.
    Contribute(ContributeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// label,id,date,query,user,text with labels 0 and 4.
    SixColumn,
    /// label,text with labels 0 and 1.
    TwoColumn,
    /// Documents written by `ingest`.
    Jsonl,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "six-column")]
    format: InputFormat,
}

#[derive(Args)]
struct HashArgs {
    /// Feature-hashing width; a power of two.
    #[arg(long, default_value_t = DEFAULT_HASH_DIM)]
    hash_dim: usize,
    #[arg(long, default_value_t = DEFAULT_NGRAM_MAX)]
    ngram_max: usize,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long = "lr", alias = "learning-rate", default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    like_fraction: f64,
    /// Pairs drawn per epoch; defaults to one per training document.
    #[arg(long)]
    pairs_per_epoch: Option<usize>,
}

impl TrainFlags {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            margin: self.margin,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            like_fraction: self.like_fraction,
            pairs_per_epoch: self.pairs_per_epoch,
        }
    }
}

#[derive(Args)]
struct CorpusFlags {
    #[arg(long, default_value_t = DEFAULT_K_PER_CLASS)]
    k_per_class: usize,
    /// Cosine at or above which a contribution is a duplicate.
    #[arg(long, default_value_t = DEFAULT_DEDUP_THRESHOLD)]
    dedup_tau: f64,
    /// Accepted contributions per class that trigger a re-cluster.
    #[arg(long, default_value_t = DEFAULT_RECLUSTER_THRESHOLD)]
    recluster_r: usize,
}

impl CorpusFlags {
    fn config(&self) -> CorpusConfig {
        CorpusConfig {
            k_per_class: self.k_per_class,
            dedup_threshold: self.dedup_tau,
            recluster_threshold: self.recluster_r,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output JSON lines; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    hash: HashArgs,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long, default_value_t = DEFAULT_OUT_DIM)]
    out_dim: usize,
    /// Start from this head instead of a seeded random one.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Write per-batch losses as `batch_index,mean_loss`.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct BuildCorpusArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    head: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NGRAM_MAX)]
    ngram_max: usize,
    #[command(flatten)]
    corpus: CorpusFlags,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    hash: HashArgs,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    corpus: CorpusFlags,
    #[arg(long, default_value_t = DEFAULT_OUT_DIM)]
    out_dim: usize,
    #[arg(long, default_value_t = 0.10)]
    test_fraction: f64,
    /// Evaluate on a seeded balanced sample of this many documents per class.
    #[arg(long)]
    balanced_per_class: Option<usize>,
    #[arg(long, default_value = "roc.csv")]
    roc: PathBuf,
    /// Full JSON report including the confusion matrix and similarity gap.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    save_head: Option<PathBuf>,
    #[arg(long)]
    save_corpus: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long = "bind", env = "BIND_ADDR", default_value = "127.0.0.1:8080")]
    bind_addr: SocketAddr,
    #[arg(long = "corpus", env = "CORPUS_PATH")]
    corpus_path: PathBuf,
    #[arg(long = "head", env = "HEAD_PATH")]
    head_path: PathBuf,
    #[arg(long, env = "READ_ONLY")]
    read_only: bool,
    #[arg(long, env = "DEDUP_TAU")]
    dedup_tau: Option<f64>,
    #[arg(long, env = "RECLUSTER_R")]
    recluster_r: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    head: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct TextSource {
    #[arg(long)]
    text: Option<String>,
    /// One text per line.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    source: TextSource,
}

#[derive(Args)]
struct ContributeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// JSON lines of `{"text": ..., "label": "negative" | "positive"}`.
    #[arg(long, conflicts_with_all = ["text", "label"])]
    input: Option<PathBuf>,
    #[arg(long, requires = "label")]
    text: Option<String>,
    #[arg(long, requires = "text")]
    label: Option<Sentiment>,
    #[arg(long)]
    dedup_tau: Option<f64>,
    #[arg(long)]
    recluster_r: Option<usize>,
}

#[derive(Deserialize)]
struct ContributionLine {
    text: String,
    label: Option<Sentiment>,
}

#[derive(Serialize)]
struct TrainSummary {
    batches: usize,
    initial_loss: Option<f64>,
    final_loss: Option<f64>,
    head_version: u64,
    like_pairs: usize,
    unlike_pairs: usize,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::INFO,
        1 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();

    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::BuildCorpus(a) => build_corpus(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
        Command::Classify(a) => classify_texts(a),
        Command::Contribute(a) => contribute(a),
    }
}

fn load_documents(input: &InputArgs) -> Result<Vec<Document>> {
    let path = &input.input;
    let docs = match input.format {
        InputFormat::SixColumn => load_dataset(path, DatasetFormat::SixColumnSentimentCsv)?.documents,
        InputFormat::TwoColumn => load_dataset(path, DatasetFormat::TwoColumnCsv)?.documents,
        InputFormat::Jsonl => read_jsonl(path)?,
    };
    let (docs, dropped) = pipeline::prepare_documents(docs);
    if dropped > 0 {
        tracing::warn!(dropped, "documents empty after cleaning were skipped");
    }
    ensure!(!docs.is_empty(), "{} holds no usable documents", path.display());
    Ok(docs)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn write_json_line(out: &mut impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn labelled_examples(
    docs: &[Document],
    encoder: &dyn TextEncoder,
) -> Result<Vec<(Document, BaseEmbedding)>> {
    for d in docs {
        d.require_label()?;
    }
    Ok(pipeline::encode_documents(docs, encoder)?)
}

fn ingest(args: IngestArgs) -> Result<()> {
    let docs = load_documents(&args.input)?;
    let counts = Sentiment::ALL.map(|c| docs.iter().filter(|d| d.label == Some(c)).count());
    match &args.output {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            for d in &docs {
                write_json_line(&mut w, d)?;
            }
            w.flush()?;
        }
        None => {
            let mut w = BufWriter::new(std::io::stdout().lock());
            for d in &docs {
                write_json_line(&mut w, d)?;
            }
            w.flush()?;
        }
    }
    tracing::info!(documents = docs.len(), negative = counts[0], positive = counts[1], "ingested");
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let docs = load_documents(&args.input)?;
    let init = match &args.init {
        Some(path) => ProjectionHead::load(path)?,
        None => ProjectionHead::random(args.hash.hash_dim, args.out_dim, derive_seed(args.seed, 1))?,
    };
    ensure!(
        init.in_dim() == args.hash.hash_dim,
        "initial head expects {} input dimensions but --hash-dim is {}",
        init.in_dim(),
        args.hash.hash_dim
    );
    let encoder = HashingEncoder::new(args.hash.hash_dim, args.hash.ngram_max)?;
    let examples: Vec<(Sentiment, BaseEmbedding)> = labelled_examples(&docs, &encoder)?
        .into_iter()
        .map(|(d, b)| (d.label.expect("checked"), b))
        .collect();
    let config = args.train.config(derive_seed(args.seed, 2));
    let (head, report) = sencorp::train(&config, &examples, &init)?;
    head.save(&args.output)?;
    if let Some(path) = &args.loss_csv {
        std::fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&TrainSummary {
        batches: report.loss_history.len(),
        initial_loss: report.loss_history.first().copied(),
        final_loss: report.loss_history.last().copied(),
        head_version: head.version(),
        like_pairs: report.pair_counts.like,
        unlike_pairs: report.pair_counts.unlike,
    })
}

fn build_corpus(args: BuildCorpusArgs) -> Result<()> {
    let docs = load_documents(&args.input)?;
    let head = ProjectionHead::load(&args.head)?;
    let spec = EncoderSpec::Hashing {
        dim: head.in_dim(),
        ngram_max: args.ngram_max,
    };
    let encoder = spec.build()?;
    let items = labelled_examples(&docs, &*encoder)?;
    let corpus = StandardCorpus::build(items, args.corpus.config(), derive_seed(args.seed, 3), &head, spec)?;
    corpus.save(&args.output)?;
    print_json(&corpus.stats())
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut docs = load_documents(&args.input)?;
    if let Some(n) = args.balanced_per_class {
        docs = pipeline::balanced_subset(&docs, n, derive_seed(args.seed, 4))?;
    }
    let config = PipelineConfig {
        seed: args.seed,
        test_fraction: args.test_fraction,
        hash_dim: args.hash.hash_dim,
        ngram_max: args.hash.ngram_max,
        out_dim: args.out_dim,
        train: args.train.config(args.seed),
        corpus: args.corpus.config(),
    };
    let out = pipeline::run_eval(docs, &config)?;
    std::fs::write(&args.roc, out.roc.to_csv()).with_context(|| format!("writing {}", args.roc.display()))?;
    if let Some(path) = &args.report {
        let report = serde_json::json!({
            "metrics": out.summary,
            "confusion": {
                "tp": out.confusion.tp,
                "fp": out.confusion.fp,
                "tn": out.confusion.tn,
                "fn": out.confusion.fn_,
            },
            "gap": {
                "n_queries": out.gap.n_queries,
                "median_top_match": out.gap.median_top_match,
                "median_opposite_avg": out.gap.median_opposite_avg,
                "gap": out.gap.gap(),
            },
            "skipped_queries": out.skipped_queries,
            "train_batches": out.train_report.loss_history.len(),
            "corpus": out.corpus.stats(),
        });
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.save_head {
        out.head.save(path)?;
    }
    if let Some(path) = &args.save_corpus {
        out.corpus.save(path)?;
    }
    print_json(&out.summary)
}

fn serve(args: ServeArgs) -> Result<()> {
    let config = sencorp_service::ServiceConfig {
        bind_addr: args.bind_addr,
        corpus_path: args.corpus_path,
        head_path: args.head_path,
        read_only: args.read_only,
        dedup_tau: args.dedup_tau,
        recluster_r: args.recluster_r,
    };
    tokio::runtime::Runtime::new()?.block_on(sencorp_service::serve(config))
}

fn load_model(model: &ModelArgs) -> Result<(StandardCorpus, ProjectionHead, Arc<dyn TextEncoder>)> {
    let head = ProjectionHead::load(&model.head)?;
    let corpus = StandardCorpus::load(&model.corpus)?;
    if corpus.head_version() != head.version() {
        bail!(
            "corpus was embedded with head version {}, {} is version {}",
            corpus.head_version(),
            model.head.display(),
            head.version()
        );
    }
    let encoder = corpus.encoder().build()?;
    Ok((corpus, head, encoder))
}

fn classify_texts(args: ClassifyArgs) -> Result<()> {
    let (corpus, head, encoder) = load_model(&args.model)?;
    let texts: Vec<String> = match (&args.source.text, &args.source.file) {
        (Some(t), _) => vec![t.clone()],
        (None, Some(path)) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(str::to_string)
            .collect(),
        (None, None) => unreachable!("clap requires one source"),
    };
    ensure!(!texts.is_empty(), "no texts to classify");
    let mut predictions = Vec::with_capacity(texts.len());
    for (i, text) in texts.iter().enumerate() {
        let p = classify(&corpus, &head, &*encoder, text, &i.to_string())
            .with_context(|| format!("text {i} cannot be classified"))?;
        predictions.push(p);
    }
    let mut out = BufWriter::new(std::io::stdout().lock());
    for p in &predictions {
        write_json_line(&mut out, p)?;
    }
    out.flush()?;
    Ok(())
}

fn contribute(args: ContributeArgs) -> Result<()> {
    let (mut corpus, head, encoder) = load_model(&args.model)?;
    corpus.set_thresholds(args.dedup_tau, args.recluster_r)?;
    let items: Vec<(String, Sentiment)> = match (&args.input, &args.text, args.label) {
        (Some(path), _, _) => read_jsonl::<ContributionLine>(path)?
            .into_iter()
            .enumerate()
            .map(|(i, l)| match l.label {
                Some(label) => Ok((l.text, label)),
                None => bail!("item {i} has no label"),
            })
            .collect::<Result<_>>()?,
        (None, Some(text), Some(label)) => vec![(text.clone(), label)],
        _ => bail!("give --input or both --text and --label"),
    };
    ensure!(!items.is_empty(), "no items to contribute");
    let (next, report) = corpus.contributed_texts(items, &head, &*encoder)?;
    next.save(&args.model.corpus)?;
    print_json(&report)
}
