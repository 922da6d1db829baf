//! Command-line workflow: ingest, extract, split, stats, train, predict,
//! highlight, recall and evaluate.
//!
//! Model and training settings are layered: built-in defaults, then an
//! optional TOML file with `[model]` and `[train]` tables, then flags.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::attention::{top_k_highlights, HighlightRecord};
use crate::checkpoint::{load_model, save_model, CheckpointMeta};
use crate::data::{
    corpus_stats, dedup, make_challenging_split, make_random_split, read_raw_corpus, FieldMap,
    RawFormat, SplitSizes,
};
use crate::encoder::EncoderKind;
use crate::error::{Error, Result};
use crate::evaluation::{
    baseline_cls_highlights, build_highlight_eval_set, mean_recall, predict_examples,
    read_evidence, report_against, report_for, BaselineImportance, Matcher, MetricReport,
    Prediction,
};
use crate::model::{DocContext, Example, FactModel, ModelConfig};
use crate::srl::{
    extract_corpus, read_sidecar, write_sidecar, FixtureBackend, SrlBackend, SubprocessBackend,
};
use crate::training::{sweep_heads, train, TrainConfig, WeightMode};
use crate::types::{read_jsonl, read_samples, write_atomic, write_jsonl, Sample};

#[derive(Debug, Parser)]
#[command(
    name = "finefact",
    version,
    about = "Fine-grained factual inconsistency detection"
)]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map a raw annotated corpus onto samples and drop duplicate pairs.
    Ingest(IngestArgs),
    /// Run SRL over a corpus and write the frames sidecar.
    Extract(ExtractArgs),
    /// Write train/validation/test corpora and a split manifest.
    Split(SplitArgs),
    /// Count error types and system categories per source.
    Stats(StatsArgs),
    /// Train a detector and keep the best validation checkpoint.
    Train(TrainArgs),
    /// Write per-sample probabilities and labels.
    Predict(PredictArgs),
    /// Write the top-k document fact highlights per sample.
    Highlight(HighlightArgs),
    /// Recall@k of highlights against evidence sentences.
    Recall(RecallArgs),
    /// Score predictions per system category.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Fixture,
    Subprocess,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value = "fixture")]
    pub backend: BackendKind,
    /// Command speaking the JSON-lines SRL protocol.
    #[arg(long)]
    pub srl_command: Option<String>,
    /// Verb lexicon of the fixture backend (defaults to the synthetic lexicon).
    #[arg(long, value_delimiter = ',')]
    pub verbs: Vec<String>,
    #[arg(long, default_value = "unversioned")]
    pub backend_version: String,
}

impl BackendArgs {
    pub fn build(&self) -> Result<Box<dyn SrlBackend>> {
        match self.backend {
            BackendKind::Fixture => Ok(Box::new(if self.verbs.is_empty() {
                crate::synthetic::fixture_backend()
            } else {
                FixtureBackend::new(&self.verbs)
            })),
            BackendKind::Subprocess => {
                let cmd = self.srl_command.as_deref().ok_or_else(|| {
                    Error::Config("--srl-command is required for the subprocess backend".into())
                })?;
                Ok(Box::new(SubprocessBackend::from_command_line(
                    cmd,
                    self.backend_version.clone(),
                )?))
            }
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<RawFormatArg>,
    /// TOML field mapping (`id`, `document`, `summary`, `labels`, ...).
    #[arg(long)]
    pub field_map: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum RawFormatArg {
    Jsonl,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum SplitMode {
    Random,
    Challenging,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "random")]
    pub mode: SplitMode,
    /// Train, validation and test sizes for the random split.
    #[arg(long, value_delimiter = ',', default_value = "3689,300,500")]
    pub sizes: Vec<usize>,
    /// System whose summaries form the challenging test set.
    #[arg(long, default_value = "bart")]
    pub holdout_system: String,
    #[arg(long, default_value_t = 550)]
    pub validation_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Also write the counts as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum EncoderArg {
    Toy,
    Adapter,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum DocContextArg {
    Attention,
    MeanPool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum WeightModeArg {
    Ratio,
    Inverse,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelFlags {
    /// TOML file with `[model]` and `[train]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub encoder: Option<EncoderArg>,
    /// Hidden size of the toy encoder.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Backbone parameters for the adapter encoder.
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
    /// WordPiece vocabulary for the adapter encoder.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub adapter_dim: Option<usize>,
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long, value_enum)]
    pub doc_context: Option<DocContextArg>,
    /// Keep the adapters frozen as well.
    #[arg(long)]
    pub freeze_adapters: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub grad_accum: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum)]
    pub weight_mode: Option<WeightModeArg>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub validation: PathBuf,
    /// Frames sidecar covering both corpora.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub training: TrainFlags,
    /// Train once per head count and keep the best by validation BACC.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_missing_value = "1,4,8,16")]
    pub sweep_heads: Option<Vec<usize>>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub frames: PathBuf,
    /// Overrides the threshold stored in the checkpoint.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum HighlightMethod {
    /// Attention mass from summary facts.
    Attention,
    /// Last-layer `[CLS]` attention of the encoder.
    Cls,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum ImportanceArg {
    Mean,
    Sum,
}

#[derive(Debug, Args, Serialize)]
pub struct HighlightArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, value_enum, default_value = "attention")]
    pub method: HighlightMethod,
    #[arg(long, value_enum, default_value = "mean")]
    pub baseline_importance: ImportanceArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum MatcherArg {
    Exact,
    Overlap,
}

#[derive(Debug, Args, Serialize)]
pub struct RecallArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSONL of `{"id", "claim", "section", "evidence": [sentence indices]}`.
    #[arg(long)]
    pub evidence: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
    pub ks: Vec<usize>,
    #[arg(long, value_enum, default_value = "overlap")]
    pub matcher: MatcherArg,
    #[arg(long, value_enum, default_value = "attention")]
    pub method: HighlightMethod,
    #[arg(long, value_enum, default_value = "mean")]
    pub baseline_importance: ImportanceArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Gold corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Prediction files, one per run; several are averaged.
    #[arg(long)]
    pub predictions: Vec<PathBuf>,
    /// Checkpoints to run instead of reading predictions; several are averaged.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub frames: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Effective model and training settings of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }

    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(model: &ModelFlags, training: &TrainFlags) -> Result<Self> {
        let mut cfg = match &model.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        let m = &mut cfg.model;
        if let Some(kind) = model.encoder {
            let keep = m.encoder.clone();
            m.encoder = match kind {
                EncoderArg::Toy => {
                    crate::encoder::EncoderConfig::toy(model.hidden.unwrap_or(keep.hidden))
                }
                EncoderArg::Adapter => crate::encoder::EncoderConfig::adapter_base(
                    model
                        .pretrained
                        .clone()
                        .or(keep.pretrained.clone())
                        .unwrap_or_default(),
                    model
                        .vocab
                        .clone()
                        .or(keep.vocab.clone())
                        .unwrap_or_default(),
                ),
            };
            if m.encoder.kind == keep.kind {
                m.encoder.adapter_dim = keep.adapter_dim;
                m.encoder.train_adapters = keep.train_adapters;
            }
        }
        if let (Some(h), EncoderKind::Toy) = (model.hidden, m.encoder.kind) {
            m.encoder.hidden = h;
            m.encoder.ffn = 2 * h;
        }
        if let Some(p) = &model.pretrained {
            m.encoder.pretrained = Some(p.clone());
        }
        if let Some(v) = &model.vocab {
            m.encoder.vocab = Some(v.clone());
        }
        if let Some(h) = model.heads {
            m.heads = h;
        }
        if let Some(a) = model.adapter_dim {
            m.encoder.adapter_dim = a;
        }
        if let Some(t) = model.truncation {
            m.truncation = t;
        }
        if let Some(c) = model.doc_context {
            m.doc_context = match c {
                DocContextArg::Attention => DocContext::Attention,
                DocContextArg::MeanPool => DocContext::MeanPool,
            };
        }
        if model.freeze_adapters {
            m.encoder.train_adapters = false;
        }
        let t = &mut cfg.train;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = training.$f { t.$f = v; })* };
        }
        set!(epochs, lr, batch_size, grad_accum, seed, threshold, top_k);
        if let Some(w) = training.weight_mode {
            t.weight_mode = match w {
                WeightModeArg::Ratio => WeightMode::Ratio,
                WeightModeArg::Inverse => WeightMode::Inverse,
            };
        }
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingInput(_) => 1,
        Error::Backend { .. } => 2,
        Error::NonFiniteLoss { .. } => 3,
        _ => 4,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn out_dir_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

#[derive(Serialize)]
struct Snapshot<'a, A: Serialize, R: Serialize> {
    args: &'a A,
    resolved: &'a R,
}

#[derive(Serialize)]
struct PredictResolved<'a> {
    threshold: f64,
    checkpoint: &'a CheckpointMeta,
}

/// Writes `<dir>/<command>.config.toml` with every effective setting.
pub fn write_snapshot<T: Serialize>(dir: &Path, command: &str, value: &T) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let text = toml::to_string(value).map_err(|e| Error::parse("config snapshot", e))?;
    let path = dir.join(format!("{command}.config.toml"));
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingInput(path.to_path_buf()))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::parse("json output", e))?;
    write_atomic(path, format!("{text}\n").as_bytes())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Extract(a) => cmd_extract(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Highlight(a) => cmd_highlight(&a),
        Command::Recall(a) => cmd_recall(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

pub fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    require(&a.raw)?;
    let map = match &a.field_map {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| Error::parse(p.display().to_string(), e))?
        }
        None => FieldMap::default(),
    };
    let format = match a.format {
        Some(RawFormatArg::Jsonl) => RawFormat::Jsonl,
        Some(RawFormatArg::Csv) => RawFormat::Csv,
        None => RawFormat::from_path(&a.raw),
    };
    let raw = read_raw_corpus(&a.raw, format, &map)?;
    let n = raw.len();
    let (samples, report) = dedup(raw);
    write_jsonl(&a.out, &samples)?;
    write_snapshot(
        out_dir_of(&a.out),
        "ingest",
        &Snapshot {
            args: a,
            resolved: &map,
        },
    )?;
    println!(
        "{n} raw samples, {} duplicates removed ({} with conflicting labels), {} kept",
        report.removed.len(),
        report.conflicts.len(),
        samples.len()
    );
    Ok(())
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    let samples = read_samples(&a.corpus)?;
    let backend = a.backend.build()?;
    let (records, warnings) = extract_corpus(&samples, backend.as_ref())?;
    for w in &warnings {
        log::warn!("{w}");
    }
    write_sidecar(&a.out, &records)?;
    write_snapshot(out_dir_of(&a.out), "extract", a)?;
    println!(
        "{} samples, {} frame records, {} warnings",
        samples.len(),
        records.len(),
        warnings.len()
    );
    Ok(())
}

pub fn cmd_split(a: &SplitArgs) -> Result<()> {
    let samples = read_samples(&a.corpus)?;
    let split = match a.mode {
        SplitMode::Random => {
            let [train, validation, test] = a.sizes[..] else {
                return Err(Error::Config(format!(
                    "--sizes needs three values, got {:?}",
                    a.sizes
                )));
            };
            make_random_split(
                &samples,
                SplitSizes {
                    train,
                    validation,
                    test,
                },
                a.seed,
            )?
        }
        SplitMode::Challenging => {
            make_challenging_split(&samples, &a.holdout_system, a.validation_size, a.seed)?
        }
    };
    ensure_dir(&a.out_dir)?;
    write_jsonl(&a.out_dir.join("train.jsonl"), &split.train)?;
    write_jsonl(&a.out_dir.join("validation.jsonl"), &split.validation)?;
    write_jsonl(&a.out_dir.join("test.jsonl"), &split.test)?;
    split.manifest.write(&a.out_dir.join("manifest.json"))?;
    write_snapshot(&a.out_dir, "split", a)?;
    println!(
        "train {}, validation {}, test {}, removed for document overlap {}",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.manifest.removed_overlap.len()
    );
    Ok(())
}

pub fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let samples = read_samples(&a.corpus)?;
    let stats = corpus_stats(&samples);
    print!("{}", stats.to_table());
    if let Some(out) = &a.out {
        write_json(out, &stats)?;
        write_snapshot(out_dir_of(out), "stats", a)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepEntry {
    heads: usize,
    best_epoch: usize,
    val_bacc: f64,
    val_f1: f64,
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::resolve(&a.model, &a.training)?;
    let train_samples = read_samples(&a.train)?;
    let val_samples = read_samples(&a.validation)?;
    let frames = read_sidecar(&a.frames)?;
    ensure_dir(&a.out_dir)?;
    let log_path = a.out_dir.join("train_log.jsonl");
    if log_path.exists() {
        std::fs::remove_file(&log_path).map_err(|e| Error::io(&log_path, e))?;
    }
    cfg.train.log_path = Some(log_path);
    write_snapshot(&a.out_dir, "train", &cfg)?;

    let outcome = match &a.sweep_heads {
        Some(heads) => {
            let runs = sweep_heads(
                &cfg.model,
                heads,
                (&train_samples, &val_samples),
                &frames,
                &cfg.train,
            )?;
            let table: Vec<SweepEntry> = runs
                .iter()
                .map(|r| SweepEntry {
                    heads: r.heads,
                    best_epoch: r.outcome.best_epoch,
                    val_bacc: r.outcome.best_val_bacc,
                    val_f1: r.outcome.best_val_f1,
                })
                .collect();
            write_json(&a.out_dir.join("sweep.json"), &table)?;
            let best = runs.into_iter().next().expect("non-empty sweep");
            println!("selected {} heads", best.heads);
            best.outcome
        }
        None => {
            let model = FactModel::new(cfg.model.clone(), cfg.train.seed)?;
            let train_set = model.prepare_examples(&train_samples, &frames)?;
            let val_set = model.prepare_examples(&val_samples, &frames)?;
            train(model, &train_set, &val_set, &cfg.train)?
        }
    };
    let mut meta = CheckpointMeta::new(outcome.model.config.clone(), cfg.train.seed);
    meta.epoch = outcome.best_epoch;
    meta.val_bacc = Some(outcome.best_val_bacc);
    meta.val_f1 = Some(outcome.best_val_f1);
    meta.threshold = cfg.train.threshold;
    save_model(&a.out_dir.join("model.ckpt"), &outcome.model, &meta)?;
    println!(
        "best epoch {}: validation BACC {:.4}, F1 {:.4}",
        outcome.best_epoch, outcome.best_val_bacc, outcome.best_val_f1
    );
    Ok(())
}

fn load_examples(
    checkpoint: &Path,
    corpus: &Path,
    frames: &Path,
) -> Result<(FactModel, CheckpointMeta, Vec<Example>)> {
    let (model, meta) = load_model(checkpoint)?;
    let samples = read_samples(corpus)?;
    let frames = read_sidecar(frames)?;
    let examples = model.prepare_examples(&samples, &frames)?;
    Ok((model, meta, examples))
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let (model, meta, examples) = load_examples(&a.checkpoint, &a.corpus, &a.frames)?;
    let threshold = a.threshold.unwrap_or(meta.threshold);
    let preds = predict_examples(&model, &examples, threshold)?;
    write_jsonl(&a.out, &preds)?;
    write_snapshot(
        out_dir_of(&a.out),
        "predict",
        &Snapshot {
            args: a,
            resolved: &PredictResolved {
                threshold,
                checkpoint: &meta,
            },
        },
    )?;
    println!("{} predictions", preds.len());
    Ok(())
}

fn importance_mode(a: ImportanceArg) -> BaselineImportance {
    match a {
        ImportanceArg::Mean => BaselineImportance::Mean,
        ImportanceArg::Sum => BaselineImportance::Sum,
    }
}

fn highlight_one(
    model: &FactModel,
    ex: &Example,
    k: usize,
    method: HighlightMethod,
    mode: BaselineImportance,
) -> Result<crate::attention::HighlightResult> {
    let inf = model.infer(&ex.prepared)?;
    match method {
        HighlightMethod::Attention => {
            let scores = inf.importance.as_ref().ok_or_else(|| {
                Error::Config(
                    "attention highlights need a model with document fact attention".into(),
                )
            })?;
            top_k_highlights(&scores.scores, &ex.prepared.document_frames(), k)
        }
        HighlightMethod::Cls => {
            baseline_cls_highlights(&inf.cls_attention, &ex.prepared.doc_frames.frames, k, mode)
        }
    }
}

pub fn cmd_highlight(a: &HighlightArgs) -> Result<()> {
    let (model, _, examples) = load_examples(&a.checkpoint, &a.corpus, &a.frames)?;
    let mode = importance_mode(a.baseline_importance);
    let records = examples
        .iter()
        .map(|ex| {
            let h = highlight_one(&model, ex, a.top_k, a.method, mode)?;
            Ok(HighlightRecord::render(
                &ex.prepared.id,
                &h,
                &ex.prepared.document,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    write_jsonl(&a.out, &records)?;
    write_snapshot(out_dir_of(&a.out), "highlight", a)?;
    println!("{} highlight records", records.len());
    Ok(())
}

#[derive(Serialize)]
struct RecallReport {
    items: usize,
    dropped: usize,
    matcher: Matcher,
    recall: Vec<(usize, f64)>,
}

pub fn cmd_recall(a: &RecallArgs) -> Result<()> {
    let (model, _) = load_model(&a.checkpoint)?;
    let records = read_evidence(&a.evidence)?;
    let backend = a.backend.build()?;
    let set = build_highlight_eval_set(&records, backend.as_ref())?;
    let samples: Vec<Sample> = set.items.iter().map(|i| i.as_sample()).collect();
    let (sidecar, _) = extract_corpus(&samples, backend.as_ref())?;
    let frames = crate::srl::FrameIndex::from_records(sidecar);
    let k_max = a.ks.iter().copied().max().unwrap_or(1).max(1);
    let mode = importance_mode(a.baseline_importance);
    let mut results = Vec::with_capacity(samples.len());
    for (s, item) in samples.iter().zip(&set.items) {
        let ex = Example {
            prepared: model.prepare(s, &frames)?,
            labels: s.labels,
            category: s.system_category,
        };
        results.push((
            highlight_one(&model, &ex, k_max, a.method, mode)?,
            item.gold.clone(),
        ));
    }
    let matcher = match a.matcher {
        MatcherArg::Exact => Matcher::Exact,
        MatcherArg::Overlap => Matcher::Overlap,
    };
    let recall = mean_recall(&results, &a.ks, matcher)?;
    for (k, r) in a.ks.iter().zip(&recall) {
        println!("recall@{k}: {:.4}", r);
    }
    println!("{} records, {} dropped", set.items.len(), set.dropped);
    if let Some(out) = &a.out {
        write_json(
            out,
            &RecallReport {
                items: set.items.len(),
                dropped: set.dropped,
                matcher,
                recall: a.ks.iter().copied().zip(recall).collect(),
            },
        )?;
        write_snapshot(out_dir_of(out), "recall", a)?;
    }
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let samples = read_samples(&a.corpus)?;
    let mut reports = Vec::new();
    for path in &a.predictions {
        let preds: Vec<Prediction> = read_jsonl(path)?;
        let by_id: std::collections::HashMap<&str, &Prediction> =
            preds.iter().map(|p| (p.id.as_str(), p)).collect();
        let aligned = samples
            .iter()
            .map(|s| {
                by_id
                    .get(s.id.as_str())
                    .map(|p| (*p).clone())
                    .ok_or_else(|| Error::InvalidSample {
                        id: s.id.clone(),
                        reason: format!("no prediction in {}", path.display()),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let golds: Vec<_> = samples.iter().map(|s| s.labels).collect();
        let cats: Vec<_> = samples.iter().map(|s| s.system_category).collect();
        let mut r = report_against(&aligned, &golds, &cats)?;
        r.checkpoint = Some(path.display().to_string());
        reports.push(r);
    }
    if !a.checkpoint.is_empty() {
        let frames_path = a
            .frames
            .as_ref()
            .ok_or_else(|| Error::Config("--frames is required with --checkpoint".into()))?;
        let frames = read_sidecar(frames_path)?;
        for ckpt in &a.checkpoint {
            let (model, meta) = load_model(ckpt)?;
            let examples = model.prepare_examples(&samples, &frames)?;
            let preds = predict_examples(&model, &examples, a.threshold.unwrap_or(meta.threshold))?;
            let mut r = report_for(&preds, &examples)?;
            r.seeds = vec![meta.seed];
            r.checkpoint = Some(ckpt.display().to_string());
            reports.push(r);
        }
    }
    if reports.is_empty() {
        return Err(Error::Config("give --predictions or --checkpoint".into()));
    }
    let mut report = MetricReport::mean(&reports)?;
    if reports.len() == 1 {
        report.checkpoint = reports[0].checkpoint.clone();
    }
    print!("{}", report.to_table());
    if let Some(out) = &a.out {
        write_json(out, &report)?;
        write_snapshot(out_dir_of(out), "evaluate", a)?;
    }
    Ok(())
}
