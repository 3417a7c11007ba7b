//! Command-line surface binding the library into reproducible experiments.
//!
//! Exit codes: 0 success, 2 usage/validation failure, 3 runtime failure.
//! The OG_SEED environment variable overrides any configured seed. Every
//! output artifact carries a (config hash, seed, corpus hash) provenance
//! stamp so reruns can be checked for equality.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::{ga_pipeline, ig_pipeline, textrank_heading, StepwiseOutline};
use crate::boundary::BoundaryVariant;
use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::ExperimentConfig;
use crate::corpus::{
    self, load_examples, parse_article, split_corpus, write_examples, Block, OutlineExample,
    Rejection, WikitextFormat,
};
use crate::decoder::HeadingDependency;
use crate::metrics::{evaluate_corpus, paired_t_test, EvalReport};
use crate::model::HistGen;
use crate::synthetic;
use crate::tensor::Real;
use crate::trainer::{self, fnv1a_hex, predict_outline, Provenance, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "histgen",
    version,
    about = "Hierarchical outline generation: corpus building, training, inference, evaluation"
)]
pub struct Cli {
    /// JSON experiment config; CLI flags override file keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override (OG_SEED env var wins over this).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap for internally parallel stages.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse heading-annotated articles into outline triples and split them.
    BuildCorpus(BuildCorpusArgs),
    /// Train a model and keep the best-perplexity checkpoint.
    Train(TrainArgs),
    /// Generate an outline for a plain-text multi-paragraph document.
    Generate(GenerateArgs),
    /// Score predictions against gold outlines.
    Evaluate(EvaluateArgs),
    /// Train and score the full model and its five ablation variants.
    Ablate(AblateArgs),
    /// Run a step-wise baseline system over the test split.
    RunBaseline(RunBaselineArgs),
    /// Verify model gradients against central differences.
    GradCheck(GradCheckArgs),
}

#[derive(Args, Debug)]
struct BuildCorpusArgs {
    /// Directory of article files (or a single dump file with #ARTICLE
    /// delimiters).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 130_000)]
    doc_vocab: usize,
    #[arg(long, default_value_t = 16_000)]
    head_vocab: usize,
    /// Category recorded for dump-file articles.
    #[arg(long, default_value = "mixture")]
    category: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Corpus directory holding train.jsonl and dev.jsonl.
    #[arg(long)]
    corpus: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Training log path (default: <out>.log).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<Real>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    clip: Option<Real>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    embed: Option<usize>,
    #[arg(long)]
    doc_vocab: Option<usize>,
    #[arg(long)]
    head_vocab: Option<usize>,
    /// Boundary variant: mpd, mpd_minus_p, gpd or crf.
    #[arg(long)]
    variant: Option<String>,
    /// Ablation letters out of P, S, H, R.
    #[arg(long)]
    ablate: Option<String>,
    /// Heading dependency: markov, global or none.
    #[arg(long)]
    heading_dep: Option<String>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Plain-text document: paragraphs separated by blank lines.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Predicted outlines (line-delimited records).
    #[arg(long)]
    pred: PathBuf,
    /// Gold outlines.
    #[arg(long)]
    gold: PathBuf,
    /// Optional second system for a paired significance test.
    #[arg(long)]
    pred_b: Option<PathBuf>,
    /// Report JSON output path (stdout table is always printed).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for the comparison table and per-variant artifacts.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<Real>,
    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum BaselineSystem {
    IgCrfTextrank,
    IgGpdTextrank,
    IgCrfNeural,
    IgGpdNeural,
    GaTextrank,
    GaNeural,
}

impl BaselineSystem {
    fn required_boundary(&self) -> Option<BoundaryVariant> {
        match self {
            BaselineSystem::IgCrfTextrank | BaselineSystem::IgCrfNeural => {
                Some(BoundaryVariant::Crf)
            }
            BaselineSystem::IgGpdTextrank | BaselineSystem::IgGpdNeural => {
                Some(BoundaryVariant::Gpd)
            }
            BaselineSystem::GaTextrank | BaselineSystem::GaNeural => None,
        }
    }

    fn needs_checkpoint(&self) -> bool {
        !matches!(self, BaselineSystem::GaTextrank)
    }

    fn name(&self) -> &'static str {
        match self {
            BaselineSystem::IgCrfTextrank => "ig_crf_textrank",
            BaselineSystem::IgGpdTextrank => "ig_gpd_textrank",
            BaselineSystem::IgCrfNeural => "ig_crf_neural",
            BaselineSystem::IgGpdNeural => "ig_gpd_neural",
            BaselineSystem::GaTextrank => "ga_textrank",
            BaselineSystem::GaNeural => "ga_neural",
        }
    }
}

#[derive(Args, Debug)]
struct RunBaselineArgs {
    #[arg(long, value_enum)]
    system: BaselineSystem,
    #[arg(long)]
    corpus: PathBuf,
    /// Trained checkpoint; required for every system except ga_textrank.
    /// The checkpoint's boundary variant must match the system.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 32)]
    embed: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps: Real,
    #[arg(long, default_value_t = 1e-4)]
    tol: Real,
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(usage("--workers must be positive"));
        }
        // A failed build means a pool already exists; that is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut experiment = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| usage(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    let seed = resolve_seed(cli.seed, &experiment)?;
    experiment.seed = Some(seed);
    experiment.train.seed = seed;

    match cli.command {
        Command::BuildCorpus(args) => cmd_build_corpus(args, &experiment),
        Command::Train(args) => cmd_train(args, &experiment),
        Command::Generate(args) => cmd_generate(args),
        Command::Evaluate(args) => cmd_evaluate(args, &experiment),
        Command::Ablate(args) => cmd_ablate(args, &experiment),
        Command::RunBaseline(args) => cmd_run_baseline(args, &experiment),
        Command::GradCheck(args) => cmd_grad_check(args, &experiment),
    }
}

/// OG_SEED env > --seed flag > config file > train config default.
fn resolve_seed(flag: Option<u64>, cfg: &ExperimentConfig) -> Result<u64, CliError> {
    if let Ok(v) = std::env::var("OG_SEED") {
        return v
            .trim()
            .parse()
            .map_err(|_| usage(format!("OG_SEED is not a valid seed: {v:?}")));
    }
    Ok(flag.or(cfg.seed).unwrap_or(cfg.train.seed))
}

// ── build-corpus ────────────────────────────────────────────────────

#[derive(Serialize)]
struct CorpusStats {
    articles_read: usize,
    kept: usize,
    rejected_no_sections: usize,
    rejected_too_many_sections: usize,
    rejected_empty_heading: usize,
    train: usize,
    dev: usize,
    test: usize,
    mean_sections: f64,
    doc_vocab_size: usize,
    head_vocab_size: usize,
    provenance: Provenance,
}

fn cmd_build_corpus(args: BuildCorpusArgs, experiment: &ExperimentConfig) -> Result<(), CliError> {
    if !args.input.exists() {
        return Err(usage(format!(
            "input path {} does not exist",
            args.input.display()
        )));
    }
    if args.doc_vocab < 1 || args.head_vocab < 1 {
        return Err(usage("vocabulary sizes must be at least 1"));
    }
    let format = WikitextFormat::default();
    let articles = if args.input.is_dir() {
        corpus::read_input_dir(&args.input, &format).map_err(runtime)?
    } else {
        corpus::read_dump(&args.input, &args.category, &format).map_err(runtime)?
    };

    use rayon::prelude::*;
    let parsed: Vec<Result<OutlineExample, Rejection>> =
        articles.par_iter().map(parse_article).collect();
    let articles_read = parsed.len();
    let mut kept = Vec::new();
    let (mut no_sections, mut too_many, mut empty_heading) = (0usize, 0usize, 0usize);
    for r in parsed {
        match r {
            Ok(ex) => kept.push(ex),
            Err(Rejection::NoSections) => no_sections += 1,
            Err(Rejection::TooManySections(_)) => too_many += 1,
            Err(Rejection::EmptyHeading) => empty_heading += 1,
        }
    }

    let corpus_hash = trainer::corpus_hash(&kept);
    let mean_sections = if kept.is_empty() {
        0.0
    } else {
        kept.iter().map(|e| e.section_count()).sum::<usize>() as f64 / kept.len() as f64
    };
    let seed = experiment.train.seed;
    let kept_count = kept.len();
    let splits = split_corpus(kept, seed).map_err(|e| usage(e.to_string()))?;

    fs::create_dir_all(&args.output)
        .map_err(|e| runtime(format!("cannot create {}: {e}", args.output.display())))?;
    write_examples(&args.output.join("train.jsonl"), &splits.train).map_err(runtime)?;
    write_examples(&args.output.join("dev.jsonl"), &splits.dev).map_err(runtime)?;
    write_examples(&args.output.join("test.jsonl"), &splits.test).map_err(runtime)?;

    let doc_vocab =
        corpus::build_vocab(&splits.train, corpus::Side::Document, args.doc_vocab).map_err(runtime)?;
    let head_vocab =
        corpus::build_vocab(&splits.train, corpus::Side::Heading, args.head_vocab).map_err(runtime)?;
    let dump_vocab = |v: &corpus::Vocabulary, path: &Path| -> Result<(), CliError> {
        let mut text = String::new();
        for i in 0..v.len() {
            text.push_str(v.token(i));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
    };
    dump_vocab(&doc_vocab, &args.output.join("doc_vocab.txt"))?;
    dump_vocab(&head_vocab, &args.output.join("head_vocab.txt"))?;

    let stats = CorpusStats {
        articles_read,
        kept: kept_count,
        rejected_no_sections: no_sections,
        rejected_too_many_sections: too_many,
        rejected_empty_heading: empty_heading,
        train: splits.train.len(),
        dev: splits.dev.len(),
        test: splits.test.len(),
        mean_sections,
        doc_vocab_size: doc_vocab.len(),
        head_vocab_size: head_vocab.len(),
        provenance: Provenance {
            config_hash: experiment.hash(),
            seed,
            corpus_hash,
        },
    };
    let stats_json = serde_json::to_string_pretty(&stats).expect("serializable");
    fs::write(args.output.join("stats.json"), &stats_json).map_err(runtime)?;
    println!("{stats_json}");
    Ok(())
}

// ── train ───────────────────────────────────────────────────────────

fn parse_variant(s: &str) -> Result<BoundaryVariant, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| usage(format!("unknown boundary variant {s:?}")))
}

fn parse_dependency(s: &str) -> Result<HeadingDependency, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| usage(format!("unknown heading dependency {s:?}")))
}

fn assemble_train_config(
    preset: Option<Preset>,
    experiment: &ExperimentConfig,
) -> TrainConfig {
    let mut cfg = match preset {
        Some(Preset::Desk) => TrainConfig::desk(),
        Some(Preset::Paper) => TrainConfig::paper(),
        None => experiment.train.clone(),
    };
    cfg.seed = experiment.train.seed;
    cfg
}

fn apply_train_overrides(cfg: &mut TrainConfig, args: &TrainArgs) -> Result<(), CliError> {
    if let Some(v) = args.epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = args.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = args.clip {
        cfg.clip_norm = v;
    }
    if let Some(v) = args.hidden {
        cfg.model.hidden = v;
    }
    if let Some(v) = args.embed {
        cfg.model.embed_dim = v;
    }
    if let Some(v) = args.doc_vocab {
        cfg.model.doc_vocab = v;
    }
    if let Some(v) = args.head_vocab {
        cfg.model.head_vocab = v;
    }
    if let Some(v) = &args.variant {
        cfg.model.boundary = parse_variant(v)?;
    }
    if let Some(v) = &args.heading_dep {
        cfg.model.heading_dependency = parse_dependency(v)?;
    }
    if let Some(letters) = &args.ablate {
        for c in letters.chars() {
            if !"PSHRpshr".contains(c) {
                return Err(usage(format!("unknown ablation letter {c:?}")));
            }
        }
        cfg.model = cfg.model.clone().ablate(letters);
    }
    Ok(())
}

fn load_split(dir: &Path, name: &str) -> Result<Vec<OutlineExample>, CliError> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(usage(format!("missing corpus file {}", path.display())));
    }
    load_examples(&path).map_err(runtime)
}

fn cmd_train(args: TrainArgs, experiment: &ExperimentConfig) -> Result<(), CliError> {
    let mut cfg = assemble_train_config(args.preset, experiment);
    apply_train_overrides(&mut cfg, &args)?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let train_set = load_split(&args.corpus, "train.jsonl")?;
    let dev_set = load_split(&args.corpus, "dev.jsonl")?;
    let outcome = trainer::train(&train_set, &dev_set, &cfg).map_err(runtime)?;
    for (rec, secs) in outcome.history.iter().zip(&outcome.epoch_secs) {
        println!(
            "epoch {:>3}  train_loss {:>12.6}  dev_ppl {:>12.6}  wallclock {:.2}s",
            rec.epoch, rec.train_loss, rec.dev_ppl, secs
        );
    }
    outcome.checkpoint.save(&args.out).map_err(runtime)?;
    let log_path = args
        .log
        .unwrap_or_else(|| args.out.with_extension("log.jsonl"));
    fs::write(&log_path, outcome.log_lines()).map_err(runtime)?;
    println!(
        "best dev perplexity {:.6}; checkpoint written to {}",
        outcome.checkpoint.best_dev_ppl,
        args.out.display()
    );
    Ok(())
}

// ── generate ────────────────────────────────────────────────────────

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    if !path.exists() {
        return Err(usage(format!("checkpoint {} does not exist", path.display())));
    }
    Checkpoint::load(path).map_err(|e| match e {
        CheckpointError::Io { .. } => runtime(e),
        other => usage(other.to_string()),
    })
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    if !args.input.exists() {
        return Err(usage(format!("input {} does not exist", args.input.display())));
    }
    let raw = fs::read_to_string(&args.input).map_err(runtime)?;
    let blocks = WikitextFormat::default().parse_blocks(&raw);
    let mut paragraphs: Vec<Vec<String>> = Vec::new();
    for block in blocks {
        match block {
            Block::Heading { .. } => {
                return Err(usage(
                    "input contains heading markup; expected plain paragraphs separated by blank lines",
                ))
            }
            Block::Paragraph(text) => {
                let tokens = corpus::preprocess_tokens(&text);
                if !tokens.is_empty() {
                    paragraphs.push(tokens);
                }
            }
        }
    }
    if paragraphs.is_empty() {
        return Err(usage("input document has no non-empty paragraphs"));
    }

    let model = ckpt.model();
    let ids: Vec<Vec<usize>> = paragraphs.iter().map(|p| ckpt.doc_vocab.encode(p)).collect();
    let trace = model.generate_outline(&ids).map_err(runtime)?;

    let mut out = String::new();
    let meta = serde_json::json!({
        "type": "meta",
        "paragraphs": trace.labels.len(),
        "sections": trace.headings.len(),
        "degenerate_headings": trace.degenerate_headings,
        "provenance": {
            "config_hash": ckpt.provenance.config_hash,
            "seed": ckpt.provenance.seed,
            "corpus_hash": fnv1a_hex(raw.as_bytes()),
        },
    });
    writeln!(out, "{meta}").unwrap();
    for (i, (&label, &prob)) in trace.labels.iter().zip(&trace.boundary_probs).enumerate() {
        let line = serde_json::json!({
            "type": "label",
            "paragraph": i,
            "label": label,
            "prob": prob,
        });
        writeln!(out, "{line}").unwrap();
    }
    for (n, heading) in trace.headings.iter().enumerate() {
        let tokens: Vec<String> = ckpt.head_vocab.decode(heading);
        let line = serde_json::json!({
            "type": "heading",
            "section": n,
            "tokens": tokens,
        });
        writeln!(out, "{line}").unwrap();
    }
    fs::write(&args.output, &out).map_err(runtime)?;
    println!(
        "{} paragraphs -> {} sections; outline written to {}",
        trace.labels.len(),
        trace.headings.len(),
        args.output.display()
    );
    Ok(())
}

// ── evaluate ────────────────────────────────────────────────────────

fn align_to_gold(
    preds: Vec<OutlineExample>,
    gold: &[OutlineExample],
) -> Result<Vec<OutlineExample>, CliError> {
    use std::collections::HashMap;
    let mut by_id: HashMap<String, OutlineExample> = HashMap::new();
    for p in preds {
        if by_id.insert(p.id.clone(), p).is_some() {
            return Err(usage("duplicate prediction ids"));
        }
    }
    gold.iter()
        .map(|g| {
            by_id
                .remove(&g.id)
                .ok_or_else(|| usage(format!("no prediction for document {:?}", g.id)))
        })
        .collect()
}

fn metrics_table(rows: &[(String, &EvalReport)]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<24} {:>10} {:>10} {:>12}",
        "system", "EM_outline", "EM_sec", "Rouge_head"
    )
    .unwrap();
    for (name, r) in rows {
        writeln!(
            out,
            "{:<24} {:>10.4} {:>10.4} {:>12.4}",
            name, r.em_outline, r.em_sec, r.rouge_head
        )
        .unwrap();
    }
    out
}

fn cmd_evaluate(args: EvaluateArgs, experiment: &ExperimentConfig) -> Result<(), CliError> {
    let gold = load_examples(&args.gold).map_err(|e| usage(e.to_string()))?;
    if gold.is_empty() {
        return Err(usage(format!("gold file {} is empty", args.gold.display())));
    }
    let preds = load_examples(&args.pred).map_err(|e| usage(e.to_string()))?;
    if preds.is_empty() {
        return Err(usage(format!(
            "prediction file {} is empty",
            args.pred.display()
        )));
    }
    let preds = align_to_gold(preds, &gold)?;
    let report_a = evaluate_corpus(&preds, &gold).map_err(runtime)?;

    let mut rows = vec![("pred".to_string(), &report_a)];
    let mut report_b_opt = None;
    if let Some(path_b) = &args.pred_b {
        let preds_b = load_examples(path_b).map_err(|e| usage(e.to_string()))?;
        if preds_b.is_empty() {
            return Err(usage(format!("prediction file {} is empty", path_b.display())));
        }
        let preds_b = align_to_gold(preds_b, &gold)?;
        report_b_opt = Some(evaluate_corpus(&preds_b, &gold).map_err(runtime)?);
    }
    if let Some(report_b) = &report_b_opt {
        rows.push(("pred-b".to_string(), report_b));
    }
    print!("{}", metrics_table(&rows));

    let significance = report_b_opt.as_ref().map(|report_b| {
        let series = |r: &EvalReport, f: &dyn Fn(&crate::metrics::DocEval) -> f64| -> Vec<f64> {
            r.per_document.iter().map(f).collect()
        };
        let em_o_a = series(&report_a, &|d| f64::from(u8::from(d.em_outline)));
        let em_o_b = series(report_b, &|d| f64::from(u8::from(d.em_outline)));
        let em_s_a = series(&report_a, &|d| f64::from(u8::from(d.em_sec)));
        let em_s_b = series(report_b, &|d| f64::from(u8::from(d.em_sec)));
        // documents without a correct section score 0 for pairing
        let rg_a = series(&report_a, &|d| d.rouge_head.unwrap_or(0.0));
        let rg_b = series(report_b, &|d| d.rouge_head.unwrap_or(0.0));
        serde_json::json!({
            "em_outline": paired_t_test(&em_o_a, &em_o_b).ok(),
            "em_sec": paired_t_test(&em_s_a, &em_s_b).ok(),
            "rouge_head": paired_t_test(&rg_a, &rg_b).ok(),
        })
    });
    if let Some(sig) = &significance {
        println!("paired two-tailed t-tests (pred vs pred-b): {sig}");
    }

    if let Some(out_path) = &args.output {
        let gold_bytes = fs::read(&args.gold).map_err(runtime)?;
        let doc = serde_json::json!({
            "provenance": {
                "config_hash": experiment.hash(),
                "seed": experiment.train.seed,
                "corpus_hash": fnv1a_hex(&gold_bytes),
            },
            "systems": {
                "pred": report_a,
                "pred_b": report_b_opt,
            },
            "significance": significance,
        });
        fs::write(out_path, serde_json::to_string_pretty(&doc).unwrap()).map_err(runtime)?;
        println!("report written to {}", out_path.display());
    }
    Ok(())
}

// ── ablate ──────────────────────────────────────────────────────────

pub const ABLATION_ROWS: [(&str, &str); 6] = [
    ("full", ""),
    ("minus_p", "P"),
    ("minus_s", "S"),
    ("minus_h", "H"),
    ("minus_r", "R"),
    ("minus_pshr", "PSHR"),
];

fn predict_corpus(
    ckpt: &Checkpoint,
    gold: &[OutlineExample],
) -> Result<(Vec<OutlineExample>, u64, u64), CliError> {
    let model = ckpt.model();
    let mut preds = Vec::with_capacity(gold.len());
    let (mut attention_calls, mut review_calls) = (0u64, 0u64);
    for ex in gold {
        let (pred, trace) =
            predict_outline(&model, &ckpt.doc_vocab, &ckpt.head_vocab, ex).map_err(runtime)?;
        attention_calls += trace.attention_calls;
        review_calls += trace.review_calls;
        preds.push(pred);
    }
    Ok((preds, attention_calls, review_calls))
}

fn cmd_ablate(args: AblateArgs, experiment: &ExperimentConfig) -> Result<(), CliError> {
    let mut base = match args.preset {
        Some(Preset::Desk) => TrainConfig::desk(),
        Some(Preset::Paper) => TrainConfig::paper(),
        None => experiment.train.clone(),
    };
    base.seed = experiment.train.seed;
    if let Some(v) = args.epochs {
        base.max_epochs = v;
    }
    if let Some(v) = args.lr {
        base.learning_rate = v;
    }
    if let Some(v) = args.batch {
        base.batch_size = v;
    }
    base.validate().map_err(|e| usage(e.to_string()))?;

    let train_set = load_split(&args.corpus, "train.jsonl")?;
    let dev_set = load_split(&args.corpus, "dev.jsonl")?;
    let test_set = load_split(&args.corpus, "test.jsonl")?;
    let test_hash = trainer::corpus_hash(&test_set);
    fs::create_dir_all(&args.out).map_err(runtime)?;

    let mut rows = Vec::new();
    let mut reports = serde_json::Map::new();
    for (name, letters) in ABLATION_ROWS {
        let mut cfg = base.clone();
        cfg.model = cfg.model.clone().ablate(letters);
        let outcome = trainer::train(&train_set, &dev_set, &cfg).map_err(runtime)?;
        let (preds, attention_calls, review_calls) =
            predict_corpus(&outcome.checkpoint, &test_set)?;
        if letters.contains('S') {
            assert_eq!(attention_calls, 0, "{name} must not call section attention");
        }
        if letters.contains('R') {
            assert_eq!(review_calls, 0, "{name} must not call review attention");
        }
        let report = evaluate_corpus(&preds, &test_set).map_err(runtime)?;
        println!(
            "{name}: EM_outline {:.4}  EM_sec {:.4}  Rouge_head {:.4}",
            report.em_outline, report.em_sec, report.rouge_head
        );
        outcome
            .checkpoint
            .save(&args.out.join(format!("{name}.ckpt")))
            .map_err(runtime)?;
        reports.insert(name.to_string(), serde_json::to_value(&report).unwrap());
        rows.push((name.to_string(), report));
    }

    let table_rows: Vec<(String, &EvalReport)> =
        rows.iter().map(|(n, r)| (n.clone(), r)).collect();
    let mut table = metrics_table(&table_rows);
    writeln!(table, "# test split hash: {test_hash}").unwrap();
    fs::write(args.out.join("ablation_table.txt"), &table).map_err(runtime)?;
    let doc = serde_json::json!({
        "provenance": {
            "config_hash": experiment.hash(),
            "seed": base.seed,
            "corpus_hash": test_hash,
        },
        "reports": reports,
    });
    fs::write(
        args.out.join("ablation_report.json"),
        serde_json::to_string_pretty(&doc).unwrap(),
    )
    .map_err(runtime)?;
    print!("{table}");
    Ok(())
}

// ── run-baseline ────────────────────────────────────────────────────

fn cmd_run_baseline(args: RunBaselineArgs, experiment: &ExperimentConfig) -> Result<(), CliError> {
    let test_set = load_split(&args.corpus, "test.jsonl")?;
    let ckpt = match (&args.checkpoint, args.system.needs_checkpoint()) {
        (Some(path), _) => Some(load_checkpoint(path)?),
        (None, true) => {
            return Err(usage(format!(
                "system {} requires --checkpoint",
                args.system.name()
            )))
        }
        (None, false) => None,
    };
    if let (Some(required), Some(ckpt)) = (args.system.required_boundary(), &ckpt) {
        if ckpt.config.model.boundary != required {
            return Err(usage(format!(
                "system {} needs a checkpoint trained with boundary variant {:?}, got {:?}",
                args.system.name(),
                required,
                ckpt.config.model.boundary
            )));
        }
    }

    let textrank_cfg = &experiment.textrank;
    let mut preds = Vec::with_capacity(test_set.len());
    for ex in &test_set {
        let outline = run_baseline_on(&args.system, ckpt.as_ref(), textrank_cfg, ex)?;
        preds.push(OutlineExample {
            id: ex.id.clone(),
            category: ex.category.clone(),
            paragraphs: ex.paragraphs.clone(),
            labels: outline.labels,
            headings: outline.headings,
        });
    }
    let report = evaluate_corpus(&preds, &test_set).map_err(runtime)?;
    let table = metrics_table(&[(args.system.name().to_string(), &report)]);
    print!("{table}");
    let doc = serde_json::json!({
        "system": args.system.name(),
        "provenance": {
            "config_hash": experiment.hash(),
            "seed": experiment.train.seed,
            "corpus_hash": trainer::corpus_hash(&test_set),
        },
        "report": report,
    });
    fs::write(&args.out, serde_json::to_string_pretty(&doc).unwrap()).map_err(runtime)?;
    println!("report written to {}", args.out.display());
    Ok(())
}

fn run_baseline_on(
    system: &BaselineSystem,
    ckpt: Option<&Checkpoint>,
    textrank_cfg: &crate::baselines::TextRankConfig,
    ex: &OutlineExample,
) -> Result<StepwiseOutline, CliError> {
    let section_tokens = |s: usize, e: usize| -> Vec<String> {
        ex.paragraphs[s..=e].iter().flatten().cloned().collect()
    };
    match system {
        BaselineSystem::GaTextrank => {
            Ok(ga_pipeline(ex.paragraphs.len(), &mut |i| {
                textrank_heading(&section_tokens(i, i), textrank_cfg)
            }))
        }
        BaselineSystem::GaNeural => {
            let ckpt = ckpt.expect("checked above");
            let model = ckpt.model();
            let ids: Vec<Vec<usize>> =
                ex.paragraphs.iter().map(|p| ckpt.doc_vocab.encode(p)).collect();
            // one "section" per paragraph, then merge equal headings
            let labels = vec![1u8; ids.len()];
            let trace = model
                .decode_headings_for_labels(&ids, &labels, vec![1.0; ids.len()])
                .map_err(runtime)?;
            let decoded: Vec<Vec<String>> = trace
                .headings
                .iter()
                .map(|h| ckpt.head_vocab.decode(h))
                .collect();
            Ok(ga_pipeline(ids.len(), &mut |i| decoded[i].clone()))
        }
        BaselineSystem::IgCrfTextrank | BaselineSystem::IgGpdTextrank => {
            let ckpt = ckpt.expect("checked above");
            let model = ckpt.model();
            let ids: Vec<Vec<usize>> =
                ex.paragraphs.iter().map(|p| ckpt.doc_vocab.encode(p)).collect();
            let seq = model.predict_boundary_labels(&ids).map_err(runtime)?;
            Ok(ig_pipeline(seq.labels, &mut |s, e| {
                textrank_heading(&section_tokens(s, e), textrank_cfg)
            }))
        }
        BaselineSystem::IgCrfNeural | BaselineSystem::IgGpdNeural => {
            let ckpt = ckpt.expect("checked above");
            let model = ckpt.model();
            let ids: Vec<Vec<usize>> =
                ex.paragraphs.iter().map(|p| ckpt.doc_vocab.encode(p)).collect();
            let seq = model.predict_boundary_labels(&ids).map_err(runtime)?;
            let trace = model
                .decode_headings_for_labels(&ids, &seq.labels, seq.probs)
                .map_err(runtime)?;
            let headings = trace
                .headings
                .iter()
                .map(|h| ckpt.head_vocab.decode(h))
                .collect();
            Ok(StepwiseOutline {
                labels: trace.labels,
                headings,
            })
        }
    }
}

// ── grad-check ──────────────────────────────────────────────────────

fn cmd_grad_check(args: GradCheckArgs, experiment: &ExperimentConfig) -> Result<(), CliError> {
    if args.hidden == 0 || args.embed == 0 {
        return Err(usage("--hidden and --embed must be positive"));
    }
    let seed = experiment.train.seed;
    let started = std::time::Instant::now();
    let doc = synthetic::grad_check_document(seed);
    let mut cfg = TrainConfig::desk();
    cfg.model.hidden = args.hidden;
    cfg.model.embed_dim = args.embed;

    let singleton = [doc.clone()];
    let doc_vocab =
        corpus::build_vocab(&singleton, corpus::Side::Document, cfg.model.doc_vocab).map_err(runtime)?;
    let head_vocab =
        corpus::build_vocab(&singleton, corpus::Side::Heading, cfg.model.head_vocab).map_err(runtime)?;
    let model = HistGen::init(cfg.model.clone(), doc_vocab.len(), head_vocab.len(), seed);
    let encoded = crate::model::encode_example(&doc, &doc_vocab, &head_vocab);
    let report = model
        .grad_check_example(&encoded, args.eps, args.tol)
        .map_err(runtime)?;
    let elapsed = started.elapsed().as_secs_f64();
    println!("{report}");
    println!(
        "parameters {}, entries {}, elapsed {elapsed:.2}s",
        model.store.num_values(),
        report.entries_checked
    );
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "gradient check failed: max rel err {:.3e} >= tol {:.1e}",
            report.max_rel_err, report.tol
        )))
    }
}
