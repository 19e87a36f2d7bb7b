//! Subcommands: `run`, `train-embedder`, `train-classifier`, `eval` and
//! `dump-candidates`.
//!
//! Exit codes: 0 success, 1 pipeline runtime failure, 2 usage or parse error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use globalizer_core::classifier::{train_classifier, ClassifierTrainConfig, EntityClassifier};
use globalizer_core::embedding::{
    train_phrase_embedder, PhraseEmbedder, PhraseTrainConfig, TrainingLog,
};
use globalizer_core::pipeline::GlobalizerConfig;
use globalizer_core::SyntacticCategory;

use crate::config::PipelineConfig;
use crate::formats::{self, ClassifierCheckpoint, EmbedderCheckpoint, ExampleLine};
use crate::report::{self, BinJson, EvalJson};
use crate::runner::{self, RunError, RunReport};

#[derive(Debug, Parser)]
#[command(
    name = "emd-globalizer",
    version,
    about = "Stream-level entity mention detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline over a stream and write the detected mentions.
    Run(RunArgs),
    /// Train the phrase embedder on scored phrase pairs.
    TrainEmbedder(TrainEmbedderArgs),
    /// Train the entity classifier on labeled candidate embeddings.
    TrainClassifier(TrainClassifierArgs),
    /// Score a prediction file against a gold file.
    Eval(EvalArgs),
    /// Write the candidate trie (and optionally training examples) for a stream.
    DumpCandidates(DumpArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Stream JSONL.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// builtin-heuristic, external-bio or external-bio-embeddings.
    #[arg(long)]
    pub tagger: Option<String>,
    /// syntactic or phrase.
    #[arg(long)]
    pub embedding_mode: Option<String>,
    #[arg(long)]
    pub rescan_window: Option<usize>,
    /// Maximum candidate length in tokens.
    #[arg(long)]
    pub k: Option<usize>,
    /// Recorded in the run report; the pipeline stages draw no random numbers.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
    /// Phrase embedder checkpoint (phrase mode).
    #[arg(long)]
    pub embedder: Option<PathBuf>,
    /// Entity classifier checkpoint.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// Gold mentions JSONL.
    #[arg(long)]
    pub gold: Option<PathBuf>,
}

impl PipelineArgs {
    pub fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(c.batch_size, self.batch_size);
        set!(c.tagger, self.tagger);
        set!(c.embedding_mode, self.embedding_mode);
        set!(c.scan.rescan_window, self.rescan_window);
        set!(c.scan.k, self.k);
        set!(c.seed, self.seed);
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if self.stoplist.is_some() {
            c.stoplist = self.stoplist.clone();
        }
        if self.embedder.is_some() {
            c.embedder_checkpoint = self.embedder.clone();
        }
        if self.classifier.is_some() {
            c.classifier.checkpoint = self.classifier.clone();
        }
        if self.gold.is_some() {
            c.gold = self.gold.clone();
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output mentions JSONL (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the local tagger's spans to this JSONL file.
    #[arg(long)]
    pub emit_local: Option<PathBuf>,
    /// Write the run report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write frequency-binned recall as CSV (needs gold).
    #[arg(long)]
    pub binned_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainEmbedderArgs {
    /// Tab-separated `score<TAB>phrase_a<TAB>phrase_b`, scores in [0, 5].
    #[arg(long)]
    pub pairs: PathBuf,
    /// Validation pairs; a seeded 80/20 split of --pairs otherwise.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub d_out: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 25)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct TrainClassifierArgs {
    /// Training examples JSONL.
    #[arg(long)]
    pub examples: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "64,32")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.0015)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalModeArg {
    Surface,
    Span,
    Both,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalModeArg::Both)]
    pub mode: EvalModeArg,
    /// Fold case before deduplicating surface forms.
    #[arg(long)]
    pub case_insensitive: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Sorted candidate keys, one per line (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write classifier training examples labeled against --gold.
    #[arg(long)]
    pub examples: Option<PathBuf>,
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: 2,
        error: error.into(),
    }
}

fn runtime(error: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: 1,
        error: error.into(),
    }
}

fn run_error(e: RunError) -> CliError {
    match e {
        RunError::Startup(_) => usage(e),
        RunError::Batch { .. } => runtime(e),
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::TrainEmbedder(a) => cmd_train_embedder(a),
        Command::TrainClassifier(a) => cmd_train_classifier(a),
        Command::Eval(a) => cmd_eval(a),
        Command::DumpCandidates(a) => cmd_dump(a),
    }
}

struct Prepared {
    config: PipelineConfig,
    core: GlobalizerConfig,
    records: Vec<globalizer_core::SentenceRecord>,
    embedder: Option<PhraseEmbedder>,
}

fn prepare(args: &PipelineArgs) -> Result<Prepared, CliError> {
    let config = args.resolve().map_err(usage)?;
    let core = config.to_core().map_err(usage)?;
    let input = config
        .input
        .clone()
        .ok_or_else(|| usage(anyhow!("no input stream given (--input)")))?;
    let records = formats::parse_stream_jsonl(formats::open(&input).map_err(usage)?)
        .with_context(|| format!("reading {}", input.display()))
        .map_err(usage)?;
    let embedder = match &config.embedder_checkpoint {
        Some(p) => Some(
            formats::load_embedder(p)
                .with_context(|| format!("loading {}", p.display()))
                .map_err(usage)?,
        ),
        None => None,
    };
    Ok(Prepared {
        config,
        core,
        records,
        embedder,
    })
}

fn candidate_dim(core: &GlobalizerConfig, embedder: &Option<PhraseEmbedder>) -> usize {
    match embedder {
        Some(e) => e.d_out(),
        None if core.embedding_mode == globalizer_core::EmbeddingMode::Syntactic => {
            SyntacticCategory::COUNT
        }
        None => 0,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(runtime)
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let p = prepare(&a.pipeline)?;
    let ckpt = p
        .config
        .classifier
        .checkpoint
        .clone()
        .ok_or_else(|| usage(anyhow!("no classifier checkpoint given (--classifier)")))?;
    let classifier: EntityClassifier = formats::load_classifier(&ckpt)
        .with_context(|| format!("loading {}", ckpt.display()))
        .map_err(usage)?;
    let expected = candidate_dim(&p.core, &p.embedder) + 1;
    if classifier.input_dim() != expected {
        return Err(usage(anyhow!(
            "classifier expects {} features, candidate embeddings give {expected}",
            classifier.input_dim()
        )));
    }
    let gold = match &p.config.gold {
        Some(g) => Some(
            runner::read_gold(g)
                .with_context(|| format!("reading {}", g.display()))
                .map_err(usage)?,
        ),
        None => None,
    };
    let case_sensitive = p.config.surface_case_sensitive;
    let result =
        runner::run_stream(p.core, p.records, p.embedder, &classifier).map_err(run_error)?;

    let output_path = a.output.or(p.config.output.clone());
    match &output_path {
        Some(path) => {
            let mut w = create(path)?;
            formats::write_mentions_jsonl(&mut w, &result.output)
                .and_then(|_| w.flush())
                .map_err(runtime)?;
        }
        None => {
            let stdout = io::stdout();
            formats::write_mentions_jsonl(stdout.lock(), &result.output).map_err(runtime)?;
        }
    }
    if let Some(path) = a.emit_local.or(p.config.emit_local.clone()) {
        let mut w = create(&path)?;
        formats::write_mentions_jsonl(&mut w, &result.local_output)
            .and_then(|_| w.flush())
            .map_err(runtime)?;
    }

    let mut rep = RunReport::new(&result);
    rep.seed = p.config.seed;
    let mut text = String::new();
    if let Some(gold) = &gold {
        let (s, sp) = runner::evaluate(&result.output, gold, case_sensitive);
        let (ls, lsp) = runner::evaluate(&result.local_output, gold, case_sensitive);
        text.push_str(&report::eval_table([
            ("global", &s),
            ("global", &sp),
            ("local-only", &ls),
            ("local-only", &lsp),
        ]));
        rep.eval = Some(vec![EvalJson::from(&s), EvalJson::from(&sp)]);
        rep.local_eval = Some(vec![EvalJson::from(&ls), EvalJson::from(&lsp)]);
        let bins = runner::frequency_bins(&result.globalizer, gold);
        if let Some(path) = a.binned_csv.or(p.config.binned_csv.clone()) {
            formats::write_file(&path, report::bins_csv(&bins).as_bytes()).map_err(runtime)?;
        }
        rep.binned_recall = Some(bins.iter().map(BinJson::from).collect());
    }
    text.push_str(&report::timing_text(&result.timings.report()));
    eprintln!(
        "{} sentences, {} batches, {} candidates, {} entities, {} mentions emitted",
        rep.sentences, rep.batches, rep.candidates, rep.entities, rep.emitted_mentions
    );
    eprintln!("{text}");
    if let Some(path) = a.report.or(p.config.report.clone()) {
        formats::save_json(&path, &rep).map_err(runtime)?;
    }
    Ok(())
}

fn write_log(path: &Path, log: &TrainingLog) -> Result<(), CliError> {
    let mut w = create(path)?;
    for e in &log.epochs {
        writeln!(
            w,
            "epoch={} train_loss={} validation_loss={}",
            e.epoch, e.train_loss, e.validation_loss
        )
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

fn cmd_train_embedder(a: TrainEmbedderArgs) -> Result<(), CliError> {
    let train = formats::read_phrase_pairs(&a.pairs).map_err(usage)?;
    let valid = match &a.valid {
        Some(p) => Some(formats::read_phrase_pairs(p).map_err(usage)?),
        None => None,
    };
    let cfg = PhraseTrainConfig {
        d_out: a.d_out,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        max_epochs: a.max_epochs,
        patience: a.patience,
        seed: a.seed,
        ..PhraseTrainConfig::default()
    };
    let (model, log) =
        train_phrase_embedder(&train, valid.as_deref(), &cfg, None).map_err(runtime)?;
    formats::save_json(&a.out, &EmbedderCheckpoint::from_model(&model)).map_err(runtime)?;
    if let Some(p) = &a.log {
        write_log(p, &log)?;
    }
    eprintln!(
        "{} epochs, best validation loss {:.6} at epoch {}{}",
        log.epochs.len(),
        log.best_validation_loss,
        log.best_epoch,
        if log.stopped_early {
            " (early stop)"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_train_classifier(a: TrainClassifierArgs) -> Result<(), CliError> {
    let lines = formats::parse_examples_jsonl(formats::open(&a.examples).map_err(usage)?)
        .with_context(|| format!("reading {}", a.examples.display()))
        .map_err(usage)?;
    let examples: Vec<_> = lines.iter().map(ExampleLine::to_example).collect();
    let cfg = ClassifierTrainConfig {
        hidden_sizes: a.hidden,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        max_epochs: a.max_epochs,
        patience: a.patience,
        seed: a.seed,
        ..ClassifierTrainConfig::default()
    };
    let (model, rep) = train_classifier(&examples, &cfg).map_err(runtime)?;
    formats::save_json(&a.out, &ClassifierCheckpoint::from_model(&model)).map_err(runtime)?;
    if let Some(p) = &a.log {
        write_log(p, &rep.log)?;
    }
    eprintln!(
        "{} epochs, best validation loss {:.6} at epoch {}, validation F1 {:.4}{}",
        rep.log.epochs.len(),
        rep.log.best_validation_loss,
        rep.log.best_epoch,
        rep.best_validation_f1,
        if rep.log.stopped_early {
            " (early stop)"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let read = |p: &Path| {
        runner::read_gold(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(usage)
    };
    let pred = read(&a.pred)?;
    let gold = read(&a.gold)?;
    let (surface, span) = runner::evaluate_files(&pred, &gold, !a.case_insensitive);
    let rows: Vec<(&str, &globalizer_core::EvalReport)> = match a.mode {
        EvalModeArg::Surface => vec![("pred", &surface)],
        EvalModeArg::Span => vec![("pred", &span)],
        EvalModeArg::Both => vec![("pred", &surface), ("pred", &span)],
    };
    print!("{}", report::eval_table(rows.iter().copied()));
    if let Some(out) = &a.out {
        let json: Vec<EvalJson> = rows.iter().map(|(_, r)| EvalJson::from(*r)).collect();
        formats::save_json(out, &json).map_err(runtime)?;
    }
    Ok(())
}

fn cmd_dump(a: DumpArgs) -> Result<(), CliError> {
    let p = prepare(&a.pipeline)?;
    if a.examples.is_some() && p.config.gold.is_none() {
        return Err(usage(anyhow!(
            "--examples needs --gold to label candidates"
        )));
    }
    let gold = match &p.config.gold {
        Some(g) => Some(
            runner::read_gold(g)
                .with_context(|| format!("reading {}", g.display()))
                .map_err(usage)?,
        ),
        None => None,
    };
    let g = runner::collect_candidates(p.core, p.records, p.embedder).map_err(run_error)?;
    let dump = g.trie().dump();
    match &a.out {
        Some(path) => formats::write_file(path, dump.as_bytes()).map_err(runtime)?,
        None => print!("{dump}"),
    }
    if let (Some(path), Some(gold)) = (&a.examples, &gold) {
        let gold_keys: std::collections::BTreeSet<String> = gold
            .iter()
            .flat_map(|l| l.mentions.iter().map(|m| runner::fold_surface(&m.surface)))
            .collect();
        let examples: Vec<ExampleLine> = g
            .candidates()
            .iter()
            .filter_map(|c| {
                c.global_embedding().map(|embedding| ExampleLine {
                    key: c.key.clone(),
                    embedding,
                    length: c.key.chars().count(),
                    label: u8::from(gold_keys.contains(&c.key)),
                })
            })
            .collect();
        let mut w = create(path)?;
        formats::write_examples_jsonl(&mut w, &examples)
            .and_then(|_| w.flush())
            .map_err(runtime)?;
    }
    Ok(())
}
