//! Command-line front end. [`run`] parses arguments, executes one command
//! and returns the process exit status: 0 on success, 1 on data errors,
//! 2 on usage errors.
//!
//! Every output file is written atomically (temporary file and rename).
//! `FRAKTUR_BENCH_THREADS` caps the worker threads; results do not depend
//! on it.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::codec::{load_codec, Codec, CodecError};
use crate::corpus::{read_confidences, read_ground_truth, read_predictions, read_text, CorpusError};
use crate::line::{LineKey, TranscriptionLine};
use crate::manifest::{
    build_schedule, parse_expectations, refine_books, scan_corpus, verify_counts, BookEntry,
    CorpusManifest, ManifestError, TrainingSchedule,
};
use crate::normalize::{
    codec_coverage_report, load_rules, NormalizationRuleSet, NormalizeError, Normalizer, RuleError,
    UnmappedPolicy,
};
use crate::pipeline::{eval_pipeline, EvalRequest, PipelineError};
use crate::report::{emit_errors, emit_report, EvaluationReport, Format, ReportError, ReportOptions};
use crate::voting::{parse_confidences, vote_corpus, Pivot, TieBreak, VoteError, VoterOutput, VotingConfig};
use crate::analytics::ConfusionMode;

pub const THREADS_ENV: &str = "FRAKTUR_BENCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fraktur-bench", version, about = "Ground-truth normalization, CER evaluation and corpus tooling for historical OCR")]
pub struct Cli {
    /// Print data errors to stderr as a JSON document.
    #[arg(long, global = true)]
    pub error_json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a text file (one transcription per line) or a line-pair tree.
    Normalize(NormalizeArgs),
    /// Evaluate engines against ground truth and write a CER report.
    Eval(EvalArgs),
    /// Evaluate engines and write only the error statistics.
    Errors(EvalArgs),
    /// Combine several engines' predictions by majority voting.
    Vote(VoteArgs),
    /// Build manifests, refinement samples and training schedules.
    #[command(subcommand)]
    Prepare(PrepareCommand),
    /// Re-emit a JSON evaluation report in another format.
    Report(ReportArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CodecArgs {
    /// Codec file, or `default` for the shipped codec.
    #[arg(long, default_value = "default")]
    pub codec: String,
    /// Rules file, or `default` for the shipped rules.
    #[arg(long, default_value = "default")]
    pub rules: String,
    /// fail | drop | replace=<char>
    #[arg(long, default_value = "fail", value_parser = parse_policy)]
    pub on_unmapped: UnmappedPolicy,
}

fn parse_policy(s: &str) -> Result<UnmappedPolicy, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub codec: CodecArgs,
    /// Also write a JSON character coverage report of the rewritten text.
    #[arg(long)]
    pub coverage: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth tree: <gt>/<dataset>/<line>.gt.txt
    #[arg(long)]
    pub gt: PathBuf,
    /// Prediction tree with <line>.pred.<engine>.txt files (default: --gt).
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Engine id; repeat for several engines.
    #[arg(long = "engine", required = true)]
    pub engines: Vec<String>,
    #[arg(long, default_value = "eval")]
    pub corpus: String,
    /// Manifest whose book order (and selection) defines the dataset rows.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub codec: CodecArgs,
    /// Align predictions without rewriting them.
    #[arg(long)]
    pub raw_pred: bool,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = NonZeroUsize::new(3).unwrap())]
    pub k: NonZeroUsize,
    /// Merge adjacent insertions / deletions into one confusion entry.
    #[arg(long)]
    pub merge_runs: bool,
    /// Corpus group excluded from the NOD row; repeatable.
    #[arg(long = "nod-exclude", default_value = "S")]
    pub nod_exclude: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: ReportError| e.to_string())
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    /// Prediction tree with <line>.pred.<engine>.txt files.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "engine", required = true)]
    pub engines: Vec<String>,
    #[arg(long, default_value = "eval")]
    pub corpus: String,
    #[arg(long, default_value_t = 2)]
    pub min_voters: usize,
    /// confidence | first_voter | abstain_to_pivot
    #[arg(long, default_value = "first_voter")]
    pub tie_break: TieBreak,
    /// longest | first | engine=<id>
    #[arg(long, default_value = "longest")]
    pub pivot: Pivot,
    /// Output tree; voted lines are written as <line>.pred.voted.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PrepareCommand {
    /// Scan a line-pair tree into a manifest.
    Scan {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce every book to a seeded sample of at most --cap lines.
    Refine {
        #[command(flatten)]
        source: ManifestSource,
        #[arg(long, default_value_t = NonZeroUsize::new(50).unwrap())]
        cap: NonZeroUsize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select the lines of every training stage.
    Schedule {
        /// JSON training schedule (stages and seed).
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        /// Overrides the schedule's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare book and line counts with an expectation table.
    Verify {
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        /// TSV rows: corpus_id, books, lines.
        #[arg(long)]
        expected: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ManifestSource {
    #[arg(long, conflicts_with = "manifest", requires = "corpus")]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<String>,
    #[arg(long, required_unless_present = "root")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "markdown", value_parser = parse_format)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

/// Errors surfaced by commands. Usage errors exit with 2, the rest with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Vote(#[from] VoteError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{} line(s) could not be normalized; first: {}", .0.len(), .0[0])]
    Normalize(Vec<NormalizeError>),
    #[error("{0} count discrepancies")]
    Discrepancies(usize),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid report JSON: {0}")]
    ReportJson(serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Codec(_) => "codec",
            CliError::Rules(_) => "rules",
            CliError::Corpus(_) => "corpus",
            CliError::Pipeline(PipelineError::Parity(_)) => "parity",
            CliError::Pipeline(_) => "evaluation",
            CliError::Vote(_) => "vote",
            CliError::Manifest(_) => "manifest",
            CliError::Report(_) | CliError::ReportJson(_) => "report",
            CliError::Normalize(_) => "unmapped",
            CliError::Discrepancies(_) => "discrepancies",
            CliError::Write { .. } => "io",
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut error = serde_json::json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Pipeline(PipelineError::Parity(v)) = self {
            error["parity"] = serde_json::to_value(v).unwrap_or_default();
        }
        serde_json::json!({ "error": error })
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let err = |source| CliError::Write {
        path: path.display().to_string(),
        source,
    };
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

fn load_normalizer(args: &CodecArgs) -> Result<Normalizer, CliError> {
    let codec = match args.codec.as_str() {
        "default" => Codec::default_fraktur(),
        path => load_codec(path)?,
    };
    let rules = match args.rules.as_str() {
        "default" => NormalizationRuleSet::default_fraktur(),
        path => load_rules(path)?,
    };
    let normalizer = Normalizer::new(rules, codec)?;
    normalizer
        .check_policy(args.on_unmapped)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(normalizer)
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(value) = std::env::var_os(THREADS_ENV) {
        let n = value
            .to_str()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|n| *n > 0)
            .ok_or_else(|| {
                CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}"))
            })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let error_json = cli.error_json;
    let result = thread_pool().and_then(|pool| pool.install(|| execute(cli.command)));
    match result {
        Ok(()) => 0,
        Err(e) => {
            if error_json {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Normalize(args) => normalize(args),
        Command::Eval(args) => {
            let report = evaluate(&args)?;
            write_atomic(&args.out, &emit_report(&report, args.format)?)
        }
        Command::Errors(args) => {
            let report = evaluate(&args)?;
            write_atomic(&args.out, &emit_errors(&report, args.format)?)
        }
        Command::Vote(args) => vote(args),
        Command::Prepare(cmd) => prepare(cmd),
        Command::Report(args) => {
            let bytes = std::fs::read(&args.input).map_err(|source| CliError::Write {
                path: args.input.display().to_string(),
                source,
            })?;
            let report: EvaluationReport =
                serde_json::from_slice(&bytes).map_err(CliError::ReportJson)?;
            write_atomic(&args.out, &emit_report(&report, args.format)?)
        }
    }
}

fn evaluate(args: &EvalArgs) -> Result<EvaluationReport, CliError> {
    let normalizer = load_normalizer(&args.codec)?;
    let datasets = match &args.manifest {
        Some(path) => Some(
            CorpusManifest::load(path)?
                .books
                .into_iter()
                .map(|b| b.book_id)
                .collect(),
        ),
        None => None,
    };
    let mut options = ReportOptions {
        top_k: args.k,
        confusion_mode: if args.merge_runs {
            ConfusionMode::MergeRuns
        } else {
            ConfusionMode::SingleOp
        },
        nod_excluded: args.nod_exclude.clone(),
        ..ReportOptions::default()
    };
    options.provenance.seed = args.seed;
    let req = EvalRequest {
        gt_root: args.gt.clone(),
        pred_root: args.pred.clone().unwrap_or_else(|| args.gt.clone()),
        corpus_id: args.corpus.clone(),
        engines: args.engines.clone(),
        normalizer,
        policy: args.codec.on_unmapped,
        normalize_predictions: !args.raw_pred,
        datasets,
        options,
    };
    Ok(eval_pipeline(&req)?)
}

fn normalize(args: NormalizeArgs) -> Result<(), CliError> {
    let normalizer = load_normalizer(&args.codec)?;
    let policy = args.codec.on_unmapped;
    let mut failures = Vec::new();
    let mut rewritten = Vec::new();

    if args.input.is_dir() {
        let books = read_ground_truth(&args.input, "input")?;
        let mut outputs = Vec::new();
        for book in &books {
            for line in &book.lines {
                rewritten.push(line.with_text(&normalizer.rules().rewrite(line.text())));
                match normalizer.normalize_with_policy(line, policy) {
                    Ok(out) => outputs.push(out),
                    Err(e) => failures.push(e),
                }
            }
        }
        if !failures.is_empty() {
            return Err(CliError::Normalize(failures));
        }
        for line in &outputs {
            let path = args
                .out
                .join(&line.key.book_id)
                .join(format!("{}.gt.txt", line.key.line_id));
            write_atomic(&path, format!("{}\n", line.text()).as_bytes())?;
        }
    } else {
        let text = read_text(&args.input)?;
        let mut out = String::new();
        for (idx, raw) in text.split('\n').enumerate() {
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            let key = LineKey::new("input", "", (idx + 1).to_string());
            let line = TranscriptionLine::ground_truth(key, raw);
            rewritten.push(line.with_text(&normalizer.rules().rewrite(line.text())));
            match normalizer.normalize_with_policy(&line, policy) {
                Ok(l) => {
                    out.push_str(l.text());
                    out.push('\n');
                }
                Err(e) => failures.push(e),
            }
        }
        if !failures.is_empty() {
            return Err(CliError::Normalize(failures));
        }
        write_atomic(&args.out, out.as_bytes())?;
    }

    if let Some(path) = &args.coverage {
        let report = codec_coverage_report(&rewritten, normalizer.codec());
        let mut bytes = serde_json::to_vec_pretty(&report).expect("coverage serializes");
        bytes.push(b'\n');
        write_atomic(path, &bytes)?;
    }
    Ok(())
}

fn vote(args: VoteArgs) -> Result<(), CliError> {
    let config = VotingConfig::new(args.min_voters, args.tie_break, args.pivot.clone())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut per_line: BTreeMap<LineKey, Vec<VoterOutput>> = BTreeMap::new();
    for engine in &args.engines {
        let confidences = read_confidences(&args.pred, &args.corpus, engine)?;
        for book in read_predictions(&args.pred, &args.corpus, engine)? {
            for line in book.lines {
                let output = match confidences.get(&line.key) {
                    Some(conf) => {
                        VoterOutput::with_confidences(engine.as_str(), line.text(), parse_confidences(conf)?)?
                    }
                    None => VoterOutput::new(engine.as_str(), line.text()),
                };
                per_line.entry(line.key).or_default().push(output);
            }
        }
    }
    if per_line.is_empty() {
        return Err(CliError::Vote(VoteError::InsufficientVoters {
            got: 0,
            required: config.min_voters(),
        }));
    }
    for line in vote_corpus(&per_line, &config)? {
        let path = args
            .out
            .join(&line.key.book_id)
            .join(format!("{}.pred.voted.txt", line.key.line_id));
        write_atomic(&path, format!("{}\n", line.text()).as_bytes())?;
    }
    Ok(())
}

fn load_books(paths: &[PathBuf]) -> Result<Vec<BookEntry>, CliError> {
    let mut books = Vec::new();
    for path in paths {
        books.extend(CorpusManifest::load(path)?.books);
    }
    Ok(books)
}

fn prepare(cmd: PrepareCommand) -> Result<(), CliError> {
    match cmd {
        PrepareCommand::Scan { root, corpus, out } => {
            let outcome = scan_corpus(&root, &corpus)?;
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            let manifest = CorpusManifest::new(outcome.books);
            write_atomic(&out, &manifest.to_json())
        }
        PrepareCommand::Refine {
            source,
            cap,
            seed,
            out,
        } => {
            let books = match (source.root, source.corpus, source.manifest) {
                (Some(root), Some(corpus), _) => {
                    let outcome = scan_corpus(&root, &corpus)?;
                    for warning in &outcome.warnings {
                        eprintln!("warning: {warning}");
                    }
                    outcome.books
                }
                (_, _, Some(path)) => CorpusManifest::load(path)?.books,
                _ => return Err(CliError::Usage("give --manifest or --root with --corpus".into())),
            };
            let mut manifest = CorpusManifest::new(refine_books(&books, cap, seed));
            manifest.seed = Some(seed);
            manifest.cap_per_book = Some(cap.get());
            eprintln!(
                "refined {} books to {} lines (cap {cap}, seed {seed})",
                manifest.books.len(),
                manifest.total_lines()
            );
            write_atomic(&out, &manifest.to_json())
        }
        PrepareCommand::Schedule {
            schedule,
            manifests,
            seed,
            out,
        } => {
            let bytes = std::fs::read(&schedule).map_err(|source| ManifestError::Io {
                path: schedule.display().to_string(),
                source,
            })?;
            let mut plan: TrainingSchedule =
                serde_json::from_slice(&bytes).map_err(ManifestError::Json)?;
            if let Some(seed) = seed {
                plan.seed = seed;
            }
            let output = build_schedule(&load_books(&manifests)?, &plan)?;
            for stage in &output.stages {
                eprintln!("{}: {} lines", stage.name, stage.total_lines());
            }
            let mut bytes = serde_json::to_vec_pretty(&output).expect("schedule serializes");
            bytes.push(b'\n');
            write_atomic(&out, &bytes)
        }
        PrepareCommand::Verify {
            manifests,
            expected,
            out,
        } => {
            let text = read_text(&expected)?;
            let discrepancies = verify_counts(&load_books(&manifests)?, &parse_expectations(&text)?);
            if let Some(out) = out {
                let mut bytes = serde_json::to_vec_pretty(&discrepancies).expect("serializes");
                bytes.push(b'\n');
                write_atomic(&out, &bytes)?;
            }
            for d in &discrepancies {
                eprintln!("{d}");
            }
            if discrepancies.is_empty() {
                Ok(())
            } else {
                Err(CliError::Discrepancies(discrepancies.len()))
            }
        }
    }
}
