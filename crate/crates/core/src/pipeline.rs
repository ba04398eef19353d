//! End-to-end evaluation: read ground truth and predictions from disk,
//! normalize both with one rule set, align, and assemble a report.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::alignment::{corpus_cer, pair_lines, CorpusCer, EvalError, Orphan};
use crate::corpus::{read_ground_truth, read_predictions, BookLines, CorpusError};
use crate::line::TranscriptionLine;
use crate::normalize::{NormalizeError, Normalizer, UnmappedPolicy};
use crate::report::{EvaluationReport, Provenance, ReportBuilder, ReportError, ReportOptions};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{} ground-truth line(s) could not be normalized; first: {}", .0.len(), .0[0])]
    Normalize(Vec<NormalizeError>),
    #[error("line-id parity violated: {}", fmt_parity(.0))]
    Parity(Vec<ParityViolation>),
    #[error("dataset {0} is listed but has no ground truth")]
    UnknownDataset(String),
    #[error("no engines given")]
    NoEngines,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Lines one engine is missing or has in excess, relative to ground truth.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ParityViolation {
    pub engine: String,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
}

fn fmt_parity(violations: &[ParityViolation]) -> String {
    violations
        .iter()
        .map(|v| {
            format!(
                "{}: missing [{}], extra [{}]",
                v.engine,
                v.missing.join(", "),
                v.extra.join(", ")
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub gt_root: PathBuf,
    /// Root of the prediction tree; may equal `gt_root`.
    pub pred_root: PathBuf,
    pub corpus_id: String,
    pub engines: Vec<String>,
    pub normalizer: Normalizer,
    /// Applied to ground truth characters no rule maps into the codec.
    pub policy: UnmappedPolicy,
    /// Rewrite predictions with the ground-truth rules before alignment.
    pub normalize_predictions: bool,
    /// Datasets (book ids) to report, in row order. `None` reports every
    /// book in the ground-truth tree, sorted by id.
    pub datasets: Option<Vec<String>>,
    pub options: ReportOptions,
}

impl EvalRequest {
    pub fn new(gt_root: impl Into<PathBuf>, engines: Vec<String>) -> Self {
        let gt_root = gt_root.into();
        EvalRequest {
            pred_root: gt_root.clone(),
            gt_root,
            corpus_id: "eval".to_string(),
            engines,
            normalizer: Normalizer::default_fraktur(),
            policy: UnmappedPolicy::Fail,
            normalize_predictions: true,
            datasets: None,
            options: ReportOptions::default(),
        }
    }
}

/// Normalized ground truth and the per-engine CER of every dataset.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub datasets: Vec<String>,
    pub results: Vec<(String, String, CorpusCer)>,
}

fn select_datasets(books: Vec<BookLines>, order: Option<&[String]>) -> Result<Vec<BookLines>, PipelineError> {
    let Some(order) = order else {
        return Ok(books);
    };
    let mut books = books;
    order
        .iter()
        .map(|id| {
            books
                .iter()
                .position(|b| &b.book_id == id)
                .map(|i| books.swap_remove(i))
                .ok_or_else(|| PipelineError::UnknownDataset(id.clone()))
        })
        .collect()
}

/// Runs normalization and alignment for every (dataset, engine).
pub fn evaluate(req: &EvalRequest) -> Result<Evaluation, PipelineError> {
    if req.engines.is_empty() {
        return Err(PipelineError::NoEngines);
    }
    let books = select_datasets(read_ground_truth(&req.gt_root, &req.corpus_id)?, req.datasets.as_deref())?;

    let mut normalize_failures = Vec::new();
    let mut gt_books: Vec<(String, Vec<TranscriptionLine>)> = Vec::new();
    for book in &books {
        let lines: Vec<_> = book
            .lines
            .par_iter()
            .map(|l| req.normalizer.normalize_with_policy(l, req.policy))
            .collect();
        let mut ok = Vec::with_capacity(lines.len());
        for line in lines {
            match line {
                Ok(l) => ok.push(l),
                Err(e) => normalize_failures.push(e),
            }
        }
        gt_books.push((book.book_id.clone(), ok));
    }
    if !normalize_failures.is_empty() {
        return Err(PipelineError::Normalize(normalize_failures));
    }

    let mut violations = Vec::new();
    let mut results = Vec::new();
    for engine in &req.engines {
        let preds = read_predictions(&req.pred_root, &req.corpus_id, engine)?;
        let mut missing = Vec::new();
        let mut extra = Vec::new();
        let mut engine_results = Vec::new();
        for (book_id, gt) in &gt_books {
            let pred: Vec<TranscriptionLine> = preds
                .iter()
                .find(|b| &b.book_id == book_id)
                .map(|b| {
                    b.lines
                        .iter()
                        .map(|l| {
                            if req.normalize_predictions {
                                l.with_text(&req.normalizer.rules().rewrite(l.text()))
                            } else {
                                l.clone()
                            }
                        })
                        .collect()
                })
                .unwrap_or_default();
            match pair_lines(gt, &pred) {
                Ok(pairs) => engine_results.push((book_id.clone(), corpus_cer(&pairs)?)),
                Err(EvalError::Orphans { orphans }) => {
                    for Orphan { key, side } in orphans {
                        if side == "ground_truth" {
                            missing.push(format!("{}/{}", key.book_id, key.line_id));
                        } else {
                            extra.push(format!("{}/{}", key.book_id, key.line_id));
                        }
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        // prediction books without any ground truth
        for b in &preds {
            if !gt_books.iter().any(|(id, _)| id == &b.book_id) && req.datasets.is_none() {
                extra.extend(b.lines.iter().map(|l| format!("{}/{}", b.book_id, l.key.line_id)));
            }
        }
        if missing.is_empty() && extra.is_empty() {
            results.extend(engine_results.into_iter().map(|(d, c)| (d, engine.clone(), c)));
        } else {
            violations.push(ParityViolation {
                engine: engine.clone(),
                missing,
                extra,
            });
        }
    }
    if !violations.is_empty() {
        return Err(PipelineError::Parity(violations));
    }

    Ok(Evaluation {
        datasets: gt_books.into_iter().map(|(id, _)| id).collect(),
        results,
    })
}

/// [`evaluate`] followed by report assembly. The report's provenance
/// records the codec and rule-set checksums actually used.
pub fn eval_pipeline(req: &EvalRequest) -> Result<EvaluationReport, PipelineError> {
    let evaluation = evaluate(req)?;
    let mut options = req.options.clone();
    options.provenance = Provenance {
        codec_name: req.normalizer.codec().name().to_string(),
        codec_checksum: req.normalizer.codec().checksum(),
        rules_checksum: req.normalizer.rules().checksum(),
        predictions_normalized: req.normalize_predictions,
        seed: options.provenance.seed,
    };
    let mut builder = ReportBuilder::new(options);
    for dataset in &evaluation.datasets {
        for engine in &req.engines {
            let (_, _, cer) = evaluation
                .results
                .iter()
                .find(|(d, e, _)| d == dataset && e == engine)
                .expect("every (dataset, engine) evaluated");
            builder.add(dataset, engine, cer.clone())?;
        }
    }
    Ok(builder.build()?)
}
