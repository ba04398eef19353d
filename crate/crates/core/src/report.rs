//! Evaluation reports: a CER matrix of datasets × engines with aggregate
//! rows, per-engine error statistics, and CSV / Markdown / JSON emitters.
//!
//! Dataset ids are expected to look like `N-1781`: the part before the first
//! `-` names the corpus group. Aggregate rows are appended after the dataset
//! rows in this order:
//!
//! * `<group>-all` for every group with at least two datasets, in order of
//!   first appearance;
//! * `NOD`, all datasets outside the excluded groups (by default `S`, the
//!   dictionary), when both excluded and non-excluded datasets are present;
//! * `All`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::num::NonZeroUsize;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alignment::CorpusCer;
use crate::analytics::{
    classify_whitespace_errors, confusion_stats, top_k_error_mass, ConfusionEntry, ConfusionMode,
    ErrorShare, WhitespaceSummary,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("nothing to emit")]
    NothingToEmit,
    #[error("unknown report format {0:?} (expected csv, markdown or json)")]
    UnknownFormat(String),
    #[error("dataset {dataset} has no result for engine {engine}")]
    MissingCell { dataset: String, engine: String },
    #[error("dataset {dataset} was added twice for engine {engine}")]
    DuplicateCell { dataset: String, engine: String },
    #[error("failed to serialize report: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Markdown,
    Json,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

/// Sums over the lines behind one CER value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CerTotals {
    pub lines: u64,
    pub gt_chars: u64,
    pub distance: u64,
    pub macro_lines: u64,
    pub macro_sum: f64,
}

impl CerTotals {
    pub fn from_corpus(cer: &CorpusCer) -> Self {
        CerTotals {
            lines: cer.lines() as u64,
            gt_chars: cer.total_gt_chars,
            distance: cer.total_distance,
            macro_lines: cer.macro_lines,
            macro_sum: cer.alignments().filter(|a| a.gt_len > 0).map(|a| a.cer()).sum(),
        }
    }

    fn absorb(&mut self, other: &CerTotals) {
        self.lines += other.lines;
        self.gt_chars += other.gt_chars;
        self.distance += other.distance;
        self.macro_lines += other.macro_lines;
        self.macro_sum += other.macro_sum;
    }

    pub fn micro_cer(&self) -> f64 {
        self.distance as f64 / self.gt_chars.max(1) as f64
    }

    pub fn macro_cer(&self) -> f64 {
        if self.macro_lines == 0 {
            self.micro_cer()
        } else {
            self.macro_sum / self.macro_lines as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CerCell {
    pub engine: String,
    pub micro_cer: f64,
    pub macro_cer: f64,
    pub micro_percent: String,
    pub macro_percent: String,
    #[serde(flatten)]
    pub totals: CerTotals,
}

impl CerCell {
    fn new(engine: &str, totals: CerTotals) -> Self {
        CerCell {
            engine: engine.to_string(),
            micro_cer: totals.micro_cer(),
            macro_cer: totals.macro_cer(),
            micro_percent: percent(totals.micro_cer()),
            macro_percent: percent(totals.macro_cer()),
            totals,
        }
    }
}

/// A CER fraction as percent with two decimals, e.g. `0.004721` → `"0.47"`.
pub fn percent(cer: f64) -> String {
    format!("{:.2}", cer * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Dataset,
    CorpusAll,
    Nod,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub kind: RowKind,
    /// Datasets contributing to this row.
    pub members: Vec<String>,
    pub cells: Vec<CerCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineErrors {
    pub engine: String,
    pub top_k: usize,
    pub top_share: f64,
    pub top_mass: ErrorShare,
    pub whitespace: WhitespaceSummary,
    pub confusion: Vec<ConfusionEntry>,
}

/// Where the numbers came from; lets readers check that all cells share
/// one normalization.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub codec_name: String,
    pub codec_checksum: String,
    pub rules_checksum: String,
    pub predictions_normalized: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub engines: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<ReportRow>,
    pub confusion_mode: ConfusionMode,
    pub errors: Vec<EngineErrors>,
    pub provenance: Provenance,
    pub notes: Vec<String>,
}

impl EvaluationReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() || self.engines.is_empty()
    }

    /// Dataset rows followed by aggregate rows.
    pub fn all_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().chain(&self.aggregates)
    }

    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.all_rows().find(|r| r.label == label)
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub top_k: NonZeroUsize,
    pub confusion_mode: ConfusionMode,
    /// Corpus groups left out of the NOD row.
    pub nod_excluded: Vec<String>,
    pub provenance: Provenance,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            top_k: NonZeroUsize::new(3).unwrap(),
            confusion_mode: ConfusionMode::SingleOp,
            nod_excluded: vec!["S".to_string()],
            provenance: Provenance::default(),
        }
    }
}

/// The corpus group of a dataset id: everything before the first `-`.
pub fn corpus_group(dataset: &str) -> &str {
    dataset.split_once('-').map_or(dataset, |(group, _)| group)
}

/// Collects per-(dataset, engine) results; datasets and engines keep the
/// order in which they are first added.
#[derive(Debug, Default)]
pub struct ReportBuilder {
    options: ReportOptions,
    datasets: Vec<String>,
    engines: Vec<String>,
    results: BTreeMap<(String, String), CorpusCer>,
}

impl ReportBuilder {
    pub fn new(options: ReportOptions) -> Self {
        ReportBuilder {
            options,
            ..Default::default()
        }
    }

    pub fn add(
        &mut self,
        dataset: &str,
        engine: &str,
        cer: CorpusCer,
    ) -> Result<&mut Self, ReportError> {
        if !self.datasets.iter().any(|d| d == dataset) {
            self.datasets.push(dataset.to_string());
        }
        if !self.engines.iter().any(|e| e == engine) {
            self.engines.push(engine.to_string());
        }
        let key = (dataset.to_string(), engine.to_string());
        if self.results.contains_key(&key) {
            return Err(ReportError::DuplicateCell {
                dataset: key.0,
                engine: key.1,
            });
        }
        self.results.insert(key, cer);
        Ok(self)
    }

    pub fn build(self) -> Result<EvaluationReport, ReportError> {
        if self.datasets.is_empty() {
            return Err(ReportError::NothingToEmit);
        }
        let mut totals: BTreeMap<(&str, &str), CerTotals> = BTreeMap::new();
        for dataset in &self.datasets {
            for engine in &self.engines {
                let cer = self
                    .results
                    .get(&(dataset.clone(), engine.clone()))
                    .ok_or_else(|| ReportError::MissingCell {
                        dataset: dataset.clone(),
                        engine: engine.clone(),
                    })?;
                totals.insert((dataset, engine), CerTotals::from_corpus(cer));
            }
        }

        let row = |label: String, kind: RowKind, members: Vec<&String>| {
            let cells = self
                .engines
                .iter()
                .map(|engine| {
                    let mut sum = CerTotals::default();
                    for dataset in &members {
                        sum.absorb(&totals[&(dataset.as_str(), engine.as_str())]);
                    }
                    CerCell::new(engine, sum)
                })
                .collect();
            ReportRow {
                label,
                kind,
                members: members.into_iter().cloned().collect(),
                cells,
            }
        };

        let rows = self
            .datasets
            .iter()
            .map(|d| row(d.clone(), RowKind::Dataset, vec![d]))
            .collect();

        let mut groups: Vec<(&str, Vec<&String>)> = Vec::new();
        for dataset in &self.datasets {
            let group = corpus_group(dataset);
            match groups.iter_mut().find(|(g, _)| *g == group) {
                Some((_, members)) => members.push(dataset),
                None => groups.push((group, vec![dataset])),
            }
        }
        let mut aggregates = Vec::new();
        for (group, members) in &groups {
            if members.len() >= 2 {
                aggregates.push(row(format!("{group}-all"), RowKind::CorpusAll, members.clone()));
            }
        }
        let excluded = |d: &&String| {
            self.options
                .nod_excluded
                .iter()
                .any(|g| g == corpus_group(d))
        };
        let nod: Vec<&String> = self.datasets.iter().filter(|d| !excluded(d)).collect();
        let mut notes = vec![
            "CER in percent of ground-truth characters; micro = summed distance / summed \
             ground-truth characters, macro = mean of per-line CER over lines with ground truth."
                .to_string(),
        ];
        if !nod.is_empty() && nod.len() < self.datasets.len() {
            notes.push(format!(
                "NOD = all datasets except corpus group(s) {}.",
                self.options.nod_excluded.join(", ")
            ));
            aggregates.push(row("NOD".into(), RowKind::Nod, nod));
        }
        aggregates.push(row("All".into(), RowKind::All, self.datasets.iter().collect()));

        let errors = self
            .engines
            .iter()
            .map(|engine| {
                let alignments = self
                    .datasets
                    .iter()
                    .flat_map(|d| self.results[&(d.clone(), engine.clone())].alignments());
                let confusion = confusion_stats(alignments, self.options.confusion_mode);
                let top_mass = top_k_error_mass(&confusion, self.options.top_k);
                EngineErrors {
                    engine: engine.clone(),
                    top_k: self.options.top_k.get(),
                    top_share: top_mass.fraction(),
                    top_mass,
                    whitespace: classify_whitespace_errors(&confusion),
                    confusion,
                }
            })
            .collect();

        Ok(EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            engines: self.engines.clone(),
            rows,
            aggregates,
            confusion_mode: self.options.confusion_mode,
            errors,
            provenance: self.options.provenance.clone(),
            notes,
        })
    }
}

/// Number of confusion entries per engine printed in Markdown reports.
const MARKDOWN_CONFUSION_ROWS: usize = 10;

pub fn emit_report(report: &EvaluationReport, format: Format) -> Result<Vec<u8>, ReportError> {
    if report.is_empty() {
        return Err(ReportError::NothingToEmit);
    }
    match format {
        Format::Csv => Ok(emit_csv(report).into_bytes()),
        Format::Markdown => Ok(emit_markdown(report).into_bytes()),
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report)
                .map_err(|e| ReportError::Json(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

/// Per-engine error statistics only: ranked confusion entries with the
/// top-k share and whitespace buckets.
pub fn emit_errors(report: &EvaluationReport, format: Format) -> Result<Vec<u8>, ReportError> {
    if report.errors.is_empty() {
        return Err(ReportError::NothingToEmit);
    }
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct ErrorsDoc<'a> {
                schema_version: u32,
                confusion_mode: ConfusionMode,
                provenance: &'a Provenance,
                engines: &'a [EngineErrors],
            }
            let doc = ErrorsDoc {
                schema_version: REPORT_SCHEMA_VERSION,
                confusion_mode: report.confusion_mode,
                provenance: &report.provenance,
                engines: &report.errors,
            };
            let mut out =
                serde_json::to_vec_pretty(&doc).map_err(|e| ReportError::Json(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = String::from("engine,gt_seq,pred_seq,count\n");
            for errors in &report.errors {
                for entry in &errors.confusion {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        csv_field(&errors.engine),
                        csv_field(&entry.gt_seq),
                        csv_field(&entry.pred_seq),
                        entry.count
                    );
                }
            }
            Ok(out.into_bytes())
        }
        Format::Markdown => {
            let mut out = String::from(
                "| Engine | Top-k share | Space insertions | Space deletions | Other |\n|---|---:|---:|---:|---:|\n",
            );
            for e in &report.errors {
                let _ = writeln!(
                    out,
                    "| {} | {:.2}% (k={}) | {} | {} | {} |",
                    md_escape(&e.engine),
                    e.top_share * 100.0,
                    e.top_k,
                    e.whitespace.space_insertions,
                    e.whitespace.space_deletions,
                    e.whitespace.other
                );
            }
            for e in &report.errors {
                let _ = write!(out, "\n### {}\n\n| GT | Prediction | Count |\n|---|---|---:|\n", md_escape(&e.engine));
                for entry in &e.confusion {
                    let _ = writeln!(out, "| {} | {} | {} |", md_seq(&entry.gt_seq), md_seq(&entry.pred_seq), entry.count);
                }
            }
            Ok(out.into_bytes())
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn emit_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("dataset,engine,micro_cer,macro_cer,lines,gt_chars,distance\n");
    for row in report.all_rows() {
        for cell in &row.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&row.label),
                csv_field(&cell.engine),
                cell.micro_percent,
                cell.macro_percent,
                cell.totals.lines,
                cell.totals.gt_chars,
                cell.totals.distance
            );
        }
    }
    out
}

fn md_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '|' | '\\' | '`' | '*' | '_' | '[' | ']' => {
                out.push('\\');
                out.push(ch);
            }
            _ => out.push(ch),
        }
    }
    out
}

fn md_seq(s: &str) -> String {
    if s.is_empty() {
        "ε".to_string()
    } else {
        format!("`{}`", s.replace('`', "´").replace('|', "\\|"))
    }
}

fn emit_markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "| Data |");
    for engine in &report.engines {
        let e = md_escape(engine);
        let _ = write!(out, " {e} micro | {e} macro |");
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in &report.engines {
        out.push_str("---:|---:|");
    }
    out.push('\n');
    for row in report.all_rows() {
        let _ = write!(out, "| {} |", md_escape(&row.label));
        for cell in &row.cells {
            let _ = write!(out, " {} | {} |", cell.micro_percent, cell.macro_percent);
        }
        out.push('\n');
    }

    for errors in &report.errors {
        let _ = write!(
            out,
            "\n### Errors: {}\n\nTop-{} share: {:.2}% ({} of {}). Whitespace: {} insertions, {} deletions, {} other.\n\n",
            md_escape(&errors.engine),
            errors.top_k,
            errors.top_share * 100.0,
            errors.top_mass.top,
            errors.top_mass.total,
            errors.whitespace.space_insertions,
            errors.whitespace.space_deletions,
            errors.whitespace.other,
        );
        if errors.confusion.is_empty() {
            out.push_str("No errors.\n");
            continue;
        }
        out.push_str("| GT | Prediction | Count |\n|---|---|---:|\n");
        for entry in errors.confusion.iter().take(MARKDOWN_CONFUSION_ROWS) {
            let _ = writeln!(
                out,
                "| {} | {} | {} |",
                md_seq(&entry.gt_seq),
                md_seq(&entry.pred_seq),
                entry.count
            );
        }
    }

    out.push('\n');
    for note in &report.notes {
        let _ = writeln!(out, "{note}  ");
    }
    let p = &report.provenance;
    let _ = writeln!(
        out,
        "Codec {} ({}), rules {}, predictions normalized: {}, seed {}, schema {}.",
        md_escape(&p.codec_name),
        short(&p.codec_checksum),
        short(&p.rules_checksum),
        p.predictions_normalized,
        p.seed,
        report.schema_version
    );
    out
}

fn short(checksum: &str) -> &str {
    &checksum[..checksum.len().min(12)]
}
