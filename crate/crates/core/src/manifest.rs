//! Book-level corpus manifests, the staged training schedule and capped
//! per-book refinement sampling.
//!
//! Corpora on disk follow the line-pair layout
//! `<root>/<book_id>/<line_id>.gt.txt` with a sibling image
//! `<line_id>.png`, `<line_id>.bin.png` or `<line_id>.nrm.png`. Manifests
//! store paths relative to the corpus root.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub const GT_SUFFIX: &str = ".gt.txt";
/// Image suffixes, in order of preference.
pub const IMAGE_SUFFIXES: [&str; 3] = [".png", ".bin.png", ".nrm.png"];

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no books with complete line pairs under {root}")]
    NoBooks { root: String },
    #[error("stage {stage} references unknown corpus {corpus_id}")]
    UnknownCorpus { stage: StageName, corpus_id: String },
    #[error("training stages must be exactly pretraining, synthetic, real, refinement; got {0}")]
    StageOrder(String),
    #[error("stage {0}: a per-book cap is required for refinement and not allowed elsewhere")]
    CapMismatch(StageName),
    #[error("invalid manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported manifest schema version {0}")]
    SchemaVersion(u32),
    #[error("line {line}: expected `corpus_id<TAB>books<TAB>lines`")]
    BadExpectation { line: usize },
}

/// One ground-truth line and its image, relative to the corpus root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRecord {
    pub id: String,
    pub gt: String,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BookMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub century: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookEntry {
    pub book_id: String,
    pub corpus_id: String,
    pub lines: Vec<LineRecord>,
    #[serde(default)]
    pub metadata: BookMetadata,
}

impl BookEntry {
    /// A book whose lines follow the standard layout under its own
    /// directory.
    pub fn with_line_ids<I, S>(corpus_id: &str, book_id: &str, line_ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        BookEntry {
            book_id: book_id.to_string(),
            corpus_id: corpus_id.to_string(),
            lines: line_ids
                .into_iter()
                .map(|id| {
                    let id = id.into();
                    LineRecord {
                        gt: format!("{book_id}/{id}{GT_SUFFIX}"),
                        image: format!("{book_id}/{id}.png"),
                        id,
                    }
                })
                .collect(),
            metadata: BookMetadata::default(),
        }
    }

    pub fn line_ids(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().map(|l| l.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Versioned on-disk form of a list of books.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    /// Seed used to derive this manifest, if it was sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_per_book: Option<usize>,
    pub books: Vec<BookEntry>,
}

impl CorpusManifest {
    pub fn new(books: Vec<BookEntry>) -> Self {
        CorpusManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            seed: None,
            cap_per_book: None,
            books,
        }
    }

    pub fn total_lines(&self) -> usize {
        self.books.iter().map(BookEntry::len).sum()
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ManifestError> {
        let manifest: CorpusManifest = serde_json::from_slice(bytes)?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(ManifestError::SchemaVersion(manifest.schema_version));
        }
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanWarning {
    MissingImage { book_id: String, line_id: String },
    MissingGroundTruth { book_id: String, line_id: String },
    EmptyBook { book_id: String },
}

impl fmt::Display for ScanWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScanWarning::MissingImage { book_id, line_id } => {
                write!(f, "{book_id}/{line_id}: ground truth without image, excluded")
            }
            ScanWarning::MissingGroundTruth { book_id, line_id } => {
                write!(f, "{book_id}/{line_id}: image without ground truth, excluded")
            }
            ScanWarning::EmptyBook { book_id } => {
                write!(f, "{book_id}: no complete line pairs, book skipped")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanOutcome {
    pub books: Vec<BookEntry>,
    pub warnings: Vec<ScanWarning>,
}

impl ScanOutcome {
    pub fn total_lines(&self) -> usize {
        self.books.iter().map(BookEntry::len).sum()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn strip_image_suffix(name: &str) -> Option<&str> {
    // longest suffixes first so `x.bin.png` yields `x`
    [".bin.png", ".nrm.png", ".png"]
        .iter()
        .find_map(|suffix| name.strip_suffix(suffix))
}

fn scan_book(dir: &Path, corpus_id: &str, book_id: &str) -> Result<(Option<BookEntry>, Vec<ScanWarning>), ManifestError> {
    let mut files = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        if entry.file_type().map_err(io_err(dir))?.is_file() {
            if let Ok(name) = entry.file_name().into_string() {
                files.insert(name);
            }
        }
    }

    let mut warnings = Vec::new();
    let mut lines = Vec::new();
    let mut gt_ids = BTreeSet::new();
    for name in &files {
        let Some(id) = name.strip_suffix(GT_SUFFIX) else {
            continue;
        };
        gt_ids.insert(id.to_string());
        let image = IMAGE_SUFFIXES
            .iter()
            .map(|suffix| format!("{id}{suffix}"))
            .find(|candidate| files.contains(candidate));
        match image {
            Some(image) => lines.push(LineRecord {
                id: id.to_string(),
                gt: format!("{book_id}/{name}"),
                image: format!("{book_id}/{image}"),
            }),
            None => warnings.push(ScanWarning::MissingImage {
                book_id: book_id.to_string(),
                line_id: id.to_string(),
            }),
        }
    }
    let orphan_images: BTreeSet<&str> = files
        .iter()
        .filter_map(|name| strip_image_suffix(name))
        .filter(|id| !gt_ids.contains(*id))
        .collect();
    warnings.extend(orphan_images.into_iter().map(|id| ScanWarning::MissingGroundTruth {
        book_id: book_id.to_string(),
        line_id: id.to_string(),
    }));

    if lines.is_empty() {
        if !files.is_empty() {
            warnings.push(ScanWarning::EmptyBook {
                book_id: book_id.to_string(),
            });
        }
        return Ok((None, warnings));
    }
    Ok((
        Some(BookEntry {
            book_id: book_id.to_string(),
            corpus_id: corpus_id.to_string(),
            lines,
            metadata: BookMetadata::default(),
        }),
        warnings,
    ))
}

/// Scans a line-pair tree into one [`BookEntry`] per book directory, sorted
/// by book id, lines sorted by line id. Incomplete pairs become warnings.
pub fn scan_corpus(root: impl AsRef<Path>, corpus_id: &str) -> Result<ScanOutcome, ManifestError> {
    let root = root.as_ref();
    let mut book_dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        if entry.file_type().map_err(io_err(root))?.is_dir() {
            if let Ok(name) = entry.file_name().into_string() {
                book_dirs.push((name, entry.path()));
            }
        }
    }
    book_dirs.sort();

    let scanned: Vec<_> = book_dirs
        .par_iter()
        .map(|(book_id, dir)| scan_book(dir, corpus_id, book_id))
        .collect::<Result<_, _>>()?;

    let mut outcome = ScanOutcome {
        books: Vec::new(),
        warnings: Vec::new(),
    };
    for (book, warnings) in scanned {
        outcome.books.extend(book);
        outcome.warnings.extend(warnings);
    }
    if outcome.books.is_empty() {
        return Err(ManifestError::NoBooks {
            root: root.display().to_string(),
        });
    }
    Ok(outcome)
}

/// Uniform sample of at most `cap` line ids without replacement,
/// deterministic in `seed`, returned sorted by line id.
pub fn refinement_sample(book: &BookEntry, cap: NonZeroUsize, seed: u64) -> Vec<String> {
    let n = book.lines.len();
    let mut ids: Vec<String> = if n <= cap.get() {
        book.line_ids().map(str::to_string).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, n, cap.get())
            .into_iter()
            .map(|i| book.lines[i].id.clone())
            .collect()
    };
    ids.sort();
    ids
}

/// Per-book seed derived from the run seed and the book identity, so books
/// are sampled independently of their position in the manifest.
pub fn book_seed(seed: u64, corpus_id: &str, book_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(corpus_id.as_bytes());
    hasher.update([0]);
    hasher.update(book_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Reduces every book to its refinement sample.
pub fn refine_books(books: &[BookEntry], cap: NonZeroUsize, seed: u64) -> Vec<BookEntry> {
    books
        .iter()
        .map(|book| {
            let keep: BTreeSet<String> =
                refinement_sample(book, cap, book_seed(seed, &book.corpus_id, &book.book_id))
                    .into_iter()
                    .collect();
            BookEntry {
                lines: book
                    .lines
                    .iter()
                    .filter(|l| keep.contains(&l.id))
                    .cloned()
                    .collect(),
                ..book.clone()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    Pretraining,
    Synthetic,
    Real,
    Refinement,
}

impl StageName {
    pub const ORDER: [StageName; 4] = [
        StageName::Pretraining,
        StageName::Synthetic,
        StageName::Real,
        StageName::Refinement,
    ];
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageName::Pretraining => "pretraining",
            StageName::Synthetic => "synthetic",
            StageName::Real => "real",
            StageName::Refinement => "refinement",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingStage {
    pub name: StageName,
    pub corpora: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_per_book: Option<NonZeroUsize>,
}

impl TrainingStage {
    pub fn new<S: Into<String>>(name: StageName, corpora: impl IntoIterator<Item = S>) -> Self {
        TrainingStage {
            name,
            corpora: corpora.into_iter().map(Into::into).collect(),
            cap_per_book: None,
        }
    }

    pub fn refinement<S: Into<String>>(corpora: impl IntoIterator<Item = S>, cap: NonZeroUsize) -> Self {
        TrainingStage {
            cap_per_book: Some(cap),
            ..TrainingStage::new(StageName::Refinement, corpora)
        }
    }
}

/// Four stages in fixed order plus the sampling seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr")]
pub struct TrainingSchedule {
    stages: Vec<TrainingStage>,
    pub seed: u64,
}

#[derive(Deserialize)]
struct ScheduleRepr {
    stages: Vec<TrainingStage>,
    seed: u64,
}

impl TryFrom<ScheduleRepr> for TrainingSchedule {
    type Error = ManifestError;

    fn try_from(repr: ScheduleRepr) -> Result<Self, Self::Error> {
        TrainingSchedule::new(repr.stages, repr.seed)
    }
}

impl TrainingSchedule {
    pub fn new(stages: Vec<TrainingStage>, seed: u64) -> Result<Self, ManifestError> {
        let names: Vec<StageName> = stages.iter().map(|s| s.name).collect();
        if names != StageName::ORDER {
            let got = names.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
            return Err(ManifestError::StageOrder(got));
        }
        for stage in &stages {
            if stage.cap_per_book.is_some() != (stage.name == StageName::Refinement) {
                return Err(ManifestError::CapMismatch(stage.name));
            }
        }
        Ok(TrainingSchedule { stages, seed })
    }

    pub fn stages(&self) -> &[TrainingStage] {
        &self.stages
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScheduledLine {
    pub corpus_id: String,
    pub book_id: String,
    pub line_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCount {
    pub corpus_id: String,
    pub books: usize,
    pub lines: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSelection {
    pub name: StageName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_per_book: Option<NonZeroUsize>,
    pub per_corpus: Vec<CorpusCount>,
    pub lines: Vec<ScheduledLine>,
}

impl StageSelection {
    pub fn total_lines(&self) -> usize {
        self.lines.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleOutput {
    pub schema_version: u32,
    pub seed: u64,
    pub stages: Vec<StageSelection>,
}

/// Selects the lines of every stage. Non-refinement stages take every line
/// of their corpora; the refinement stage takes a capped per-book sample.
/// Stages are independent, so a line may appear in several of them.
pub fn build_schedule(
    manifests: &[BookEntry],
    schedule: &TrainingSchedule,
) -> Result<ScheduleOutput, ManifestError> {
    let mut by_corpus: BTreeMap<&str, Vec<&BookEntry>> = BTreeMap::new();
    for book in manifests {
        by_corpus.entry(&book.corpus_id).or_default().push(book);
    }

    let mut stages = Vec::with_capacity(schedule.stages.len());
    for stage in &schedule.stages {
        let mut lines = Vec::new();
        let mut per_corpus = Vec::new();
        for corpus_id in &stage.corpora {
            let books = by_corpus.get(corpus_id.as_str()).ok_or_else(|| ManifestError::UnknownCorpus {
                stage: stage.name,
                corpus_id: corpus_id.clone(),
            })?;
            let before = lines.len();
            for book in books {
                let ids: Vec<String> = match stage.cap_per_book {
                    Some(cap) => refinement_sample(
                        book,
                        cap,
                        book_seed(schedule.seed, &book.corpus_id, &book.book_id),
                    ),
                    None => book.line_ids().map(str::to_string).collect(),
                };
                lines.extend(ids.into_iter().map(|line_id| ScheduledLine {
                    corpus_id: book.corpus_id.clone(),
                    book_id: book.book_id.clone(),
                    line_id,
                }));
            }
            per_corpus.push(CorpusCount {
                corpus_id: corpus_id.clone(),
                books: books.len(),
                lines: lines.len() - before,
            });
        }
        stages.push(StageSelection {
            name: stage.name,
            cap_per_book: stage.cap_per_book,
            per_corpus,
            lines,
        });
    }
    Ok(ScheduleOutput {
        schema_version: MANIFEST_SCHEMA_VERSION,
        seed: schedule.seed,
        stages,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCount {
    pub corpus_id: String,
    pub books: usize,
    pub lines: usize,
}

impl ExpectedCount {
    pub fn new(corpus_id: &str, books: usize, lines: usize) -> Self {
        ExpectedCount {
            corpus_id: corpus_id.to_string(),
            books,
            lines,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CountField {
    Books,
    Lines,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub corpus_id: String,
    pub field: CountField,
    pub expected: usize,
    pub actual: usize,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = match self.field {
            CountField::Books => "books",
            CountField::Lines => "lines",
        };
        write!(
            f,
            "{}: expected {} {field}, found {}",
            self.corpus_id, self.expected, self.actual
        )
    }
}

/// Compares book and line counts per corpus against expectations.
pub fn verify_counts(manifest: &[BookEntry], expected: &[ExpectedCount]) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    for exp in expected {
        let books: Vec<&BookEntry> = manifest.iter().filter(|b| b.corpus_id == exp.corpus_id).collect();
        let lines: usize = books.iter().map(|b| b.len()).sum();
        for (field, expected, actual) in [
            (CountField::Books, exp.books, books.len()),
            (CountField::Lines, exp.lines, lines),
        ] {
            if expected != actual {
                out.push(Discrepancy {
                    corpus_id: exp.corpus_id.clone(),
                    field,
                    expected,
                    actual,
                });
            }
        }
    }
    out
}

/// Parses `corpus_id<TAB>books<TAB>lines` rows; `#` comments, thousands
/// separators (`3,483`) allowed.
pub fn parse_expectations(text: &str) -> Result<Vec<ExpectedCount>, ManifestError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || ManifestError::BadExpectation { line: idx + 1 };
        let cols: Vec<&str> = line.split('\t').collect();
        let [corpus_id, books, lines] = cols[..] else {
            return Err(bad());
        };
        let num = |s: &str| s.trim().replace(',', "").parse::<usize>().map_err(|_| bad());
        out.push(ExpectedCount {
            corpus_id: corpus_id.trim().to_string(),
            books: num(books)?,
            lines: num(lines)?,
        });
    }
    Ok(out)
}
