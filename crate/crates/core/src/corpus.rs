//! Reading ground-truth and prediction text from line-pair trees.
//!
//! Ground truth lives at `<root>/<book_id>/<line_id>.gt.txt`, predictions at
//! `<root>/<book_id>/<line_id>.pred.<engine_id>.txt` with an optional
//! confidence sidecar `<line_id>.pred.<engine_id>.conf`. A single trailing
//! line terminator is stripped from every text file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::line::{LineKey, TranscriptionLine};
use crate::manifest::GT_SUFFIX;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8")]
    NotUtf8 { path: String },
    #[error("no {what} files found under {root}")]
    Empty { what: String, root: String },
}

/// Lines of one book directory, in line-id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BookLines {
    pub book_id: String,
    pub lines: Vec<TranscriptionLine>,
}

pub fn pred_suffix(engine_id: &str) -> String {
    format!(".pred.{engine_id}.txt")
}

pub fn conf_suffix(engine_id: &str) -> String {
    format!(".pred.{engine_id}.conf")
}

pub(crate) fn read_text(path: &Path) -> Result<String, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut text = String::from_utf8(bytes).map_err(|_| CorpusError::NotUtf8 {
        path: path.display().to_string(),
    })?;
    if text.ends_with('\n') {
        text.pop();
        if text.ends_with('\r') {
            text.pop();
        }
    }
    Ok(text)
}

fn book_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: root.display().to_string(),
        source,
    };
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(io)? {
        let entry = entry.map_err(io)?;
        if entry.file_type().map_err(io)?.is_dir() {
            if let Ok(name) = entry.file_name().into_string() {
                dirs.push((name, entry.path()));
            }
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// `(line_id, path)` for every file in `dir` ending in `suffix`, sorted.
fn files_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<(String, PathBuf)>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        let Ok(name) = entry.file_name().into_string() else {
            continue;
        };
        if let Some(id) = name.strip_suffix(suffix) {
            if !id.is_empty() && entry.file_type().map_err(io)?.is_file() {
                files.push((id.to_string(), entry.path()));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn read_tree(
    root: &Path,
    suffix: &str,
    make: impl Fn(LineKey, &str) -> TranscriptionLine + Sync,
    corpus_id: &str,
) -> Result<Vec<BookLines>, CorpusError> {
    let books: Vec<BookLines> = book_dirs(root)?
        .par_iter()
        .map(|(book_id, dir)| {
            let lines = files_with_suffix(dir, suffix)?
                .into_iter()
                .map(|(line_id, path)| {
                    let text = read_text(&path)?;
                    Ok(make(LineKey::new(corpus_id, book_id.as_str(), line_id), &text))
                })
                .collect::<Result<Vec<_>, CorpusError>>()?;
            Ok(BookLines {
                book_id: book_id.clone(),
                lines,
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    Ok(books.into_iter().filter(|b| !b.lines.is_empty()).collect())
}

/// All ground-truth lines under `root`, grouped by book (sorted by id).
pub fn read_ground_truth(root: impl AsRef<Path>, corpus_id: &str) -> Result<Vec<BookLines>, CorpusError> {
    let root = root.as_ref();
    let books = read_tree(root, GT_SUFFIX, TranscriptionLine::ground_truth, corpus_id)?;
    if books.is_empty() {
        return Err(CorpusError::Empty {
            what: format!("*{GT_SUFFIX}"),
            root: root.display().to_string(),
        });
    }
    Ok(books)
}

/// One engine's prediction lines under `root`, grouped by book. Books
/// without predictions are omitted; an empty result is not an error.
pub fn read_predictions(
    root: impl AsRef<Path>,
    corpus_id: &str,
    engine_id: &str,
) -> Result<Vec<BookLines>, CorpusError> {
    read_tree(
        root.as_ref(),
        &pred_suffix(engine_id),
        |key, text| TranscriptionLine::prediction(key, engine_id, text),
        corpus_id,
    )
}

/// Confidence sidecar texts of one engine, keyed by line.
pub fn read_confidences(
    root: impl AsRef<Path>,
    corpus_id: &str,
    engine_id: &str,
) -> Result<BTreeMap<LineKey, String>, CorpusError> {
    let root = root.as_ref();
    let mut out = BTreeMap::new();
    for (book_id, dir) in book_dirs(root)? {
        for (line_id, path) in files_with_suffix(&dir, &conf_suffix(engine_id))? {
            out.insert(LineKey::new(corpus_id, book_id.as_str(), line_id), read_text(&path)?);
        }
    }
    Ok(out)
}
