//! Transcription lines and their identities.

use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Identity of a line within a corpus: `(corpus_id, book_id, line_id)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineKey {
    pub corpus_id: String,
    pub book_id: String,
    pub line_id: String,
}

impl LineKey {
    pub fn new(
        corpus_id: impl Into<String>,
        book_id: impl Into<String>,
        line_id: impl Into<String>,
    ) -> Self {
        LineKey {
            corpus_id: corpus_id.into(),
            book_id: book_id.into(),
            line_id: line_id.into(),
        }
    }
}

impl fmt::Display for LineKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.corpus_id, self.book_id, self.line_id)
    }
}

/// Ground truth, or a prediction made by a named engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineKind {
    GroundTruth,
    Prediction { engine_id: String },
}

/// One line of text with its source identity. Text is held in NFC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptionLine {
    pub key: LineKey,
    #[serde(deserialize_with = "deserialize_nfc")]
    text: String,
    #[serde(flatten)]
    pub kind: LineKind,
}

impl TranscriptionLine {
    pub fn ground_truth(key: LineKey, text: &str) -> Self {
        TranscriptionLine {
            key,
            text: text.nfc().collect(),
            kind: LineKind::GroundTruth,
        }
    }

    pub fn prediction(key: LineKey, engine_id: impl Into<String>, text: &str) -> Self {
        TranscriptionLine {
            key,
            text: text.nfc().collect(),
            kind: LineKind::Prediction {
                engine_id: engine_id.into(),
            },
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn engine_id(&self) -> Option<&str> {
        match &self.kind {
            LineKind::GroundTruth => None,
            LineKind::Prediction { engine_id } => Some(engine_id),
        }
    }

    pub fn is_ground_truth(&self) -> bool {
        matches!(self.kind, LineKind::GroundTruth)
    }

    /// Same identity and kind, new text (brought to NFC).
    pub fn with_text(&self, text: &str) -> Self {
        TranscriptionLine {
            key: self.key.clone(),
            text: text.nfc().collect(),
            kind: self.kind.clone(),
        }
    }
}

fn deserialize_nfc<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    let raw = String::deserialize(d)?;
    Ok(raw.nfc().collect())
}
