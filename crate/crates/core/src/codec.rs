//! Closed character sets ("codecs") that ground truth and predictions must
//! conform to.
//!
//! Codec files are UTF-8 text with one entry per line. Blank lines are
//! ignored and lines starting with `#` are comments, except for the two
//! metadata directives `# name: <label>` and `# version: <string>`. Entries
//! may use the escapes `\s` (space), `\\` (backslash) and `\uXXXX`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Text of the codec shipped with the crate.
pub const DEFAULT_CODEC: &str = include_str!("../data/default.codec");

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("failed to read codec file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("codec file {path} is not valid UTF-8")]
    NotUtf8 { path: String },
    #[error("empty codec")]
    Empty,
    #[error("duplicate character {ch:?} ({code_point}) on line {line}")]
    Duplicate {
        ch: char,
        code_point: String,
        line: usize,
    },
    #[error("line {line}: expected exactly one character, found {entry:?}")]
    NotASingleCharacter { line: usize, entry: String },
    #[error("line {line}: {message}")]
    BadEscape { line: usize, message: String },
    #[error("codec has no space character")]
    MissingSpace,
}

/// An ordered set of Unicode scalar values.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CodecRepr", into = "CodecRepr")]
pub struct Codec {
    name: String,
    version: String,
    chars: Vec<char>,
    members: HashSet<char>,
}

#[derive(Serialize, Deserialize)]
struct CodecRepr {
    name: String,
    version: String,
    characters: String,
}

impl TryFrom<CodecRepr> for Codec {
    type Error = CodecError;

    fn try_from(repr: CodecRepr) -> Result<Self, Self::Error> {
        Codec::new(repr.name, repr.version, repr.characters.chars())
    }
}

impl From<Codec> for CodecRepr {
    fn from(codec: Codec) -> Self {
        CodecRepr {
            characters: codec.chars.iter().collect(),
            name: codec.name,
            version: codec.version,
        }
    }
}

impl fmt::Debug for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Codec")
            .field("name", &self.name)
            .field("version", &self.version)
            .field("len", &self.chars.len())
            .finish()
    }
}

impl Codec {
    /// Builds a codec from characters in declaration order. Rejects empty
    /// and duplicated input; does not require a space (see [`parse_codec`]).
    pub fn new(
        name: impl Into<String>,
        version: impl Into<String>,
        chars: impl IntoIterator<Item = char>,
    ) -> Result<Self, CodecError> {
        let mut ordered = Vec::new();
        let mut members = HashSet::new();
        for (idx, ch) in chars.into_iter().enumerate() {
            if !members.insert(ch) {
                return Err(CodecError::Duplicate {
                    ch,
                    code_point: code_point(ch),
                    line: idx + 1,
                });
            }
            ordered.push(ch);
        }
        if ordered.is_empty() {
            return Err(CodecError::Empty);
        }
        Ok(Codec {
            name: name.into(),
            version: version.into(),
            chars: ordered,
            members,
        })
    }

    /// The codec shipped with the crate (91 entries including space).
    pub fn default_fraktur() -> Self {
        parse_codec(DEFAULT_CODEC).expect("shipped codec is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn contains(&self, ch: char) -> bool {
        self.members.contains(&ch)
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Hex SHA-256 over name, version and characters in order.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name.as_bytes());
        hasher.update([0]);
        hasher.update(self.version.as_bytes());
        hasher.update([0]);
        for ch in &self.chars {
            hasher.update(ch.to_string().as_bytes());
        }
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `U+XXXX` notation for a character.
pub fn code_point(ch: char) -> String {
    format!("U+{:04X}", ch as u32)
}

/// Reads and parses a codec file.
pub fn load_codec(path: impl AsRef<Path>) -> Result<Codec, CodecError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|_| CodecError::NotUtf8 {
        path: path.display().to_string(),
    })?;
    parse_codec(&text)
}

/// Parses codec file contents. The result must contain a space.
pub fn parse_codec(text: &str) -> Result<Codec, CodecError> {
    let mut name = String::from("custom");
    let mut version = String::from("1");
    let mut chars = Vec::new();
    let mut seen: HashSet<char> = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("name:") {
                name = v.trim().to_string();
            } else if let Some(v) = comment.strip_prefix("version:") {
                version = v.trim().to_string();
            }
            continue;
        }
        let entry = unescape(line).map_err(|message| CodecError::BadEscape {
            line: line_no,
            message,
        })?;
        let mut it = entry.chars();
        let ch = match (it.next(), it.next()) {
            (Some(ch), None) => ch,
            _ => {
                return Err(CodecError::NotASingleCharacter {
                    line: line_no,
                    entry,
                })
            }
        };
        if !seen.insert(ch) {
            return Err(CodecError::Duplicate {
                ch,
                code_point: code_point(ch),
                line: line_no,
            });
        }
        chars.push(ch);
    }

    if chars.is_empty() {
        return Err(CodecError::Empty);
    }
    if !seen.contains(&' ') {
        return Err(CodecError::MissingSpace);
    }
    Codec::new(name, version, chars)
}

/// Resolves `\s`, `\t`, `\\` and `\uXXXX` escapes.
pub(crate) fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match it.next() {
            Some('s') => out.push(' '),
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some('u') => {
                let digits: String = it.by_ref().take(4).collect();
                if digits.len() != 4 {
                    return Err(format!("truncated escape \\u{digits}"));
                }
                let value = u32::from_str_radix(&digits, 16)
                    .map_err(|_| format!("invalid hex in \\u{digits}"))?;
                let ch = char::from_u32(value)
                    .ok_or_else(|| format!("\\u{digits} is not a scalar value"))?;
                out.push(ch);
            }
            Some(other) => return Err(format!("unknown escape \\{other}")),
            None => return Err("dangling backslash".to_string()),
        }
    }
    Ok(out)
}
