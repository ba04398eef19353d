//! Transcription regularization: ordered rewrite rules followed by a codec
//! membership check.
//!
//! Rules files are UTF-8 TSV with one `source<TAB>target` pair per line,
//! applied top to bottom. The target may be empty (deletion). `#` starts a
//! comment line; the directive `# keep: <chars>` lists characters that no
//! rule may rewrite. Both columns accept the codec file escapes.
//!
//! A rule set is accepted against a codec only if every target is made of
//! codec characters and every source contains at least one character
//! outside the codec. Together with the final membership check this makes
//! normalization idempotent: a successfully normalized line consists of
//! codec characters only, so no source can match it again.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::codec::{code_point, hex, unescape, Codec};
use crate::line::{LineKey, TranscriptionLine};

/// Text of the rule set shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("../data/default.rules.tsv");

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("failed to read rules file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rules file {path} is not valid UTF-8")]
    NotUtf8 { path: String },
    #[error("line {line}: expected `source<TAB>target`")]
    Malformed { line: usize },
    #[error("line {line}: {message}")]
    BadEscape { line: usize, message: String },
    #[error("rule {rule_source:?} -> {target:?}: target character {ch:?} ({code_point}) is not in the codec")]
    TargetOutsideCodec {
        rule_source: String,
        target: String,
        ch: char,
        code_point: String,
    },
    #[error("rule {rule_source:?} consists only of codec characters and would rewrite normalized text")]
    SourceInsideCodec { rule_source: String },
    #[error("rule {rule_source:?} rewrites kept character {ch:?}")]
    RewritesKept { rule_source: String, ch: char },
    #[error("kept character {ch:?} is not in the codec")]
    KeptOutsideCodec { ch: char },
    #[error("replacement character {ch:?} is not in the codec")]
    ReplacementOutsideCodec { ch: char },
}

/// One rewrite rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub source: String,
    pub target: String,
}

/// Ordered rewrite rules plus characters that must survive untouched.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NormalizationRuleSet {
    pub mappings: Vec<Rule>,
    pub keep_list: Vec<char>,
}

impl NormalizationRuleSet {
    pub fn default_fraktur() -> Self {
        parse_rules(DEFAULT_RULES).expect("shipped rules are valid")
    }

    /// Checks the rule set against `codec`; see the module docs.
    pub fn check(&self, codec: &Codec) -> Result<(), RuleError> {
        for &ch in &self.keep_list {
            if !codec.contains(ch) {
                return Err(RuleError::KeptOutsideCodec { ch });
            }
        }
        for rule in &self.mappings {
            if let Some(ch) = rule.target.chars().find(|c| !codec.contains(*c)) {
                return Err(RuleError::TargetOutsideCodec {
                    rule_source: rule.source.clone(),
                    target: rule.target.clone(),
                    ch,
                    code_point: code_point(ch),
                });
            }
            if rule.source.chars().all(|c| codec.contains(c)) {
                return Err(RuleError::SourceInsideCodec {
                    rule_source: rule.source.clone(),
                });
            }
            if let Some(ch) = rule.source.chars().find(|c| self.keep_list.contains(c)) {
                return Err(RuleError::RewritesKept {
                    rule_source: rule.source.clone(),
                    ch,
                });
            }
        }
        Ok(())
    }

    /// Hex SHA-256 over the rules in order and the keep list.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for rule in &self.mappings {
            hasher.update(rule.source.as_bytes());
            hasher.update([0x1f]);
            hasher.update(rule.target.as_bytes());
            hasher.update([0x1e]);
        }
        hasher.update([0x1d]);
        for ch in &self.keep_list {
            hasher.update(ch.to_string().as_bytes());
        }
        hex(&hasher.finalize())
    }

    /// Applies NFC, then every rule in order, then NFC again. No codec check.
    pub fn rewrite(&self, text: &str) -> String {
        let mut out: String = text.nfc().collect();
        for rule in &self.mappings {
            if out.contains(rule.source.as_str()) {
                out = out.replace(rule.source.as_str(), &rule.target);
            }
        }
        out.nfc().collect()
    }
}

pub fn load_rules(path: impl AsRef<Path>) -> Result<NormalizationRuleSet, RuleError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| RuleError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|_| RuleError::NotUtf8 {
        path: path.display().to_string(),
    })?;
    parse_rules(&text)
}

pub fn parse_rules(text: &str) -> Result<NormalizationRuleSet, RuleError> {
    let mut set = NormalizationRuleSet::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(kept) = comment.trim().strip_prefix("keep:") {
                for token in kept.split_whitespace() {
                    let token = unescape(token).map_err(|message| RuleError::BadEscape {
                        line: line_no,
                        message,
                    })?;
                    set.keep_list.extend(token.chars());
                }
            }
            continue;
        }
        let (source, target) = line
            .split_once('\t')
            .ok_or(RuleError::Malformed { line: line_no })?;
        if target.contains('\t') {
            return Err(RuleError::Malformed { line: line_no });
        }
        let unesc = |s: &str| {
            unescape(s).map_err(|message| RuleError::BadEscape {
                line: line_no,
                message,
            })
        };
        let source: String = unesc(source)?.nfc().collect();
        if source.is_empty() {
            return Err(RuleError::Malformed { line: line_no });
        }
        set.mappings.push(Rule {
            source,
            target: unesc(target)?.nfc().collect(),
        });
    }
    Ok(set)
}

/// A character that survived all rules without being in the codec.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Residual {
    /// Character index in the rewritten text.
    pub position: usize,
    pub ch: char,
    pub code_point: String,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("line {line}: characters outside the codec: {}", fmt_residuals(.residual))]
    Unmapped {
        line: LineKey,
        residual: Vec<Residual>,
    },
}

fn fmt_residuals(residual: &[Residual]) -> String {
    residual
        .iter()
        .map(|r| format!("{:?} {} at {}", r.ch, r.code_point, r.position))
        .collect::<Vec<_>>()
        .join(", ")
}

/// What to do with characters no rule maps into the codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnmappedPolicy {
    #[default]
    Fail,
    Drop,
    Replace(char),
}

impl FromStr for UnmappedPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fail" => Ok(UnmappedPolicy::Fail),
            "drop" => Ok(UnmappedPolicy::Drop),
            _ => {
                let value = s
                    .strip_prefix("replace=")
                    .ok_or_else(|| format!("expected fail, drop or replace=<char>, got {s:?}"))?;
                let value = unescape(value)?;
                let mut it = value.chars();
                match (it.next(), it.next()) {
                    (Some(ch), None) => Ok(UnmappedPolicy::Replace(ch)),
                    _ => Err(format!("replace= takes exactly one character, got {value:?}")),
                }
            }
        }
    }
}

impl fmt::Display for UnmappedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnmappedPolicy::Fail => f.write_str("fail"),
            UnmappedPolicy::Drop => f.write_str("drop"),
            UnmappedPolicy::Replace(ch) => write!(f, "replace={ch}"),
        }
    }
}

/// Rewrites `line` with `rules` and checks the result against `codec`.
///
/// The caller is responsible for having checked `rules` against `codec`
/// ([`NormalizationRuleSet::check`]); [`Normalizer`] does that once up front.
pub fn normalize_line(
    line: &TranscriptionLine,
    rules: &NormalizationRuleSet,
    codec: &Codec,
) -> Result<TranscriptionLine, NormalizeError> {
    let text = rules.rewrite(line.text());
    let residual: Vec<Residual> = text
        .chars()
        .enumerate()
        .filter(|(_, ch)| !codec.contains(*ch))
        .map(|(position, ch)| Residual {
            position,
            ch,
            code_point: code_point(ch),
        })
        .collect();
    if residual.is_empty() {
        Ok(line.with_text(&text))
    } else {
        Err(NormalizeError::Unmapped {
            line: line.key.clone(),
            residual,
        })
    }
}

/// A position/character pair that is not part of the codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub position: usize,
    pub ch: char,
}

/// Lists every character of `line` that is not in `codec`, by character
/// index.
pub fn validate_against_codec(line: &TranscriptionLine, codec: &Codec) -> Vec<Violation> {
    line.text()
        .chars()
        .enumerate()
        .filter(|(_, ch)| !codec.contains(*ch))
        .map(|(position, ch)| Violation { position, ch })
        .collect()
}

/// A validated rule set bound to its codec.
#[derive(Debug, Clone)]
pub struct Normalizer {
    rules: NormalizationRuleSet,
    codec: Codec,
}

impl Normalizer {
    pub fn new(rules: NormalizationRuleSet, codec: Codec) -> Result<Self, RuleError> {
        rules.check(&codec)?;
        Ok(Normalizer { rules, codec })
    }

    pub fn default_fraktur() -> Self {
        Normalizer::new(
            NormalizationRuleSet::default_fraktur(),
            Codec::default_fraktur(),
        )
        .expect("shipped rules fit the shipped codec")
    }

    pub fn rules(&self) -> &NormalizationRuleSet {
        &self.rules
    }

    pub fn codec(&self) -> &Codec {
        &self.codec
    }

    pub fn normalize(&self, line: &TranscriptionLine) -> Result<TranscriptionLine, NormalizeError> {
        normalize_line(line, &self.rules, &self.codec)
    }

    /// Like [`Normalizer::normalize`], resolving residual characters per
    /// `policy` instead of failing (unless the policy is `Fail`).
    pub fn normalize_with_policy(
        &self,
        line: &TranscriptionLine,
        policy: UnmappedPolicy,
    ) -> Result<TranscriptionLine, NormalizeError> {
        if let UnmappedPolicy::Replace(ch) = policy {
            assert!(
                self.codec.contains(ch),
                "replacement {ch:?} must be a codec character; use Normalizer::check_policy"
            );
        }
        match (self.normalize(line), policy) {
            (Ok(out), _) => Ok(out),
            (Err(err), UnmappedPolicy::Fail) => Err(err),
            (Err(_), policy) => {
                let text: String = self
                    .rules
                    .rewrite(line.text())
                    .chars()
                    .filter_map(|ch| match policy {
                        _ if self.codec.contains(ch) => Some(ch),
                        UnmappedPolicy::Replace(r) => Some(r),
                        _ => None,
                    })
                    .collect();
                Ok(line.with_text(&text))
            }
        }
    }

    pub fn check_policy(&self, policy: UnmappedPolicy) -> Result<(), RuleError> {
        match policy {
            UnmappedPolicy::Replace(ch) if !self.codec.contains(ch) => {
                Err(RuleError::ReplacementOutsideCodec { ch })
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CharCount {
    pub ch: char,
    pub count: u64,
}

/// Character frequencies split by codec membership, each table ordered by
/// count descending and then code point.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CoverageReport {
    pub in_codec: Vec<CharCount>,
    pub out_of_codec: Vec<CharCount>,
}

impl CoverageReport {
    pub fn total(&self) -> u64 {
        self.in_codec
            .iter()
            .chain(&self.out_of_codec)
            .map(|c| c.count)
            .sum()
    }
}

pub fn codec_coverage_report<'a>(
    lines: impl IntoIterator<Item = &'a TranscriptionLine>,
    codec: &Codec,
) -> CoverageReport {
    let mut counts: HashMap<char, u64> = HashMap::new();
    for line in lines {
        for ch in line.text().chars() {
            *counts.entry(ch).or_default() += 1;
        }
    }
    let mut report = CoverageReport::default();
    for (ch, count) in counts {
        let entry = CharCount { ch, count };
        if codec.contains(ch) {
            report.in_codec.push(entry);
        } else {
            report.out_of_codec.push(entry);
        }
    }
    for table in [&mut report.in_codec, &mut report.out_of_codec] {
        table.sort_by(|a, b| b.count.cmp(&a.count).then(a.ch.cmp(&b.ch)));
    }
    report
}
