//! Line-level majority voting over several recognizers' outputs.
//!
//! Every output is aligned to a pivot output. The pivot defines two kinds of
//! slots: one per pivot character and one insertion slot before, between and
//! after them. Each voter casts exactly one ballot per slot: the character
//! (or ε) it aligned to a pivot character, and the string (or ε) it inserted
//! between two pivot characters. The symbol with the most ballots wins a
//! slot; ties are broken according to [`TieBreak`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{align_chars, EditOp};
use crate::line::{LineKey, TranscriptionLine};

/// Engine id carried by voted lines.
pub const VOTED_ENGINE: &str = "voted";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VoteError {
    #[error("insufficient voters: got {got}, need at least {required}")]
    InsufficientVoters { got: usize, required: usize },
    #[error("insufficient voters for {} line(s) (need at least {required}): {}", .lines.len(), list_lines(.lines))]
    InsufficientVotersInLines {
        required: usize,
        lines: Vec<(LineKey, usize)>,
    },
    #[error("confidence tie-breaking needs confidences from every voter; {engine_id} has none")]
    MissingConfidences { engine_id: String },
    #[error("{engine_id}: {got} confidences for {expected} characters")]
    ConfidenceLength {
        engine_id: String,
        expected: usize,
        got: usize,
    },
    #[error("{engine_id}: confidence {value} outside [0, 1]")]
    ConfidenceRange { engine_id: String, value: f64 },
    #[error("invalid confidence value {0:?}")]
    BadConfidence(String),
    #[error("pivot engine {0} is not among the voters")]
    UnknownPivot(String),
    #[error("min_voters must be at least 2, got {0}")]
    MinVoters(usize),
    #[error("line {line}: {source}")]
    Line {
        line: LineKey,
        #[source]
        source: Box<VoteError>,
    },
}

fn list_lines(lines: &[(LineKey, usize)]) -> String {
    lines
        .iter()
        .map(|(key, n)| format!("{key} ({n})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One recognizer's reading of a line, with optional per-character
/// confidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterOutput {
    pub engine_id: String,
    text: String,
    confidences: Option<Vec<f64>>,
}

impl VoterOutput {
    pub fn new(engine_id: impl Into<String>, text: impl Into<String>) -> Self {
        VoterOutput {
            engine_id: engine_id.into(),
            text: text.into(),
            confidences: None,
        }
    }

    pub fn with_confidences(
        engine_id: impl Into<String>,
        text: impl Into<String>,
        confidences: Vec<f64>,
    ) -> Result<Self, VoteError> {
        let engine_id = engine_id.into();
        let text = text.into();
        let expected = text.chars().count();
        if confidences.len() != expected {
            return Err(VoteError::ConfidenceLength {
                engine_id,
                expected,
                got: confidences.len(),
            });
        }
        if let Some(&value) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(VoteError::ConfidenceRange { engine_id, value });
        }
        Ok(VoterOutput {
            engine_id,
            text,
            confidences: Some(confidences),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn confidences(&self) -> Option<&[f64]> {
        self.confidences.as_deref()
    }

    fn mean_confidence(&self) -> f64 {
        match &self.confidences {
            Some(c) if !c.is_empty() => c.iter().sum::<f64>() / c.len() as f64,
            _ => 1.0,
        }
    }
}

/// Parses a confidence sidecar: whitespace-separated decimals.
pub fn parse_confidences(text: &str) -> Result<Vec<f64>, VoteError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| VoteError::BadConfidence(tok.to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Highest summed confidence among the tied symbols' supporters, then
    /// first voter.
    Confidence,
    /// The tied symbol supported by the earliest voter in input order.
    #[default]
    FirstVoter,
    /// The pivot's symbol if it is among the tied ones, else first voter.
    AbstainToPivot,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pivot {
    /// The output with the most characters (earliest on ties).
    #[default]
    Longest,
    First,
    Engine(String),
}

impl FromStr for TieBreak {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "confidence" => Ok(TieBreak::Confidence),
            "first_voter" | "first-voter" => Ok(TieBreak::FirstVoter),
            "abstain_to_pivot" | "abstain-to-pivot" => Ok(TieBreak::AbstainToPivot),
            _ => Err(format!(
                "unknown tie break {s:?} (confidence, first_voter, abstain_to_pivot)"
            )),
        }
    }
}

impl FromStr for Pivot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "longest" => Ok(Pivot::Longest),
            "first" => Ok(Pivot::First),
            _ => match s.strip_prefix("engine=") {
                Some(id) if !id.is_empty() => Ok(Pivot::Engine(id.to_string())),
                _ => Err(format!("unknown pivot {s:?} (longest, first, engine=<id>)")),
            },
        }
    }
}

impl fmt::Display for Pivot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pivot::Longest => f.write_str("longest"),
            Pivot::First => f.write_str("first"),
            Pivot::Engine(id) => write!(f, "engine={id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotingConfig {
    min_voters: usize,
    pub tie_break: TieBreak,
    pub pivot: Pivot,
}

impl Default for VotingConfig {
    fn default() -> Self {
        VotingConfig {
            min_voters: 2,
            tie_break: TieBreak::FirstVoter,
            pivot: Pivot::Longest,
        }
    }
}

impl VotingConfig {
    pub fn new(min_voters: usize, tie_break: TieBreak, pivot: Pivot) -> Result<Self, VoteError> {
        if min_voters < 2 {
            return Err(VoteError::MinVoters(min_voters));
        }
        Ok(VotingConfig {
            min_voters,
            tie_break,
            pivot,
        })
    }

    pub fn min_voters(&self) -> usize {
        self.min_voters
    }
}

#[derive(Clone)]
struct Ballot {
    symbol: String,
    confidences: Vec<f64>,
    /// Weight for confidence tie-breaking.
    weight: f64,
}

fn pick_pivot(outputs: &[VoterOutput], pivot: &Pivot) -> Result<usize, VoteError> {
    match pivot {
        Pivot::First => Ok(0),
        Pivot::Longest => {
            let mut best = 0;
            for (i, o) in outputs.iter().enumerate() {
                if o.text.chars().count() > outputs[best].text.chars().count() {
                    best = i;
                }
            }
            Ok(best)
        }
        Pivot::Engine(id) => outputs
            .iter()
            .position(|o| &o.engine_id == id)
            .ok_or_else(|| VoteError::UnknownPivot(id.clone())),
    }
}

/// Casts one voter's ballots: `chars[i]` for pivot character `i`,
/// `gaps[i]` for the insertion slot before it (`gaps[m]` after the last).
fn cast(pivot: &[char], voter: &VoterOutput) -> (Vec<Ballot>, Vec<Ballot>) {
    let text: Vec<char> = voter.text.chars().collect();
    let conf = |j: usize| voter.confidences.as_ref().map_or(1.0, |c| c[j]);
    let abstain = voter.mean_confidence();
    let empty = || Ballot {
        symbol: String::new(),
        confidences: Vec::new(),
        weight: abstain,
    };

    let mut chars = Vec::with_capacity(pivot.len());
    let mut gaps = Vec::with_capacity(pivot.len() + 1);
    let mut pending = empty();
    let mut j = 0;
    let take_gap = |pending: &mut Ballot| {
        let mut gap = std::mem::replace(pending, empty());
        if !gap.confidences.is_empty() {
            gap.weight = gap.confidences.iter().sum::<f64>() / gap.confidences.len() as f64;
        }
        gap
    };

    for op in align_chars(pivot, &text).script.ops() {
        match *op {
            EditOp::Insert { pred } => {
                pending.symbol.push(pred);
                pending.confidences.push(conf(j));
                j += 1;
            }
            EditOp::Match { ch: pred } | EditOp::Substitute { pred, .. } => {
                gaps.push(take_gap(&mut pending));
                chars.push(Ballot {
                    symbol: pred.to_string(),
                    confidences: vec![conf(j)],
                    weight: conf(j),
                });
                j += 1;
            }
            EditOp::Delete { .. } => {
                gaps.push(take_gap(&mut pending));
                chars.push(empty());
            }
        }
    }
    gaps.push(take_gap(&mut pending));
    (chars, gaps)
}

struct Tally<'a> {
    symbol: &'a str,
    votes: usize,
    weight: f64,
    supporters: Vec<&'a Ballot>,
}

fn decide<'a>(ballots: &'a [Ballot], pivot_idx: usize, tie_break: TieBreak) -> Tally<'a> {
    let mut tallies: Vec<Tally<'a>> = Vec::new();
    for ballot in ballots {
        match tallies.iter_mut().find(|t| t.symbol == ballot.symbol) {
            Some(t) => {
                t.votes += 1;
                t.weight += ballot.weight;
                t.supporters.push(ballot);
            }
            None => tallies.push(Tally {
                symbol: &ballot.symbol,
                votes: 1,
                weight: ballot.weight,
                supporters: vec![ballot],
            }),
        }
    }
    let best = tallies.iter().map(|t| t.votes).max().unwrap_or(0);
    tallies.retain(|t| t.votes == best);
    if tallies.len() > 1 {
        match tie_break {
            TieBreak::Confidence => {
                let top = tallies.iter().map(|t| t.weight).fold(f64::MIN, f64::max);
                tallies.retain(|t| t.weight == top);
            }
            TieBreak::AbstainToPivot => {
                let pivot_symbol = ballots[pivot_idx].symbol.as_str();
                if tallies.iter().any(|t| t.symbol == pivot_symbol) {
                    tallies.retain(|t| t.symbol == pivot_symbol);
                }
            }
            TieBreak::FirstVoter => {}
        }
    }
    // tallies are in order of first appearance, i.e. by first voter
    tallies.swap_remove(0)
}

/// Combines several outputs for the same line into one, with engine id
/// [`VOTED_ENGINE`]. Output confidences are produced when every voter has
/// them: each character gets the mean confidence of the ballots that
/// elected it.
pub fn vote_line(outputs: &[VoterOutput], config: &VotingConfig) -> Result<VoterOutput, VoteError> {
    if outputs.len() < config.min_voters {
        return Err(VoteError::InsufficientVoters {
            got: outputs.len(),
            required: config.min_voters,
        });
    }
    let all_confident = outputs.iter().all(|o| o.confidences.is_some());
    if config.tie_break == TieBreak::Confidence {
        if let Some(o) = outputs.iter().find(|o| o.confidences.is_none()) {
            return Err(VoteError::MissingConfidences {
                engine_id: o.engine_id.clone(),
            });
        }
    }

    let pivot_idx = pick_pivot(outputs, &config.pivot)?;
    let pivot: Vec<char> = outputs[pivot_idx].text.chars().collect();
    let m = pivot.len();
    let mut char_slots: Vec<Vec<Ballot>> = vec![Vec::with_capacity(outputs.len()); m];
    let mut gap_slots: Vec<Vec<Ballot>> = vec![Vec::with_capacity(outputs.len()); m + 1];
    for output in outputs {
        let (chars, gaps) = cast(&pivot, output);
        for (slot, ballot) in char_slots.iter_mut().zip(chars) {
            slot.push(ballot);
        }
        for (slot, ballot) in gap_slots.iter_mut().zip(gaps) {
            slot.push(ballot);
        }
    }

    let mut text = String::with_capacity(m);
    let mut confidences = Vec::with_capacity(m);
    let mut emit = |winner: Tally<'_>| {
        text.push_str(winner.symbol);
        let n = winner.supporters.len() as f64;
        for pos in 0..winner.symbol.chars().count() {
            confidences.push(winner.supporters.iter().map(|b| b.confidences[pos]).sum::<f64>() / n);
        }
    };
    for i in 0..=m {
        emit(decide(&gap_slots[i], pivot_idx, config.tie_break));
        if i < m {
            emit(decide(&char_slots[i], pivot_idx, config.tie_break));
        }
    }

    Ok(VoterOutput {
        engine_id: VOTED_ENGINE.to_string(),
        text,
        confidences: all_confident.then(|| confidences.into_iter().map(|c| c.clamp(0.0, 1.0)).collect()),
    })
}

/// Votes every line. Output is ordered by [`LineKey`]; lines with too few
/// usable outputs are all reported in one error.
pub fn vote_corpus(
    per_line_outputs: &BTreeMap<LineKey, Vec<VoterOutput>>,
    config: &VotingConfig,
) -> Result<Vec<TranscriptionLine>, VoteError> {
    let short: Vec<(LineKey, usize)> = per_line_outputs
        .iter()
        .filter(|(_, outputs)| outputs.len() < config.min_voters)
        .map(|(key, outputs)| (key.clone(), outputs.len()))
        .collect();
    if !short.is_empty() {
        return Err(VoteError::InsufficientVotersInLines {
            required: config.min_voters,
            lines: short,
        });
    }
    let entries: Vec<(&LineKey, &Vec<VoterOutput>)> = per_line_outputs.iter().collect();
    entries
        .par_iter()
        .map(|(key, outputs)| {
            vote_line(outputs, config)
                .map(|voted| TranscriptionLine::prediction((*key).clone(), VOTED_ENGINE, voted.text()))
                .map_err(|e| VoteError::Line {
                    line: (*key).clone(),
                    source: Box::new(e),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outs(texts: &[&str]) -> Vec<VoterOutput> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| VoterOutput::new(format!("e{i}"), *t))
            .collect()
    }

    fn vote(texts: &[&str]) -> String {
        vote_line(&outs(texts), &VotingConfig::default())
            .unwrap()
            .text()
            .to_string()
    }

    #[test]
    fn unanimity_and_majority() {
        assert_eq!(vote(&["abc", "abc", "abc"]), "abc");
        assert_eq!(vote(&["abc", "abc", "abd"]), "abc");
        assert_eq!(vote(&["abd", "abc", "abc"]), "abc");
        assert_eq!(vote(&["", "", ""]), "");
    }

    #[test]
    fn insertions_and_deletions_are_voted() {
        // the longest output carries a spurious character
        assert_eq!(vote(&["abxc", "abc", "abc"]), "abc");
        // a minority deletion of the space is outvoted
        assert_eq!(vote(&["ein Wort", "einWort", "ein Wort"]), "ein Wort");
        // majority insertion relative to a shorter pivot
        let config = VotingConfig::new(2, TieBreak::FirstVoter, Pivot::First).unwrap();
        let v = vote_line(&outs(&["ac", "abc", "abc"]), &config).unwrap();
        assert_eq!(v.text(), "abc");
    }

    #[test]
    fn confidence_breaks_ties() {
        let outputs = vec![
            VoterOutput::with_confidences("a", "ab", vec![0.9, 0.9]).unwrap(),
            VoterOutput::with_confidences("b", "ac", vec![0.9, 0.99]).unwrap(),
        ];
        let config = VotingConfig::new(2, TieBreak::Confidence, Pivot::Longest).unwrap();
        let voted = vote_line(&outputs, &config).unwrap();
        assert_eq!(voted.text(), "ac");
        assert_eq!(voted.engine_id, VOTED_ENGINE);
        let conf = voted.confidences().unwrap();
        assert_eq!(conf.len(), 2);
        assert!((conf[0] - 0.9).abs() < 1e-12 && (conf[1] - 0.99).abs() < 1e-12);

        let first = VotingConfig::default();
        assert_eq!(vote_line(&outputs, &first).unwrap().text(), "ab");
    }

    #[test]
    fn abstain_to_pivot() {
        let config = VotingConfig::new(2, TieBreak::AbstainToPivot, Pivot::Engine("e1".into())).unwrap();
        assert_eq!(vote_line(&outs(&["ab", "ac"]), &config).unwrap().text(), "ac");
        let config = VotingConfig::new(2, TieBreak::AbstainToPivot, Pivot::First).unwrap();
        assert_eq!(vote_line(&outs(&["ab", "ac"]), &config).unwrap().text(), "ab");
    }

    #[test]
    fn errors() {
        let config = VotingConfig::new(3, TieBreak::FirstVoter, Pivot::Longest).unwrap();
        let err = vote_line(&outs(&["a", "a"]), &config).unwrap_err();
        assert!(err.to_string().starts_with("insufficient voters"));
        assert_eq!(VotingConfig::new(1, TieBreak::FirstVoter, Pivot::Longest), Err(VoteError::MinVoters(1)));

        let config = VotingConfig::new(2, TieBreak::Confidence, Pivot::Longest).unwrap();
        assert!(matches!(
            vote_line(&outs(&["a", "a"]), &config),
            Err(VoteError::MissingConfidences { .. })
        ));
        assert!(matches!(
            VoterOutput::with_confidences("x", "ab", vec![0.5]),
            Err(VoteError::ConfidenceLength { expected: 2, got: 1, .. })
        ));
        assert!(matches!(
            VoterOutput::with_confidences("x", "a", vec![1.5]),
            Err(VoteError::ConfidenceRange { .. })
        ));
        let config = VotingConfig::new(2, TieBreak::FirstVoter, Pivot::Engine("zz".into())).unwrap();
        assert_eq!(
            vote_line(&outs(&["a", "a"]), &config),
            Err(VoteError::UnknownPivot("zz".into()))
        );
    }

    #[test]
    fn sidecar_parsing() {
        assert_eq!(parse_confidences("0.5 1\n0.25\t0").unwrap(), vec![0.5, 1.0, 0.25, 0.0]);
        assert!(parse_confidences("0.5 x").is_err());
        assert!(parse_confidences("NaN").is_err());
        assert!(parse_confidences("").unwrap().is_empty());
    }

    #[test]
    fn corpus_voting() {
        let key = |i: &str| LineKey::new("c", "b", i);
        let mut lines = BTreeMap::new();
        lines.insert(key("2"), outs(&["xy", "xy", "xy"]));
        lines.insert(key("1"), outs(&["ein Wort", "einWort", "ein Wort"]));
        let config = VotingConfig::new(3, TieBreak::FirstVoter, Pivot::Longest).unwrap();
        let voted = vote_corpus(&lines, &config).unwrap();
        assert_eq!(voted.len(), 2);
        assert_eq!(voted[0].key, key("1"));
        assert_eq!(voted[0].text(), "ein Wort");
        assert_eq!(voted[1].text(), "xy");
        assert!(voted.iter().all(|l| l.engine_id() == Some(VOTED_ENGINE)));

        lines.insert(key("3"), outs(&["a"]));
        let err = vote_corpus(&lines, &config).unwrap_err();
        match &err {
            VoteError::InsufficientVotersInLines { lines, .. } => {
                assert_eq!(lines, &vec![(key("3"), 1)]);
            }
            other => panic!("{other:?}"),
        }
        assert!(err.to_string().contains("c/b/3"));
    }

    #[test]
    fn config_parsing() {
        assert_eq!("engine=tess".parse(), Ok(Pivot::Engine("tess".into())));
        assert_eq!("longest".parse(), Ok(Pivot::Longest));
        assert!("engine=".parse::<Pivot>().is_err());
        assert_eq!("abstain-to-pivot".parse(), Ok(TieBreak::AbstainToPivot));
        assert!("coin".parse::<TieBreak>().is_err());
    }
}
