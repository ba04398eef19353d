//! Error analytics over alignments: confusion tables, top-k error share and
//! whitespace error classes.

use std::collections::HashMap;
use std::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentResult, EditOp};

/// A ground-truth sequence read as a prediction sequence, `count` times.
/// An empty `gt_seq` is an insertion, an empty `pred_seq` a deletion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub gt_seq: String,
    pub pred_seq: String,
    pub count: u64,
}

impl ConfusionEntry {
    pub fn new(gt_seq: impl Into<String>, pred_seq: impl Into<String>, count: u64) -> Self {
        ConfusionEntry {
            gt_seq: gt_seq.into(),
            pred_seq: pred_seq.into(),
            count,
        }
    }

    pub fn is_insertion(&self) -> bool {
        self.gt_seq.is_empty()
    }

    pub fn is_deletion(&self) -> bool {
        self.pred_seq.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfusionMode {
    /// Every non-match edit operation is one entry.
    #[default]
    SingleOp,
    /// Maximal runs of adjacent insertions (or deletions) within a line
    /// collapse into one multi-character entry.
    MergeRuns,
}

enum Run {
    None,
    Insert(String),
    Delete(String),
}

/// Counts edit operations across all `results` and ranks them by count
/// descending, then by `(gt_seq, pred_seq)`.
pub fn confusion_stats<'a>(
    results: impl IntoIterator<Item = &'a AlignmentResult>,
    mode: ConfusionMode,
) -> Vec<ConfusionEntry> {
    let mut counts: HashMap<(String, String), u64> = HashMap::new();
    let mut bump = |gt: String, pred: String| *counts.entry((gt, pred)).or_default() += 1;

    for result in results {
        let mut run = Run::None;
        for op in result.script.ops() {
            if mode == ConfusionMode::SingleOp {
                match *op {
                    EditOp::Match { .. } => {}
                    EditOp::Substitute { gt, pred } => bump(gt.into(), pred.into()),
                    EditOp::Insert { pred } => bump(String::new(), pred.into()),
                    EditOp::Delete { gt } => bump(gt.into(), String::new()),
                }
                continue;
            }
            run = match (run, *op) {
                (Run::Insert(mut s), EditOp::Insert { pred }) => {
                    s.push(pred);
                    Run::Insert(s)
                }
                (Run::Delete(mut s), EditOp::Delete { gt }) => {
                    s.push(gt);
                    Run::Delete(s)
                }
                (prev, op) => {
                    flush(prev, &mut bump);
                    match op {
                        EditOp::Insert { pred } => Run::Insert(pred.into()),
                        EditOp::Delete { gt } => Run::Delete(gt.into()),
                        EditOp::Substitute { gt, pred } => {
                            bump(gt.into(), pred.into());
                            Run::None
                        }
                        EditOp::Match { .. } => Run::None,
                    }
                }
            };
        }
        flush(run, &mut bump);
    }

    let mut ranked: Vec<ConfusionEntry> = counts
        .into_iter()
        .map(|((gt_seq, pred_seq), count)| ConfusionEntry {
            gt_seq,
            pred_seq,
            count,
        })
        .collect();
    rank(&mut ranked);
    ranked
}

fn flush(run: Run, bump: &mut impl FnMut(String, String)) {
    match run {
        Run::None => {}
        Run::Insert(s) => bump(String::new(), s),
        Run::Delete(s) => bump(s, String::new()),
    }
}

/// Sorts by count descending, ties by `(gt_seq, pred_seq)` ascending.
pub fn rank(entries: &mut [ConfusionEntry]) {
    entries.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.gt_seq.cmp(&b.gt_seq))
            .then_with(|| a.pred_seq.cmp(&b.pred_seq))
    });
}

/// Error mass of the first `k` entries of a ranked confusion list against
/// the total, kept as integers so callers can compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorShare {
    pub top: u64,
    pub total: u64,
}

impl ErrorShare {
    /// `top / total`, or 0 for an empty list.
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.top as f64 / self.total as f64
        }
    }
}

pub fn top_k_error_mass(confusion: &[ConfusionEntry], k: NonZeroUsize) -> ErrorShare {
    ErrorShare {
        top: confusion.iter().take(k.get()).map(|e| e.count).sum(),
        total: confusion.iter().map(|e| e.count).sum(),
    }
}

/// Fraction of all errors made up by the `k` most frequent entries.
pub fn top_k_error_share(confusion: &[ConfusionEntry], k: NonZeroUsize) -> f64 {
    top_k_error_mass(confusion, k).fraction()
}

/// Error mass split into pure whitespace insertions, pure whitespace
/// deletions and everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WhitespaceSummary {
    pub space_insertions: u64,
    pub space_deletions: u64,
    pub other: u64,
}

impl WhitespaceSummary {
    pub fn total(&self) -> u64 {
        self.space_insertions + self.space_deletions + self.other
    }
}

fn all_whitespace(s: &str) -> bool {
    !s.is_empty() && s.chars().all(char::is_whitespace)
}

pub fn classify_whitespace_errors(confusion: &[ConfusionEntry]) -> WhitespaceSummary {
    let mut summary = WhitespaceSummary::default();
    for entry in confusion {
        if entry.is_insertion() && all_whitespace(&entry.pred_seq) {
            summary.space_insertions += entry.count;
        } else if entry.is_deletion() && all_whitespace(&entry.gt_seq) {
            summary.space_deletions += entry.count;
        } else {
            summary.other += entry.count;
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{align, EditScript};

    fn k(n: usize) -> NonZeroUsize {
        NonZeroUsize::new(n).unwrap()
    }

    fn result(ops: Vec<EditOp>) -> AlignmentResult {
        let script = EditScript(ops);
        AlignmentResult {
            distance: script.distance(),
            gt_len: script.gt_text().chars().count(),
            pred_len: script.pred_text().chars().count(),
            script,
        }
    }

    #[test]
    fn counts_single_ops() {
        let del = EditOp::Delete { gt: ' ' };
        let results = [
            result(vec![EditOp::Match { ch: 'a' }, del, del]),
            result(vec![del, EditOp::Substitute { gt: 'u', pred: 'n' }]),
        ];
        assert_eq!(
            confusion_stats(&results, ConfusionMode::SingleOp),
            vec![ConfusionEntry::new(" ", "", 3), ConfusionEntry::new("u", "n", 1)]
        );
    }

    #[test]
    fn all_match_is_empty() {
        assert!(confusion_stats(&[align("abc", "abc")], ConfusionMode::SingleOp).is_empty());
    }

    #[test]
    fn single_insert() {
        assert_eq!(
            confusion_stats(&[align("ab", "a b")], ConfusionMode::SingleOp),
            vec![ConfusionEntry::new("", " ", 1)]
        );
    }

    #[test]
    fn merge_runs() {
        let results = [align("abcd", "ad"), align("x", "xyz"), align("ab", "a")];
        assert_eq!(
            confusion_stats(&results, ConfusionMode::SingleOp).len(),
            4,
            "b c y z, with b counted twice"
        );
        assert_eq!(
            confusion_stats(&results, ConfusionMode::MergeRuns),
            vec![
                ConfusionEntry::new("", "yz", 1),
                ConfusionEntry::new("b", "", 1),
                ConfusionEntry::new("bc", "", 1),
            ]
        );
        // runs break at substitutions and do not join inserts with deletes
        let mixed = result(vec![
            EditOp::Insert { pred: 'a' },
            EditOp::Delete { gt: 'b' },
            EditOp::Delete { gt: 'c' },
            EditOp::Substitute { gt: 'd', pred: 'e' },
            EditOp::Delete { gt: 'f' },
        ]);
        assert_eq!(
            confusion_stats(&[mixed], ConfusionMode::MergeRuns),
            vec![
                ConfusionEntry::new("", "a", 1),
                ConfusionEntry::new("bc", "", 1),
                ConfusionEntry::new("d", "e", 1),
                ConfusionEntry::new("f", "", 1),
            ]
        );
    }

    #[test]
    fn ranking_ties_are_lexicographic() {
        let mut entries = vec![
            ConfusionEntry::new("b", "a", 2),
            ConfusionEntry::new("a", "c", 2),
            ConfusionEntry::new("a", "b", 2),
            ConfusionEntry::new("z", "", 5),
        ];
        rank(&mut entries);
        let order: Vec<_> = entries.iter().map(|e| (e.gt_seq.as_str(), e.pred_seq.as_str())).collect();
        assert_eq!(order, vec![("z", ""), ("a", "b"), ("a", "c"), ("b", "a")]);
    }

    #[test]
    fn top_share() {
        let mut counts = vec![5, 3, 2];
        counts.extend([1; 10]);
        let confusion: Vec<_> = counts
            .iter()
            .enumerate()
            .map(|(i, c)| ConfusionEntry::new(format!("{i:02}"), "", *c))
            .collect();
        assert_eq!(top_k_error_mass(&confusion, k(3)), ErrorShare { top: 10, total: 20 });
        assert_eq!(top_k_error_share(&confusion, k(3)), 0.5);
        assert_eq!(top_k_error_share(&[], k(3)), 0.0);
        assert_eq!(top_k_error_share(&confusion[..0], k(1)), 0.0);
        assert_eq!(top_k_error_share(&[ConfusionEntry::new("a", "", 7)], k(3)), 1.0);
    }

    #[test]
    fn whitespace_buckets() {
        let confusion = [
            ConfusionEntry::new("", " ", 4),
            ConfusionEntry::new(" ", "", 2),
            ConfusionEntry::new("a", "o", 1),
        ];
        assert_eq!(
            classify_whitespace_errors(&confusion),
            WhitespaceSummary {
                space_insertions: 4,
                space_deletions: 2,
                other: 1
            }
        );
        assert_eq!(classify_whitespace_errors(&[]), WhitespaceSummary::default());
        assert_eq!(
            classify_whitespace_errors(&[ConfusionEntry::new(" ", "-", 5)]).other,
            5
        );
        // merged whitespace runs still count as pure whitespace errors
        assert_eq!(
            classify_whitespace_errors(&[ConfusionEntry::new("  ", "", 1)]).space_deletions,
            1
        );
        assert_eq!(classify_whitespace_errors(&[ConfusionEntry::new(" a", "", 1)]).other, 1);
    }
}
