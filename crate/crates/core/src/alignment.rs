//! Unit-cost edit distance, optimal alignments and character error rates.
//!
//! CER is always `distance / gt_len`. A line with empty ground truth has
//! CER `pred_len` (its errors are charged against a virtual length of one);
//! such lines still add their distance to micro sums but are left out of
//! macro averages.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::line::{LineKey, TranscriptionLine};

/// One step of an alignment from ground truth to prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    Match { ch: char },
    Substitute { gt: char, pred: char },
    Insert { pred: char },
    Delete { gt: char },
}

impl EditOp {
    pub fn is_match(&self) -> bool {
        matches!(self, EditOp::Match { .. })
    }

    pub fn gt_char(&self) -> Option<char> {
        match *self {
            EditOp::Match { ch } => Some(ch),
            EditOp::Substitute { gt, .. } | EditOp::Delete { gt } => Some(gt),
            EditOp::Insert { .. } => None,
        }
    }

    pub fn pred_char(&self) -> Option<char> {
        match *self {
            EditOp::Match { ch } => Some(ch),
            EditOp::Substitute { pred, .. } | EditOp::Insert { pred } => Some(pred),
            EditOp::Delete { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EditScript(pub Vec<EditOp>);

impl EditScript {
    pub fn ops(&self) -> &[EditOp] {
        &self.0
    }

    pub fn distance(&self) -> usize {
        self.0.iter().filter(|op| !op.is_match()).count()
    }

    /// Replays the ground-truth side.
    pub fn gt_text(&self) -> String {
        self.0.iter().filter_map(EditOp::gt_char).collect()
    }

    /// Replays the prediction side.
    pub fn pred_text(&self) -> String {
        self.0.iter().filter_map(EditOp::pred_char).collect()
    }
}

impl fmt::Display for EditScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.0 {
            match op {
                EditOp::Match { ch } => write!(f, "={ch}")?,
                EditOp::Substitute { gt, pred } => write!(f, "~{gt}{pred}")?,
                EditOp::Insert { pred } => write!(f, "+{pred}")?,
                EditOp::Delete { gt } => write!(f, "-{gt}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub script: EditScript,
    pub distance: usize,
    pub gt_len: usize,
    pub pred_len: usize,
}

impl AlignmentResult {
    pub fn cer(&self) -> f64 {
        cer(self.distance, self.gt_len)
    }
}

/// `distance / gt_len`, or `distance` when the ground truth is empty.
pub fn cer(distance: usize, gt_len: usize) -> f64 {
    distance as f64 / gt_len.max(1) as f64
}

/// Minimal number of unit-cost insertions, deletions and substitutions
/// turning `gt` into `pred`.
pub fn levenshtein(gt: &str, pred: &str) -> usize {
    let a: Vec<char> = gt.chars().collect();
    let b: Vec<char> = pred.chars().collect();
    levenshtein_chars(&a, &b)
}

pub fn levenshtein_chars<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j + 1] + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

/// Cost-optimal alignment with deterministic traceback: walking back from
/// the end, a diagonal step (match or substitution) is preferred over a
/// deletion, and a deletion over an insertion.
pub fn align(gt: &str, pred: &str) -> AlignmentResult {
    let a: Vec<char> = gt.chars().collect();
    let b: Vec<char> = pred.chars().collect();
    align_chars(&a, &b)
}

pub fn align_chars(a: &[char], b: &[char]) -> AlignmentResult {
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let mut dp = vec![0usize; (n + 1) * width];
    for (j, cell) in dp[..width].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        dp[i * width] = i;
        for j in 1..=m {
            let sub = dp[(i - 1) * width + j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let del = dp[(i - 1) * width + j] + 1;
            let ins = dp[i * width + j - 1] + 1;
            dp[i * width + j] = sub.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * width + j];
        if i > 0 && j > 0 {
            let same = a[i - 1] == b[j - 1];
            if dp[(i - 1) * width + j - 1] + usize::from(!same) == here {
                ops.push(if same {
                    EditOp::Match { ch: a[i - 1] }
                } else {
                    EditOp::Substitute {
                        gt: a[i - 1],
                        pred: b[j - 1],
                    }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp::Delete { gt: a[i - 1] });
            i -= 1;
        } else {
            ops.push(EditOp::Insert { pred: b[j - 1] });
            j -= 1;
        }
    }
    ops.reverse();

    AlignmentResult {
        distance: dp[n * width + m],
        script: EditScript(ops),
        gt_len: n,
        pred_len: m,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineResult {
    pub key: LineKey,
    pub alignment: AlignmentResult,
}

/// Per-line alignments plus micro and macro aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusCer {
    pub per_line: Vec<LineResult>,
    pub total_distance: u64,
    pub total_gt_chars: u64,
    pub micro_cer: f64,
    pub macro_cer: f64,
    /// Lines with non-empty ground truth (the macro population).
    pub macro_lines: u64,
}

impl CorpusCer {
    pub fn lines(&self) -> usize {
        self.per_line.len()
    }

    pub fn alignments(&self) -> impl Iterator<Item = &AlignmentResult> {
        self.per_line.iter().map(|l| &l.alignment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("empty evaluation set")]
    Empty,
    #[error("unmatched lines: {}", list_keys(.orphans))]
    Orphans { orphans: Vec<Orphan> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Orphan {
    pub key: LineKey,
    /// `"ground_truth"` or the engine id of the unmatched prediction.
    pub side: String,
}

fn list_keys(orphans: &[Orphan]) -> String {
    orphans
        .iter()
        .map(|o| format!("{} ({})", o.key, o.side))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Aligns every `(ground truth, prediction)` pair. Pairs whose keys differ
/// are reported as orphans on both sides.
pub fn corpus_cer(
    pairs: &[(TranscriptionLine, TranscriptionLine)],
) -> Result<CorpusCer, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let orphans: Vec<Orphan> = pairs
        .iter()
        .filter(|(gt, pred)| gt.key != pred.key)
        .flat_map(|(gt, pred)| {
            [
                Orphan {
                    key: gt.key.clone(),
                    side: "ground_truth".into(),
                },
                Orphan {
                    key: pred.key.clone(),
                    side: pred.engine_id().unwrap_or("prediction").into(),
                },
            ]
        })
        .collect();
    if !orphans.is_empty() {
        return Err(EvalError::Orphans { orphans });
    }

    let per_line: Vec<LineResult> = pairs
        .par_iter()
        .map(|(gt, pred)| LineResult {
            key: gt.key.clone(),
            alignment: align(gt.text(), pred.text()),
        })
        .collect();
    Ok(aggregate(per_line))
}

pub(crate) fn aggregate(per_line: Vec<LineResult>) -> CorpusCer {
    let mut total_distance = 0u64;
    let mut total_gt_chars = 0u64;
    let mut macro_sum = 0.0;
    let mut macro_lines = 0u64;
    for line in &per_line {
        let a = &line.alignment;
        total_distance += a.distance as u64;
        total_gt_chars += a.gt_len as u64;
        if a.gt_len > 0 {
            macro_sum += a.cer();
            macro_lines += 1;
        }
    }
    let micro_cer = total_distance as f64 / total_gt_chars.max(1) as f64;
    let macro_cer = if macro_lines > 0 {
        macro_sum / macro_lines as f64
    } else {
        micro_cer
    };
    CorpusCer {
        per_line,
        total_distance,
        total_gt_chars,
        micro_cer,
        macro_cer,
        macro_lines,
    }
}

/// Pairs ground truth with one engine's predictions by [`LineKey`],
/// preserving ground-truth order. Fails listing every line present on only
/// one side.
pub fn pair_lines(
    gt: &[TranscriptionLine],
    pred: &[TranscriptionLine],
) -> Result<Vec<(TranscriptionLine, TranscriptionLine)>, EvalError> {
    let mut by_key: BTreeMap<&LineKey, &TranscriptionLine> =
        pred.iter().map(|p| (&p.key, p)).collect();
    let mut pairs = Vec::with_capacity(gt.len());
    let mut orphans = Vec::new();
    for g in gt {
        match by_key.remove(&g.key) {
            Some(p) => pairs.push((g.clone(), p.clone())),
            None => orphans.push(Orphan {
                key: g.key.clone(),
                side: "ground_truth".into(),
            }),
        }
    }
    orphans.extend(by_key.into_values().map(|p| Orphan {
        key: p.key.clone(),
        side: p.engine_id().unwrap_or("prediction").into(),
    }));
    if !orphans.is_empty() {
        return Err(EvalError::Orphans { orphans });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(script: &str) -> Vec<EditOp> {
        // compact notation used by Display
        let mut out = Vec::new();
        let mut it = script.chars();
        while let Some(tag) = it.next() {
            out.push(match tag {
                '=' => EditOp::Match { ch: it.next().unwrap() },
                '~' => EditOp::Substitute {
                    gt: it.next().unwrap(),
                    pred: it.next().unwrap(),
                },
                '+' => EditOp::Insert { pred: it.next().unwrap() },
                '-' => EditOp::Delete { gt: it.next().unwrap() },
                _ => unreachable!(),
            });
        }
        out
    }

    #[test]
    fn distances() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("abc", "abd"), 1);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("ſüß", "süß"), 1);
    }

    #[test]
    fn alignment_examples() {
        let r = align("ab", "ab");
        assert_eq!(r.script.ops(), ops("=a=b"));
        assert_eq!((r.distance, r.cer()), (0, 0.0));

        let r = align("ab", "b");
        assert_eq!(r.script.ops(), ops("-a=b"));
        assert_eq!((r.distance, r.cer()), (1, 0.5));

        let r = align("", "x");
        assert_eq!(r.script.ops(), ops("+x"));
        assert_eq!(r.distance, 1);
        assert_eq!(r.cer(), 1.0);

        let r = align("", "xyz");
        assert_eq!(r.cer(), 3.0);
        assert_eq!(align("", "").cer(), 0.0);
    }

    #[test]
    fn traceback_prefers_diagonal_then_delete() {
        // "ab" -> "ba": two substitutions beat delete+insert at equal cost
        assert_eq!(align("ab", "ba").script.ops(), ops("~ab~ba"));
        // delete is taken before insert when both are optimal
        assert_eq!(align("a", "b").script.ops(), ops("~ab"));
        assert_eq!(align("aa", "a").script.ops(), ops("-a=a"));
        assert_eq!(align("a", "aa").script.ops(), ops("+a=a"));
        assert_eq!(align("ein Wort", "einWort").script.to_string(), "=e=i=n- =W=o=r=t");
    }

    #[test]
    fn corpus_aggregates() {
        let key = |i: usize| LineKey::new("c", "b", format!("{i:02}"));
        let pair = |i: usize, gt: &str, pred: &str| {
            (
                TranscriptionLine::ground_truth(key(i), gt),
                TranscriptionLine::prediction(key(i), "e", pred),
            )
        };
        let r = corpus_cer(&[pair(0, "abcdefghij", "abcdefghiX"), pair(1, "abcdefghij", "abcdefghij")]).unwrap();
        assert_eq!((r.total_distance, r.total_gt_chars), (1, 20));
        assert!((r.micro_cer - 0.05).abs() < 1e-12);
        assert!((r.macro_cer - 0.05).abs() < 1e-12);

        let long = "a".repeat(99);
        let r = corpus_cer(&[pair(0, "a", "b"), pair(1, &long, &long)]).unwrap();
        assert!((r.micro_cer - 0.01).abs() < 1e-12);
        assert!((r.macro_cer - 0.5).abs() < 1e-12);

        assert_eq!(corpus_cer(&[]).unwrap_err(), EvalError::Empty);
        assert_eq!(EvalError::Empty.to_string(), "empty evaluation set");
    }

    #[test]
    fn empty_gt_counts_in_micro_not_macro() {
        let key = |i: &str| LineKey::new("c", "b", i);
        let pairs = [
            (
                TranscriptionLine::ground_truth(key("1"), ""),
                TranscriptionLine::prediction(key("1"), "e", "xx"),
            ),
            (
                TranscriptionLine::ground_truth(key("2"), "abcd"),
                TranscriptionLine::prediction(key("2"), "e", "abcd"),
            ),
        ];
        let r = corpus_cer(&pairs).unwrap();
        assert_eq!((r.total_distance, r.total_gt_chars, r.macro_lines), (2, 4, 1));
        assert_eq!(r.micro_cer, 0.5);
        assert_eq!(r.macro_cer, 0.0);
    }

    #[test]
    fn mismatched_pair_is_orphaned() {
        let pairs = [(
            TranscriptionLine::ground_truth(LineKey::new("c", "b", "1"), "a"),
            TranscriptionLine::prediction(LineKey::new("c", "b", "2"), "e", "a"),
        )];
        let EvalError::Orphans { orphans } = corpus_cer(&pairs).unwrap_err() else {
            panic!()
        };
        assert_eq!(orphans.len(), 2);
        assert_eq!(orphans[1].side, "e");
    }

    #[test]
    fn pairing_lists_both_sides() {
        let gt: Vec<_> = ["1", "2"]
            .iter()
            .map(|i| TranscriptionLine::ground_truth(LineKey::new("c", "b", *i), "a"))
            .collect();
        let pred: Vec<_> = ["2", "3"]
            .iter()
            .map(|i| TranscriptionLine::prediction(LineKey::new("c", "b", *i), "tess", "a"))
            .collect();
        let err = pair_lines(&gt, &pred).unwrap_err();
        assert_eq!(err.to_string(), "unmatched lines: c/b/1 (ground_truth), c/b/3 (tess)");
        let ok = pair_lines(&gt[1..], &pred[..1]).unwrap();
        assert_eq!(ok.len(), 1);
    }
}
