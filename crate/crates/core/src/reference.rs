//! Published inventory of the 19th century Fraktur training and evaluation
//! corpora, usable as expectations for [`crate::manifest::verify_counts`]
//! and as blueprints for synthetic fixtures.

use crate::manifest::{ExpectedCount, StageName};

/// Evaluation corpora: `(corpus_id, books, lines)`.
pub fn evaluation_corpora() -> Vec<ExpectedCount> {
    vec![
        ExpectedCount::new("Novels", 13, 3_483),
        ExpectedCount::new("OCR-TS", 2, 465),
        ExpectedCount::new("Daheim", 4, 583),
        ExpectedCount::new("Sanders", 1, 630),
    ]
}

/// The twenty evaluation sets: `(dataset id, short title, lines)`, in
/// report order.
pub const EVALUATION_SETS: [(&str, &str, usize); 20] = [
    ("N-1781", "Eleonore", 305),
    ("N-1803", "Liebe-Hütten", 184),
    ("N-1810", "Der Held des Nordens", 264),
    ("N-1818", "Reinhold", 253),
    ("N-1826", "Frauenwürde", 268),
    ("N-1836", "Die Ruinen im Schwarzwalde", 318),
    ("N-1848", "Levin", 269),
    ("N-1851", "Georg Volker", 264),
    ("N-1859", "Der beseelte Schatten", 260),
    ("N-1865", "Gefahrvolle Wege", 333),
    ("N-1869", "Der Arzt der Seele", 250),
    ("N-1870", "Die Bank des Verderbens", 273),
    ("N-1873", "Natürliche Magie", 242),
    ("O-1809", "Wahlverwandtschaften", 223),
    ("O-1841", "Grenzboten", 242),
    ("D-1865", "Daheim volume 1865", 134),
    ("D-1875", "Daheim volume 1875", 144),
    ("D-1882", "Daheim volume 1882", 142),
    ("D-1892", "Daheim volume 1892", 163),
    ("S-1865", "Sanders Dictionary", 630),
];

/// One row of the mixed-model training inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingCorpus {
    pub corpus_id: &'static str,
    pub century: &'static str,
    /// `None` where the inventory gives no book count (UW3, synthetic fonts).
    pub books: Option<usize>,
    pub lines: usize,
    pub language: &'static str,
    pub stage: StageName,
}

const fn row(
    corpus_id: &'static str,
    century: &'static str,
    books: Option<usize>,
    lines: usize,
    language: &'static str,
    stage: StageName,
) -> TrainingCorpus {
    TrainingCorpus {
        corpus_id,
        century,
        books,
        lines,
        language,
        stage,
    }
}

pub const TRAINING_CORPORA: [TrainingCorpus; 12] = [
    row("ENHG", "15", Some(9), 24_766, "ger", StageName::Pretraining),
    row("Kallimachos", "15,16", Some(9), 20_929, "ger, lat", StageName::Pretraining),
    row("EML", "15-17", Some(12), 10_288, "lat", StageName::Pretraining),
    row("RIDGES", "15-19", Some(20), 13_248, "ger", StageName::Pretraining),
    row("UW3", "20", None, 96_481, "eng", StageName::Pretraining),
    // 66 fonts rather than books
    row("Synth.", "-", None, 99_214, "ger", StageName::Synthetic),
    row("DTA19", "19", Some(39), 243_942, "ger", StageName::Real),
    row("Archiscribe", "19", Some(103), 3_430, "ger", StageName::Real),
    row("JZE", "19", Some(8), 1_636, "ger", StageName::Real),
    row("DTA19", "19", Some(39), 1_950, "ger", StageName::Refinement),
    row("Archiscribe", "19", Some(103), 3_429, "ger", StageName::Refinement),
    row("JZE", "19", Some(8), 355, "ger", StageName::Refinement),
];

/// Per-book refinement cap used for the final training stage.
pub const REFINEMENT_CAP: usize = 50;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_sets_sum_to_corpora() {
        let sum = |prefix: &str| -> (usize, usize) {
            let sets: Vec<_> = EVALUATION_SETS.iter().filter(|s| s.0.starts_with(prefix)).collect();
            (sets.len(), sets.iter().map(|s| s.2).sum())
        };
        let corpora = evaluation_corpora();
        for (prefix, expected) in ["N-", "O-", "D-", "S-"].iter().zip(&corpora) {
            assert_eq!(sum(prefix), (expected.books, expected.lines), "{prefix}");
        }
    }

    #[test]
    fn refinement_rows_respect_cap() {
        for r in TRAINING_CORPORA.iter().filter(|r| r.stage == StageName::Refinement) {
            assert!(r.lines <= r.books.unwrap() * REFINEMENT_CAP, "{}", r.corpus_id);
        }
    }
}
