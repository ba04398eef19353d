//! Independent reference implementations and generators shared by the
//! property and acceptance tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Edit distance by the textbook recursion over suffixes, memoized so that
/// length-12 inputs finish quickly. Shares no code with the library.
pub fn levenshtein_oracle(a: &[char], b: &[char]) -> usize {
    fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_string(rng: &mut ChaCha8Rng, alphabet: &[char], max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

/// Pieces that exercise every rule family plus characters no rule maps.
pub const FUZZ_PIECES: &[&str] = &[
    "a", "e", "n", "s", "t", "r", "J", "I", "ſ", "ß", "ä", "ü", " ", ".", ",", "-",
    "ﬀ", "ﬁ", "ﬂ", "ﬃ", "ﬄ", "ﬅ", "ﬆ", "ꜩ", "æ", "œ", "ĳ", "ꝛ", "aͤ", "oͤ", "Uͤ", "â", "Û",
    "„", "“", "”", "»", "«", "‚", "‘", "’", "‐", "‑", "–", "\u{2014}", "⸗", "\u{AD}", "\u{A0}",
    "a\u{308}", "ø", "ç", "\u{301}",
];

pub fn fuzz_string(rng: &mut ChaCha8Rng, max_pieces: usize) -> String {
    let n = rng.random_range(0..=max_pieces);
    (0..n).map(|_| FUZZ_PIECES[rng.random_range(0..FUZZ_PIECES.len())]).collect()
}

/// Corrupts `text` with per-character probability `rate`, choosing
/// substitution, deletion or insertion uniformly.
pub fn corrupt(rng: &mut ChaCha8Rng, text: &str, rate: f64, alphabet: &[char]) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        if !rng.random_bool(rate) {
            out.push(ch);
            continue;
        }
        let pick = |rng: &mut ChaCha8Rng| alphabet[rng.random_range(0..alphabet.len())];
        match rng.random_range(0..3) {
            0 => {
                let mut sub = pick(rng);
                while sub == ch {
                    sub = pick(rng);
                }
                out.push(sub);
            }
            1 => {}
            _ => {
                out.push(ch);
                out.push(pick(rng));
            }
        }
    }
    out
}

/// Reads `input<TAB>expected<TAB>note` rows, skipping `#` comments.
pub fn rule_vectors() -> Vec<(String, String)> {
    include_str!("../data/rule_vectors.tsv")
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut cols = l.split('\t');
            (cols.next().unwrap().to_string(), cols.next().unwrap().to_string())
        })
        .collect()
}

pub fn write(root: &std::path::Path, rel: &str, text: &str) {
    let path = root.join(rel);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}
