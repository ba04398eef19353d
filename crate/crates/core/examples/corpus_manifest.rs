// Scan a line-pair tree (ground truth next to line images) into a
// manifest and round-trip it through JSON.

use std::path::Path;

use fraktur_bench::manifest::{scan_corpus, CorpusManifest};

fn touch(root: &Path, rel: &str, text: &str) -> std::io::Result<()> {
    let path = root.join(rel);
    std::fs::create_dir_all(path.parent().unwrap())?;
    std::fs::write(path, text)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    for book in ["1847-Rauch", "1862-Moser"] {
        for line in 1..=3 {
            touch(dir.path(), &format!("{book}/{line:04}.gt.txt"), "Jch ſage es dir")?;
            touch(dir.path(), &format!("{book}/{line:04}.bin.png"), "")?;
        }
    }
    touch(dir.path(), "1862-Moser/0009.gt.txt", "no image for this line")?;

    let outcome = scan_corpus(dir.path(), "Archiscribe")?;
    for warning in &outcome.warnings {
        println!("warning: {warning}");
    }
    let manifest = CorpusManifest::new(outcome.books);
    let json = manifest.to_json();
    let back = CorpusManifest::from_json(&json)?;
    assert_eq!(back, manifest);
    for book in &back.books {
        println!("{} / {}: {} lines, first image {}", book.corpus_id, book.book_id, book.len(), book.lines[0].image);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
