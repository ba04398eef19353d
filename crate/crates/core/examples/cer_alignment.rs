// Align predictions to ground truth, print the edit scripts and the
// micro and macro CER of a small corpus.

use fraktur_bench::alignment::{align, corpus_cer, pair_lines};
use fraktur_bench::line::{LineKey, TranscriptionLine};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let r = align("Straße", "Stra ſse");
    println!("distance {} cer {:.4} script {}", r.distance, r.cer(), r.script);

    let texts = [
        ("Jch ſage es dir", "Jch fage es dir"),
        ("Straße", "Straße"),
        ("ja", "ia."),
    ];
    let key = |i: usize| LineKey::new("demo", "N-1", format!("{i:02}"));
    let gt: Vec<_> = texts
        .iter()
        .enumerate()
        .map(|(i, (g, _))| TranscriptionLine::ground_truth(key(i), g))
        .collect();
    let pred: Vec<_> = texts
        .iter()
        .enumerate()
        .map(|(i, (_, p))| TranscriptionLine::prediction(key(i), "ocr", p))
        .collect();

    let cer = corpus_cer(&pair_lines(&gt, &pred)?)?;
    for line in &cer.per_line {
        println!("{}: {} ({:.2}%)", line.key, line.alignment.script, line.alignment.cer() * 100.0);
    }
    println!(
        "micro {:.2}% ({} / {}), macro {:.2}%",
        cer.micro_cer * 100.0,
        cer.total_distance,
        cer.total_gt_chars,
        cer.macro_cer * 100.0
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
