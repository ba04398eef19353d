// Normalize raw transcriptions with the shipped Fraktur rules and codec,
// and show how characters outside the codec are reported.

use fraktur_bench::line::{LineKey, TranscriptionLine};
use fraktur_bench::normalize::{codec_coverage_report, Normalizer, UnmappedPolicy};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let normalizer = Normalizer::default_fraktur();
    println!(
        "codec {} ({} characters), rules {}",
        normalizer.codec().name(),
        normalizer.codec().len(),
        &normalizer.rules().checksum()[..12]
    );

    let raw = ["Ich ſage „Ja“", "Der Herꝛ kam zur Buﬆe", "hoͤren und ſehen", "Smørrebrød"];
    let mut normalized = Vec::new();
    for (i, text) in raw.iter().enumerate() {
        let line = TranscriptionLine::ground_truth(LineKey::new("demo", "book", format!("{i:02}")), text);
        match normalizer.normalize(&line) {
            Ok(out) => {
                println!("{text:<24} -> {}", out.text());
                normalized.push(out);
            }
            Err(e) => {
                println!("{text:<24} !! {e}");
                let dropped = normalizer.normalize_with_policy(&line, UnmappedPolicy::Drop)?;
                println!("{:<24} -> {} (with --on-unmapped drop)", "", dropped.text());
            }
        }
    }

    let coverage = codec_coverage_report(&normalized, normalizer.codec());
    println!("{} characters in codec, {} outside", coverage.in_codec.len(), coverage.out_of_codec.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
