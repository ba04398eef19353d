// Build a four-stage training schedule whose last stage keeps a seeded
// sample of at most 50 lines per book, then check the counts.

use std::num::NonZeroUsize;

use fraktur_bench::manifest::{
    build_schedule, verify_counts, BookEntry, ExpectedCount, StageName, TrainingSchedule, TrainingStage,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let book = |corpus: &str, id: String, n: usize| {
        BookEntry::with_line_ids(corpus, &id, (0..n).map(|i| format!("{i:05}")))
    };
    let mut books: Vec<BookEntry> = (0..39).map(|b| book("DTA19", format!("dta{b:02}"), 60 + 37 * b)).collect();
    books.extend([12, 80, 45].iter().enumerate().map(|(b, &n)| book("JZE", format!("jze{b}"), n)));
    books.push(book("Synth", "fonts".into(), 500));

    let cap = NonZeroUsize::new(50).unwrap();
    let schedule = TrainingSchedule::new(
        vec![
            TrainingStage::new(StageName::Pretraining, Vec::<String>::new()),
            TrainingStage::new(StageName::Synthetic, ["Synth"]),
            TrainingStage::new(StageName::Real, ["DTA19", "JZE"]),
            TrainingStage::refinement(["DTA19", "JZE"], cap),
        ],
        42,
    )?;
    let output = build_schedule(&books, &schedule)?;
    for stage in &output.stages {
        let counts: Vec<String> = stage
            .per_corpus
            .iter()
            .map(|c| format!("{} {} books/{} lines", c.corpus_id, c.books, c.lines))
            .collect();
        println!("{:<12} {:>6} lines  {}", stage.name.to_string(), stage.total_lines(), counts.join(", "));
    }

    let expected = [ExpectedCount::new("DTA19", 39, 1_950), ExpectedCount::new("JZE", 3, 107)];
    let refined: Vec<BookEntry> = fraktur_bench::manifest::refine_books(&books, cap, 42);
    let discrepancies = verify_counts(&refined, &expected);
    println!("refinement counts: {}", if discrepancies.is_empty() { "as expected".to_string() } else { format!("{discrepancies:?}") });

    // stages must come in the fixed order
    let err = TrainingSchedule::new(vec![TrainingStage::new(StageName::Real, ["JZE"])], 0).unwrap_err();
    println!("rejected: {err}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
