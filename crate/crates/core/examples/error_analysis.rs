// Rank the most frequent confusions and split the error mass into
// whitespace and other errors.

use std::num::NonZeroUsize;

use fraktur_bench::alignment::align;
use fraktur_bench::analytics::{
    classify_whitespace_errors, confusion_stats, top_k_error_mass, ConfusionMode,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let pairs = [
        ("ein Haus", "einHaus"),
        ("der Mann", "derMann"),
        ("Leben", "Lcbcn"),
        ("und so", "undso"),
        ("ja", "j a"),
        ("zu Hauſe", "zu Ha"),
    ];
    let results: Vec<_> = pairs.iter().map(|(g, p)| align(g, p)).collect();

    for mode in [ConfusionMode::SingleOp, ConfusionMode::MergeRuns] {
        let confusion = confusion_stats(&results, mode);
        println!("{mode:?}:");
        for e in &confusion {
            println!("  {:?} -> {:?}: {}", e.gt_seq, e.pred_seq, e.count);
        }
        let top = top_k_error_mass(&confusion, NonZeroUsize::new(2).unwrap());
        println!("  top-2 share {}/{} = {:.1}%", top.top, top.total, top.fraction() * 100.0);
        println!("  {:?}", classify_whitespace_errors(&confusion));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
