// Evaluate two engines over a small line-pair tree and print the Markdown
// table with per-corpus, NOD and overall rows.

use std::path::Path;

use fraktur_bench::pipeline::{eval_pipeline, EvalRequest};
use fraktur_bench::report::{emit_report, Format};

fn write(root: &Path, rel: &str, text: &str) -> std::io::Result<()> {
    let path = root.join(rel);
    std::fs::create_dir_all(path.parent().unwrap())?;
    std::fs::write(path, text)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let lines = [
        ("Jch ſage es dir", "Ich ſage es dlr", "Jch fage es dir"),
        ("„Ja“ ſprach er", "\"Ja\" ſprach er", "\"Ja\" sprach er"),
        ("Straße und Haus", "Straße und Haus", "Strasse und Hans"),
    ];
    let datasets = ["N-1781", "N-1803", "O-1809", "O-1841", "D-1865", "D-1875", "S-1865"];
    for (d, dataset) in datasets.iter().enumerate() {
        for (l, (gt, a, b)) in lines.iter().enumerate() {
            write(dir.path(), &format!("{dataset}/{l}.gt.txt"), gt)?;
            write(dir.path(), &format!("{dataset}/{l}.pred.calamari.txt"), if d % 2 == 0 { gt } else { a })?;
            write(dir.path(), &format!("{dataset}/{l}.pred.abbyy.txt"), b)?;
        }
    }

    let mut req = EvalRequest::new(dir.path(), vec!["calamari".into(), "abbyy".into()]);
    req.datasets = Some(datasets.iter().map(|s| s.to_string()).collect());
    let report = eval_pipeline(&req)?;
    print!("{}", String::from_utf8(emit_report(&report, Format::Markdown)?)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
