macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(normalize_transcriptions, "normalize_transcriptions.rs");
example!(cer_alignment, "cer_alignment.rs");
example!(error_analysis, "error_analysis.rs");
example!(voting_ensemble, "voting_ensemble.rs");
example!(refinement_schedule, "refinement_schedule.rs");
example!(table_report, "table_report.rs");
example!(corpus_manifest, "corpus_manifest.rs");

#[test]
fn examples_run() {
    normalize_transcriptions::run_example().expect("normalize example");
    cer_alignment::run_example().expect("alignment example");
    error_analysis::run_example().expect("error analysis example");
    voting_ensemble::run_example().expect("voting example");
    refinement_schedule::run_example().expect("refinement example");
    table_report::run_example().expect("report example");
    corpus_manifest::run_example().expect("manifest example");
}
