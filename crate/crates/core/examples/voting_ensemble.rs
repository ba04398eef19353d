// Combine the outputs of several recognizers by character voting, with
// and without confidences.

use fraktur_bench::voting::{vote_line, Pivot, TieBreak, VoterOutput, VotingConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let outputs = [
        VoterOutput::new("fold0", "Der Herr kam zur Buſse"),
        VoterOutput::new("fold1", "Der Hcrr kam zur Buße"),
        VoterOutput::new("fold2", "Der Herr kamzur Buße"),
    ];
    let voted = vote_line(&outputs, &VotingConfig::default())?;
    for o in &outputs {
        println!("{:>6}: {}", o.engine_id, o.text());
    }
    println!("{:>6}: {}", voted.engine_id, voted.text());

    // two voters disagree; confidence breaks the tie
    let tied = [
        VoterOutput::with_confidences("a", "Haus", vec![0.9, 0.9, 0.4, 0.9])?,
        VoterOutput::with_confidences("b", "Hans", vec![0.9, 0.9, 0.8, 0.9])?,
    ];
    for tie_break in [TieBreak::FirstVoter, TieBreak::Confidence] {
        let config = VotingConfig::new(2, tie_break, Pivot::First)?;
        println!("{tie_break:?}: {}", vote_line(&tied, &config)?.text());
    }

    let too_few = VotingConfig::new(3, TieBreak::FirstVoter, Pivot::Longest)?;
    if let Err(e) = vote_line(&tied, &too_few) {
        println!("min 3 voters: {e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
