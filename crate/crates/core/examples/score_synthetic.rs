//! Scores synthetic confident/hallucinating traces with every metric and
//! evaluates each detector against the ROUGE-L correctness label.

use eigenscore::eval::render_table;
use eigenscore::{evaluate_records, label_traces, CorrectnessMeasure, Scorer, ScoringConfig, SynthSpec};

fn main() -> eigenscore::Result<()> {
    let spec = SynthSpec {
        k: 10,
        d: 64,
        traces_per_class: 100,
        seed: 42,
        ..SynthSpec::default()
    };
    let traces = eigenscore::synth_traces(&spec)?;

    let mut scorer = Scorer::new(ScoringConfig::default())?;
    let records = scorer.score_batch(&traces)?;
    for r in records.iter().take(3) {
        println!("{}", serde_json::to_string(r).expect("serializable"));
    }
    println!();

    let measure = CorrectnessMeasure::rouge_l(0.5);
    let labels = label_traces(traces.into_iter().map(Ok), &measure)?;
    let reports = evaluate_records(&records, &labels)?;
    print!("{}", render_table(&measure, &reports));
    Ok(())
}
