//! The evaluation toolkit on hand-made data: correctness labelling under the
//! three measures, then AUROC, PCC and the G-Mean threshold.

use eigenscore::eval::{evaluate_metric, label_text, render_table, Correctness};
use eigenscore::{auroc, gmean_threshold, pearson, CorrectnessMeasure, Orientation};

fn main() -> eigenscore::Result<()> {
    let truths = vec!["Great Britain".to_string(), "the United Kingdom".to_string()];
    for answer in ["great britain", "The United Kingdom.", "England"] {
        let r = label_text(answer, &truths, &CorrectnessMeasure::rouge_l(0.5), None)?;
        let em = label_text(answer, &truths, &CorrectnessMeasure::exact_match(), None)?;
        println!("{answer:<22} rouge-L {:.3} correct={:<5}  exact={}", r.score, r.correct, em.correct);
    }
    println!();

    let scores = [0.9, 0.8, 0.75, 0.4, 0.3, 0.35, 0.1, 0.6];
    let hallucinated = [true, true, false, false, false, true, false, true];
    println!("AUROC  {:.4}", auroc(&scores, &hallucinated)?);
    let g = gmean_threshold(&scores, &hallucinated)?;
    println!("G-Mean {:.4} at threshold {:.3}", g.gmean, g.threshold);
    let correctness_score = [0.1, 0.0, 0.9, 1.0, 0.8, 0.2, 1.0, 0.3];
    let error: Vec<f64> = correctness_score.iter().map(|c| -c).collect();
    println!("PCC    {:.4}\n", pearson(&scores, &error)?);

    let correctness: Vec<Correctness> = hallucinated
        .iter()
        .zip(correctness_score)
        .map(|(&h, score)| Correctness { correct: !h, score })
        .collect();
    let report = evaluate_metric("toy", &scores, &correctness, Orientation::HigherIsHallucination)?;
    print!("{}", render_table(&CorrectnessMeasure::rouge_l(0.5), &[report]));
    Ok(())
}
