//! ROUGE-L and the lexical-similarity baseline on answer sets from the case
//! studies.

use eigenscore::baseline::lexical_similarity_texts;
use eigenscore::rouge_l;

fn main() -> eigenscore::Result<()> {
    let r = rouge_l("the cat sat on the mat", "a cat was sitting on the mat");
    println!("ROUGE-L  P {:.3}  R {:.3}  F {:.3}\n", r.precision, r.recall, r.f_measure);

    let mut substitute = vec!["a substitute"; 3];
    substitute.extend(["substitute"; 7]);
    let britain = [
        "britain", "england", "great britain", "great britain", "england",
        "england", "england", "england", "great britain", "great britain",
    ];
    let identical = ["Paris"; 10];
    for (name, answers) in [
        ("near-identical", substitute.as_slice()),
        ("three variants", britain.as_slice()),
        ("identical", identical.as_slice()),
    ] {
        println!("{name:<15} lexical similarity = {:.4}", lexical_similarity_texts(answers.iter().copied())?);
    }
    Ok(())
}
