//! Reproduces the EigenScores of several case studies from their printed
//! eigenvalue spectra (alpha = 1e-3 already added, base-10 logarithm).

use eigenscore::{score_from_spectrum, LogBase};

fn padded(head: &[f64], k: usize) -> Vec<f64> {
    let mut s = head.to_vec();
    s.resize(k, 1e-3);
    s
}

fn main() {
    let cases: [(&str, Vec<f64>, f64); 6] = [
        ("identical answers", padded(&[4.877_195_79], 10), -2.63),
        (
            "seven distinct answers",
            padded(&[3.715_616_76, 0.434_496_729, 0.377_751_922, 0.175_326_593, 0.099_259_697_5, 0.042_072_335_3, 0.024_938_576_6], 10),
            -1.40,
        ),
        ("three near-paraphrases", padded(&[4.468_434_02, 0.282_423_429, 0.038_870_219_1], 10), -2.23),
        (
            "mixed answers",
            padded(&[3.328_241_35, 0.587_944_819, 0.370_390_066, 0.170_849_836, 0.117_707_239, 0.005_179_255_63], 10),
            -1.61,
        ),
        (
            "mixed answers (second)",
            padded(&[3.804_081_92, 0.483_987_672, 0.303_207_580, 0.088_036_600_8, 0.065_979_028_6, 0.032_674_284_1], 10),
            -1.59,
        ),
        (
            "all answers differ",
            vec![
                3.319_830_18, 0.398_560_810, 0.217_094_299, 0.206_965_709, 0.153_575_354, 0.127_925_588,
                0.078_236_513_6, 0.032_815_813_7, 0.010_199_508_6, 1e-3,
            ],
            -1.05,
        ),
    ];

    println!("{:<26} {:>9} {:>9}", "case", "computed", "printed");
    for (name, spectrum, printed) in cases {
        let score = score_from_spectrum(&spectrum, LogBase::Ten);
        println!("{name:<26} {score:>9.4} {printed:>9.2}");
        assert!((score - printed).abs() < 0.01);
    }
}
