//! Test-time feature clipping on traces with heavy-tailed neurons: compares
//! EigenScore AUROC with clipping off and with thresholds from the current
//! trace (C), an offline calibration set (P) and the streaming memory bank (MB).

use eigenscore::clipping::{clip_features, thresholds_from_samples, ClipSource};
use eigenscore::{auroc, calibrate, synth_traces, ClipMode, Metric, Scorer, ScoringConfig, SynthSpec, TokenMatrix};

fn main() -> eigenscore::Result<()> {
    // percentile bounds on a toy sample: the outlier in column 1 is pulled in
    let samples = TokenMatrix::from_rows(&[[0.0f32, 1.0], [1.0, 2.0], [2.0, 3.0], [3.0, 400.0]])?;
    let state = thresholds_from_samples(&samples, 10.0, ClipSource::Current)?;
    println!("h_min = {:?}\nh_max = {:?}", state.h_min, state.h_max);
    println!("clip([5, 500]) = {:?}\n", clip_features(&[5.0, 500.0], &state)?);

    let spec = SynthSpec {
        extreme_feature_rate: 0.01,
        traces_per_class: 200,
        seed: 3,
        ..SynthSpec::default()
    };
    let traces = synth_traces(&spec)?;
    let labels: Vec<bool> = traces.iter().map(|t| t.label == Some(true)).collect();
    println!("extreme neurons: {:?}", spec.extreme_neurons());

    let layer = spec.num_layers / 2;
    let calibration = synth_traces(&SynthSpec { seed: 1000, ..spec.clone() })?;
    let offline = calibrate(calibration.into_iter().map(Ok), layer, 0.2, 3000)?;

    for (name, clip) in [
        ("off", ClipMode::Off),
        ("C", ClipMode::Current),
        ("P", ClipMode::Precomputed(offline)),
        ("MB", ClipMode::MemoryBank { capacity: 3000 }),
    ] {
        let mut scorer = Scorer::new(ScoringConfig {
            metrics: vec![Metric::EigenScore],
            clip,
            ..ScoringConfig::default()
        })?;
        let scores: Vec<f64> = scorer
            .score_batch(&traces)?
            .iter()
            .map(|r| r.eigenscore.expect("requested"))
            .collect();
        println!("{name:<4} AUROC = {:.4}", auroc(&scores, &labels)?);
    }
    Ok(())
}
