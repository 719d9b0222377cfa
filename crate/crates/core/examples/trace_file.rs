//! Writes traces to the binary container, streams them back, and persists a
//! clipping-threshold file.

use eigenscore::{calibrate, read_clip_state, read_traces, synth_traces, write_clip_state, write_traces, SynthSpec};

fn main() -> eigenscore::Result<()> {
    let dir = std::env::temp_dir().join(format!("eigenscore-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| eigenscore::Error::Io { path: dir.clone(), source: e })?;
    let path = dir.join("synthetic.trace");

    let spec = SynthSpec {
        k: 4,
        d: 32,
        traces_per_class: 5,
        ..SynthSpec::default()
    };
    let traces = synth_traces(&spec)?;
    write_traces(&path, &traces)?;

    let reader = read_traces(&path)?;
    let m = reader.manifest();
    println!("{} records, layers {:?}, dtype {}", m.records.len(), m.layers, m.dtype);
    for (i, entry) in m.records.iter().take(3).enumerate() {
        println!("  #{i} {} at byte {} ({} bytes)", entry.id, entry.offset, entry.length);
    }
    let mut n = 0;
    for (read, original) in reader.zip(&traces) {
        assert_eq!(&read?, original);
        n += 1;
    }
    println!("streamed {n} records, all identical to the originals");

    let state = calibrate(read_traces(&path)?, spec.num_layers / 2, 0.2, 3000)?;
    let clip_path = dir.join("thresholds.clip");
    write_clip_state(&clip_path, &state)?;
    assert_eq!(read_clip_state(&clip_path)?, state);
    println!("thresholds for layer {:?}: h_min[0..3] = {:?}", state.layer, &state.h_min[..3]);

    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
