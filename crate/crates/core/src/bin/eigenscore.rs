//! Command-line front end: `score`, `eval`, `calibrate`, `synth`.
//!
//! Exit status is 0 on success, 2 when the input or flags are invalid and 1
//! on I/O or numerical failure.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eigenscore::clipping::{DEFAULT_BANK_CAPACITY, DEFAULT_PERCENTILE};
use eigenscore::eval::render_table;
use eigenscore::spectral::DEFAULT_ALPHA;
use eigenscore::{
    calibrate, evaluate_records, label_traces, read_clip_state, read_traces, synth_traces, write_clip_state,
    ClipMode, CorrectnessMeasure, EigenConfig, EmbeddingPolicy, Error, LogBase, Metric, PerplexityMode, Result,
    ScoreRecord, Scorer, ScoringConfig, SynthSpec, TraceWriter,
};

#[derive(Parser)]
#[command(name = "eigenscore", version, about = "Score LLM generation traces for hallucination")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every trace; writes one JSON record per line.
    Score(ScoreArgs),
    /// Evaluate score records against correctness labels.
    Eval(EvalArgs),
    /// Compute offline clipping thresholds (the "P" variant).
    Calibrate(CalibrateArgs),
    /// Write a synthetic trace file from a JSON spec.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    #[value(name = "last_mid")]
    LastMid,
    #[value(name = "mean_last")]
    MeanLast,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClipArg {
    #[value(name = "off")]
    Off,
    #[value(name = "C")]
    Current,
    #[value(name = "P")]
    Precomputed,
    #[value(name = "MB")]
    MemoryBank,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    #[value(name = "10")]
    Ten,
    #[value(name = "e")]
    E,
}

#[derive(clap::Args)]
struct ScoreArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Comma-separated: perplexity, ln_entropy, lexical_similarity, energy, eigenscore.
    #[arg(long, default_value = "perplexity,ln_entropy,lexical_similarity,energy,eigenscore")]
    metrics: String,
    #[arg(long, value_enum, default_value = "last_mid")]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value = "off")]
    clip: ClipArg,
    /// Threshold file from `calibrate`; required with `--clip P`.
    #[arg(long)]
    clip_state: Option<PathBuf>,
    /// Clipping percentile p, in percent.
    #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
    p: f64,
    /// Memory-bank capacity for `--clip MB`.
    #[arg(long = "N", default_value_t = DEFAULT_BANK_CAPACITY)]
    bank: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "10")]
    log_base: BaseArg,
    /// Average perplexity over all generations instead of generation 0.
    #[arg(long)]
    perplexity_all: bool,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    traces: PathBuf,
    /// `rouge:θ`, `sim:θ` or `em`; repeat for several tables.
    #[arg(long, required = true)]
    measure: Vec<String>,
    /// Emit JSON reports instead of the text table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CalibrateArgs {
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    layer: usize,
    #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
    p: f64,
    #[arg(long = "N", default_value_t = DEFAULT_BANK_CAPACITY)]
    bank: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn score(a: ScoreArgs) -> Result<()> {
    let clip = match a.clip {
        ClipArg::Off => ClipMode::Off,
        ClipArg::Current => ClipMode::Current,
        ClipArg::MemoryBank => ClipMode::MemoryBank { capacity: a.bank },
        ClipArg::Precomputed => {
            let path = a
                .clip_state
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("--clip P requires --clip-state".into()))?;
            ClipMode::Precomputed(read_clip_state(path)?)
        }
    };
    let config = ScoringConfig {
        metrics: Metric::parse_list(&a.metrics)?,
        policy: match a.policy {
            PolicyArg::LastMid => EmbeddingPolicy::LAST_MID,
            PolicyArg::MeanLast => EmbeddingPolicy::MEAN_LAST,
        },
        clip,
        percentile: a.p,
        eigen: EigenConfig {
            alpha: a.alpha,
            log_base: match a.log_base {
                BaseArg::Ten => LogBase::Ten,
                BaseArg::E => LogBase::E,
            },
            ..EigenConfig::default()
        },
        perplexity_mode: if a.perplexity_all {
            PerplexityMode::AllGenerations
        } else {
            PerplexityMode::Primary
        },
    };
    let mut scorer = Scorer::new(config)?;
    let reader = read_traces(&a.traces)?;
    let out_path = a.out.as_deref();
    let mut out = open_out(out_path)?;
    let write_err = |e: std::io::Error| io_err(out_path.unwrap_or(Path::new("<stdout>")), e);
    scorer.score_stream(reader, 64, |rec| {
        let line = serde_json::to_string(&rec).map_err(|e| Error::Numeric(e.to_string()))?;
        writeln!(out, "{line}").map_err(write_err)
    })?;
    out.flush().map_err(write_err)
}

fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidArgument(format!("{}:{}: bad score record: {e}", path.display(), i + 1))
        })?;
        records.push(rec);
    }
    Ok(records)
}

fn eval(a: EvalArgs) -> Result<()> {
    let measures = a
        .measure
        .iter()
        .map(|m| m.parse::<CorrectnessMeasure>())
        .collect::<Result<Vec<_>>>()?;
    let records = read_scores(&a.scores)?;
    let out_path = a.out.as_deref();
    let mut out = open_out(out_path)?;
    let write_err = |e: std::io::Error| io_err(out_path.unwrap_or(Path::new("<stdout>")), e);

    let mut tables = Vec::new();
    let mut json = Vec::new();
    for measure in &measures {
        let labels = label_traces(read_traces(&a.traces)?, measure)?;
        let reports = evaluate_records(&records, &labels)?;
        if a.json {
            json.push(serde_json::json!({ "measure": measure.label(), "reports": reports }));
        } else {
            tables.push(render_table(measure, &reports));
        }
    }
    if a.json {
        let text = serde_json::to_string_pretty(&json).map_err(|e| Error::Numeric(e.to_string()))?;
        writeln!(out, "{text}").map_err(write_err)?;
    } else {
        write!(out, "{}", tables.join("\n")).map_err(write_err)?;
    }
    out.flush().map_err(write_err)
}

fn run_calibrate(a: CalibrateArgs) -> Result<()> {
    let state = calibrate(read_traces(&a.traces)?, a.layer, a.p, a.bank)?;
    write_clip_state(&a.out, &state)
}

fn synth(a: SynthArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| io_err(&a.spec, e))?;
    let spec: SynthSpec = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", a.spec.display())))?;
    let traces = synth_traces(&spec)?;
    let mut writer = TraceWriter::create(&a.out)?;
    for t in &traces {
        writer.write(t)?;
    }
    writer.finish()
}
