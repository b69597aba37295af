use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gazetok::dataset::{load_dataset, synth_dataset, Manifest, ManifestEntry, Recording, SynthConfig};
use gazetok::io::{self, Codebook, CsvSchema};
use gazetok::pipeline::{self, DataSource, PipelineConfig};
use gazetok::report::rows_to_csv;
use gazetok::sequence::derive_velocity;
use gazetok::{bpe, fit, AxisMode, DistributionKind, Error, FitOptions, GazeSequence, Scheme, Tokenizer};

#[derive(Parser)]
#[command(name = "gazetok", version, about = "Tokenize, compress and evaluate 2-D gaze recordings")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a tokenizer and write its codebook file.
    Fit(FitArgs),
    /// Encode recordings into a GZTK1 token stream.
    Encode(EncodeArgs),
    /// Decode a token stream back to CSV.
    Decode(DecodeArgs),
    /// Learn BPE merges from a token stream.
    BpeTrain(BpeTrainArgs),
    /// Run the full evaluation and write report.{json,csv,txt}.
    Eval(EvalArgs),
    /// Write plot data for error sweeps.
    Sweep(SweepArgs),
    /// Generate a synthetic dataset of CSV files plus a manifest.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Position,
    Velocity,
}

impl From<Dist> for DistributionKind {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Position => DistributionKind::Position,
            Dist::Velocity => DistributionKind::Velocity,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Pooled,
    PerAxis,
}

impl From<Axis> for AxisMode {
    fn from(a: Axis) -> Self {
        match a {
            Axis::Pooled => AxisMode::Pooled,
            Axis::PerAxis => AxisMode::PerAxis,
        }
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::parse(s).ok_or_else(|| format!("unknown scheme {s:?} (binary, mu-law, quantile, k-means)"))
}

/// Input recordings: a dataset manifest or a single CSV file.
#[derive(Args)]
struct DataArgs {
    /// Dataset manifest (.json) or a single CSV recording.
    #[arg(long)]
    data: PathBuf,
    /// Sample rate in Hz for CSV files without a time column.
    #[arg(long)]
    sample_rate: Option<f64>,
    /// The CSV columns hold velocities instead of positions.
    #[arg(long)]
    velocity_input: bool,
    /// Velocities in CSV files are degrees per second rather than degrees
    /// per sample; applies to velocity input and velocity output.
    #[arg(long)]
    deg_per_second: bool,
}

impl DataArgs {
    fn load(&self, kind: DistributionKind) -> Result<Vec<Recording>> {
        let mut recs = if self.data.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            vec![io::load_csv(&self.data, &CsvSchema::default(), self.sample_rate)?.recording]
        } else {
            load_dataset(&self.data)?.recordings
        };
        for r in &mut recs {
            r.seq = if self.velocity_input {
                if kind == DistributionKind::Position {
                    bail!("velocity input cannot be tokenized as positions");
                }
                let v = GazeSequence::velocities(r.seq.samples().to_vec(), r.seq.sample_rate_hz())?;
                if self.deg_per_second { v.scaled(1.0 / v.sample_rate_hz())? } else { v }
            } else {
                match kind {
                    DistributionKind::Position => r.seq.clone(),
                    DistributionKind::Velocity => derive_velocity(&r.seq)?,
                }
            };
        }
        Ok(recs)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    #[arg(long, value_enum, default_value = "position")]
    distribution: Dist,
    #[arg(long, value_enum, default_value = "pooled")]
    axis_mode: Axis,
    #[arg(long, default_value_t = gazetok::tokenizer::DEFAULT_VOCAB)]
    vocab: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Codebook file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long, value_enum, default_value = "position")]
    distribution: Dist,
    /// Apply BPE merges from this codebook file.
    #[arg(long)]
    bpe: Option<PathBuf>,
    /// Stream file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    stream: PathBuf,
    /// Undo BPE merges from this codebook file first.
    #[arg(long)]
    bpe: Option<PathBuf>,
    /// Write velocities in degrees per second.
    #[arg(long)]
    deg_per_second: bool,
    /// Output CSV for a single-sequence stream, otherwise a directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BpeTrainArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long, default_value_t = bpe::DEFAULT_MAX_MERGES)]
    bpe_merges: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON pipeline config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest; defaults to synthetic data.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Tokenizer schemes (comma separated or repeated).
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    scheme: Vec<Scheme>,
    #[arg(long, value_delimiter = ',', value_enum)]
    distribution: Vec<Dist>,
    #[arg(long, value_enum)]
    axis_mode: Option<Axis>,
    #[arg(long)]
    vocab: Option<u32>,
    /// Enable BPE with this merge budget.
    #[arg(long)]
    bpe_merges: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(d) = &self.data {
            cfg.data = DataSource::Manifest { path: d.clone() };
        }
        if !self.scheme.is_empty() {
            cfg.schemes = self.scheme.clone();
        }
        if !self.distribution.is_empty() {
            cfg.distributions = self.distribution.iter().map(|&d| d.into()).collect();
        }
        if let Some(a) = self.axis_mode {
            cfg.axis_mode = a.into();
        }
        if let Some(v) = self.vocab {
            cfg.vocab = v;
        }
        if self.bpe_merges.is_some() {
            cfg.bpe_merges = self.bpe_merges;
        }
        if let Some(f) = self.train_fraction {
            cfg.train_fraction = f;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    /// Reconstruction error against the number of k-means clusters.
    Kmeans,
    /// Accumulative velocity error against sequence length.
    Length,
    /// Ingest a codebook-size sweep produced by the VQ-VAE trainer.
    Codebook,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    kind: SweepKind,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Cluster counts for the k-means sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048])]
    ks: Vec<u32>,
    /// Sequence lengths (velocity samples) for the length sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 10, 50, 100, 200, 400, 800, 1600])]
    lengths: Vec<usize>,
    /// Sweep CSV from the VQ-VAE trainer.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Plot-data CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    recordings: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    n_fixations: usize,
    #[arg(long, default_value_t = 0.02)]
    noise_std: f64,
    /// Fixation drift in degrees per sample, applied to both axes.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    #[arg(long, default_value_t = 100.0)]
    sample_rate: f64,
    /// Output directory for CSV files and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

fn bpe_table(path: &Path) -> Result<bpe::MergeTable> {
    Ok(io::load_codebook(path)?.into_merge_table()?)
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let kind = a.distribution.into();
    let seqs: Vec<GazeSequence> = a.data.load(kind)?.into_iter().map(|r| r.seq).collect();
    let mut opts = FitOptions { vocab: a.vocab, axis_mode: a.axis_mode.into(), ..Default::default() };
    opts.kmeans.seed = a.seed;
    let tok = fit(a.scheme, &seqs, &opts)?;
    io::save_codebook(&Codebook::from(tok), &a.out)?;
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> Result<()> {
    let tok = io::load_codebook(&a.codebook)?.into_tokenizer()?;
    let seqs: Vec<GazeSequence> = a.data.load(a.distribution.into())?.into_iter().map(|r| r.seq).collect();
    let mut ts = tok.encode(&seqs)?;
    if let Some(p) = &a.bpe {
        ts = bpe::encode(&ts, &bpe_table(p)?)?;
    }
    io::save_stream(&ts, &a.out)?;
    Ok(())
}

fn cmd_decode(a: DecodeArgs) -> Result<()> {
    let tok = io::load_codebook(&a.codebook)?.into_tokenizer()?;
    let mut ts = io::load_stream(&a.stream)?;
    if let Some(p) = &a.bpe {
        ts = bpe::decode(&ts, &bpe_table(p)?)?;
    }
    let mut seqs = tok.decode(&ts)?;
    if a.deg_per_second {
        for s in &mut seqs {
            if s.kind() == DistributionKind::Velocity {
                *s = s.scaled(s.sample_rate_hz())?;
            }
        }
    }
    if let [single] = seqs.as_slice() {
        if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            io::write_csv(&a.out, single)?;
            return Ok(());
        }
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (i, s) in seqs.iter().enumerate() {
        io::write_csv(&a.out.join(format!("seq_{i:04}.csv")), s)?;
    }
    Ok(())
}

fn cmd_bpe_train(a: BpeTrainArgs) -> Result<()> {
    let ts = io::load_stream(&a.stream)?;
    let table = bpe::train(&ts, a.bpe_merges)?;
    io::save_codebook(&Codebook::Bpe(table), &a.out)?;
    Ok(())
}

fn cmd_eval(a: EvalArgs, threads: usize) -> Result<()> {
    let report = pipeline::run_eval(a.pipeline.config()?, threads)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let json = report.to_json()?;
    let csv = report.to_csv();
    let table = report.to_table();
    io::write_atomic(&a.out.join("report.json"), json.as_bytes())?;
    io::write_atomic(&a.out.join("report.csv"), csv.as_bytes())?;
    io::write_atomic(&a.out.join("report.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

fn cmd_sweep(a: SweepArgs, threads: usize) -> Result<()> {
    let csv = match a.kind {
        SweepKind::Kmeans => rows_to_csv(&pipeline::kmeans_sweep(a.pipeline.config()?, &a.ks, threads)?)?,
        SweepKind::Length => {
            let cfg = a.pipeline.config()?;
            let scheme = match cfg.schemes.as_slice() {
                [s] => *s,
                _ => return Err(Error::InvalidConfig("the length sweep needs exactly one --scheme".into()).into()),
            };
            rows_to_csv(&pipeline::accumulative_curve(cfg, scheme, &a.lengths, threads)?)?
        }
        SweepKind::Codebook => {
            let input = a.input.ok_or_else(|| Error::InvalidConfig("--input is required for codebook sweeps".into()))?;
            rows_to_csv(&pipeline::ingest_codebook_sweep(&input)?)?
        }
    };
    io::write_atomic(&a.out, csv.as_bytes())?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_fixations: a.n_fixations,
        noise_std_deg: a.noise_std,
        drift_deg_per_sample: (a.drift, a.drift),
        sample_rate_hz: a.sample_rate,
        seed: a.seed,
        ..Default::default()
    };
    let recs = synth_dataset(&cfg, a.recordings)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut entries = Vec::new();
    for r in &recs {
        let file = PathBuf::from(format!("{}.csv", r.id));
        io::write_csv(&a.out.join(&file), &r.seq)?;
        entries.push(ManifestEntry { id: r.id.clone(), path: file });
    }
    let manifest = Manifest {
        name: "synthetic".into(),
        sample_rate_hz: Some(a.sample_rate),
        schema: CsvSchema::default(),
        recordings: entries,
    };
    io::write_atomic(&a.out.join("manifest.json"), (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
    Ok(())
}

/// Machine-readable name and exit code of a failure.
fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    match err.downcast_ref::<Error>().map(Error::category) {
        Some("config") => ("ConfigError", 3),
        Some("io") => ("IoError", 4),
        Some("format") => ("FormatError", 5),
        Some("sequence") => ("SequenceError", 6),
        Some("stream") => ("StreamError", 7),
        Some("fit") => ("FitError", 8),
        Some("bpe") => ("BpeError", 9),
        Some("metric") => ("MetricError", 10),
        _ if err.downcast_ref::<std::io::Error>().is_some() => ("IoError", 4),
        _ => ("Error", 1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::BpeTrain(a) => cmd_bpe_train(a),
        Command::Eval(a) => cmd_eval(a, threads),
        Command::Sweep(a) => cmd_sweep(a, threads),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (category, code) = classify(&err);
            eprintln!("error[{category}]: {err:#}");
            ExitCode::from(code)
        }
    }
}
