//! File formats: gaze CSV files, GZTK1 token streams and JSON codebooks.
//!
//! A GZTK1 stream is a single-line JSON header terminated by `\n`, followed
//! by the token ids as contiguous little-endian `u32` values. The header
//! declares the token count so truncation is detected.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binary::BinaryTokenizer;
use crate::bpe::MergeTable;
use crate::dataset::Recording;
use crate::error::{Error, Result};
use crate::kmeans::KMeansTokenizer;
use crate::mulaw::MuLawTokenizer;
use crate::quantile::QuantileTokenizer;
use crate::sequence::{DistributionKind, GazeSample, GazeSequence};
use crate::stream::{AxisMode, TokenId, TokenStream};
use crate::tokenizer::FittedTokenizer;
use crate::vqvae::VqVaeCodebook;

pub const STREAM_MAGIC: &str = "GZTK1";
pub const CODEBOOK_VERSION: u32 = 1;

/// Writes `bytes` to a sibling temp file and renames it over `path`, so a
/// failure never leaves a half-written output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

// ---------------------------------------------------------------- CSV

/// Column names of a gaze CSV file. `t_col` holds timestamps in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub x_col: String,
    pub y_col: String,
    #[serde(default)]
    pub t_col: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self { x_col: "x".into(), y_col: "y".into(), t_col: Some("t".into()) }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub recording: Recording,
    /// Rows skipped because a coordinate was empty, NaN or infinite.
    pub dropped_rows: usize,
}

fn parse_field(raw: &str, row: usize) -> Result<f64> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(f64::NAN);
    }
    raw.parse::<f64>().map_err(|_| Error::ParseValue { row, value: raw.to_string() })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Reads one recording of gaze samples. Coordinates are rounded to `f32`
/// precision. `sample_rate_hz` overrides the rate estimated from the median
/// timestamp delta, which is rounded to 1e-6 Hz.
pub fn load_csv(path: &Path, schema: &CsvSchema, sample_rate_hz: Option<f64>) -> Result<LoadedCsv> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let xi = column(&schema.x_col)?;
    let yi = column(&schema.y_col)?;
    let ti = schema.t_col.as_deref().map(column).transpose()?;

    let mut samples = Vec::new();
    let mut times = Vec::new();
    let mut dropped_rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let x = parse_field(field(xi), row + 1)?;
        let y = parse_field(field(yi), row + 1)?;
        if !(x.is_finite() && y.is_finite()) {
            dropped_rows += 1;
            continue;
        }
        if let Some(ti) = ti {
            times.push(parse_field(field(ti), row + 1)?);
        }
        samples.push(GazeSample::new(x, y).to_f32_precision());
    }
    if samples.is_empty() {
        return Err(Error::NoValidRows(path.to_path_buf()));
    }
    let estimated = median(times.windows(2).map(|w| w[1] - w[0]).filter(|d| d.is_finite()).collect())
        .filter(|&d| d > 0.0)
        // Timestamps printed in decimal rarely invert exactly; snap to µHz.
        .map(|d| (1e6 / d).round() / 1e6);
    let rate = sample_rate_hz.or(estimated).ok_or(Error::MissingSampleRate)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(LoadedCsv {
        recording: Recording { id, seq: GazeSequence::positions(samples, rate)?, source: path.to_path_buf() },
        dropped_rows,
    })
}

/// Shortest text that parses back to the same value; values that are exactly
/// representable as `f32` are printed at `f32` precision.
pub fn format_coord(v: f64) -> String {
    if (v as f32) as f64 == v {
        format!("{}", v as f32)
    } else {
        format!("{v}")
    }
}

/// Serializes a sequence as `t,x,y` CSV with `t = i / sample_rate`.
pub fn csv_bytes(seq: &GazeSequence) -> Vec<u8> {
    let mut out = String::from("t,x,y\n");
    for (i, s) in seq.samples().iter().enumerate() {
        let t = i as f64 / seq.sample_rate_hz();
        out.push_str(&format!("{t},{},{}\n", format_coord(s.x), format_coord(s.y)));
    }
    out.into_bytes()
}

pub fn write_csv(path: &Path, seq: &GazeSequence) -> Result<()> {
    write_atomic(path, &csv_bytes(seq))
}

// ---------------------------------------------------------------- GZTK1

#[derive(Debug, Serialize, Deserialize)]
struct StreamHeader {
    magic: String,
    tokenizer_id: String,
    base_vocab: u32,
    vocab_size: u32,
    token_count: usize,
    tokens_per_sample: usize,
    axis_mode: AxisMode,
    sequence_boundaries: Vec<usize>,
    sample_rate_hz: f64,
    distribution_kind: DistributionKind,
}

pub fn stream_to_bytes(ts: &TokenStream) -> Result<Vec<u8>> {
    ts.validate()?;
    let header = StreamHeader {
        magic: STREAM_MAGIC.to_string(),
        tokenizer_id: ts.tokenizer_id.clone(),
        base_vocab: ts.base_vocab,
        vocab_size: ts.vocab_size,
        token_count: ts.tokens.len(),
        tokens_per_sample: ts.tokens_per_sample,
        axis_mode: ts.axis_mode,
        sequence_boundaries: ts.sequence_boundaries.clone(),
        sample_rate_hz: ts.sample_rate_hz,
        distribution_kind: ts.distribution,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(ts.tokens.len() * 4);
    for t in &ts.tokens {
        out.extend_from_slice(&t.to_le_bytes());
    }
    Ok(out)
}

pub fn stream_from_bytes(bytes: &[u8]) -> Result<TokenStream> {
    if bytes.first() != Some(&b'{') {
        return Err(Error::BadMagic);
    }
    let newline = bytes.iter().position(|&b| b == b'\n').ok_or(Error::BadMagic)?;
    let header: StreamHeader = serde_json::from_slice(&bytes[..newline]).map_err(|_| Error::BadMagic)?;
    if header.magic != STREAM_MAGIC {
        return Err(Error::BadMagic);
    }
    let payload = &bytes[newline + 1..];
    let expected = header.token_count * 4;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::TrailingBytes(payload.len() - expected));
    }
    let tokens: Vec<TokenId> =
        payload.chunks_exact(4).map(|c| TokenId::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let ts = TokenStream {
        tokens,
        base_vocab: header.base_vocab,
        vocab_size: header.vocab_size,
        tokens_per_sample: header.tokens_per_sample,
        axis_mode: header.axis_mode,
        tokenizer_id: header.tokenizer_id,
        sequence_boundaries: header.sequence_boundaries,
        sample_rate_hz: header.sample_rate_hz,
        distribution: header.distribution_kind,
    };
    ts.validate()?;
    Ok(ts)
}

pub fn save_stream(ts: &TokenStream, path: &Path) -> Result<()> {
    write_atomic(path, &stream_to_bytes(ts)?)
}

pub fn load_stream(path: &Path) -> Result<TokenStream> {
    stream_from_bytes(&fs::read(path)?)
}

// ---------------------------------------------------------------- codebooks

/// Everything that can live in a codebook file, tagged by `scheme`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Codebook {
    Binary,
    MuLaw(MuLawTokenizer),
    Quantile(QuantileTokenizer),
    KMeans(KMeansTokenizer),
    VqVae(VqVaeCodebook),
    Bpe(MergeTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookFile {
    pub version: u32,
    #[serde(flatten)]
    pub codebook: Codebook,
}

impl From<FittedTokenizer> for Codebook {
    fn from(t: FittedTokenizer) -> Self {
        match t {
            FittedTokenizer::Binary(_) => Codebook::Binary,
            FittedTokenizer::MuLaw(t) => Codebook::MuLaw(t),
            FittedTokenizer::Quantile(t) => Codebook::Quantile(t),
            FittedTokenizer::KMeans(t) => Codebook::KMeans(t),
            FittedTokenizer::VqVae(t) => Codebook::VqVae(t),
        }
    }
}

impl Codebook {
    pub fn into_tokenizer(self) -> Result<FittedTokenizer> {
        Ok(match self {
            Codebook::Binary => FittedTokenizer::Binary(BinaryTokenizer),
            Codebook::MuLaw(t) => FittedTokenizer::MuLaw(t),
            Codebook::Quantile(t) => FittedTokenizer::Quantile(t),
            Codebook::KMeans(t) => FittedTokenizer::KMeans(t),
            Codebook::VqVae(t) => FittedTokenizer::VqVae(t),
            Codebook::Bpe(_) => return Err(Error::InvalidConfig("codebook holds BPE merges, not a tokenizer".into())),
        })
    }

    pub fn into_merge_table(self) -> Result<MergeTable> {
        match self {
            Codebook::Bpe(t) => Ok(t),
            _ => Err(Error::InvalidConfig("codebook does not hold BPE merges".into())),
        }
    }
}

pub fn codebook_to_json(codebook: &Codebook) -> Result<String> {
    let file = CodebookFile { version: CODEBOOK_VERSION, codebook: codebook.clone() };
    Ok(serde_json::to_string_pretty(&file)? + "\n")
}

pub fn codebook_from_json(text: &str) -> Result<Codebook> {
    let file: CodebookFile = serde_json::from_str(text)?;
    if file.version != CODEBOOK_VERSION {
        return Err(Error::UnsupportedVersion(file.version));
    }
    Ok(file.codebook)
}

pub fn save_codebook(codebook: &Codebook, path: &Path) -> Result<()> {
    write_atomic(path, codebook_to_json(codebook)?.as_bytes())
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    codebook_from_json(&fs::read_to_string(path)?)
}

/// Resolves `path` against `base` unless it is already absolute.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
