use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sequence too short: need at least {needed} samples, got {got}")]
    SequenceTooShort { needed: usize, got: usize },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },
    #[error("invalid sample rate {0}")]
    InvalidSampleRate(f64),
    #[error("expected a {expected} sequence, got {got}")]
    WrongDistribution { expected: &'static str, got: &'static str },

    #[error("malformed token stream: {0}")]
    MalformedStream(String),
    #[error("decoded value at sample {index} is not a finite float")]
    InvalidFloat { index: usize },
    #[error("token {token} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { token: u32, vocab: u32 },

    #[error("no data to fit")]
    EmptyData,
    #[error("invalid bin count {0}, need at least 2")]
    InvalidBinCount(usize),
    #[error("{distinct} distinct points cannot populate {k} clusters")]
    TooFewDistinctPoints { distinct: usize, k: usize },

    #[error("empty BPE corpus")]
    EmptyCorpus,
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("unknown token {0}")]
    UnknownToken(u32),
    #[error("token counts must be positive")]
    ZeroLength,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("histogram bounds differ")]
    BoundsMismatch,
    #[error("histogram holds no samples")]
    EmptyHistogram,

    #[error("column {0:?} not found")]
    MissingColumn(String),
    #[error("no valid rows in {0}")]
    NoValidRows(PathBuf),
    #[error("cannot parse {value:?} in row {row}")]
    ParseValue { row: usize, value: String },
    #[error("no sample rate: add a time column or pass one explicitly")]
    MissingSampleRate,
    #[error("bad magic, not a GZTK1 stream")]
    BadMagic,
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("unsupported codebook version {0}")]
    UnsupportedVersion(u32),

    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        use Error::*;
        match self {
            SequenceTooShort { .. } | EmptySequence | NonFinite { .. } | InvalidSampleRate(_)
            | WrongDistribution { .. } | LengthMismatch { .. } => "sequence",
            MalformedStream(_) | InvalidFloat { .. } | TokenOutOfRange { .. } => "stream",
            EmptyData | InvalidBinCount(_) | TooFewDistinctPoints { .. } => "fit",
            EmptyCorpus | VocabMismatch(_) | UnknownToken(_) | ZeroLength => "bpe",
            BoundsMismatch | EmptyHistogram => "metric",
            MissingColumn(_) | NoValidRows(_) | ParseValue { .. } | MissingSampleRate | BadMagic
            | TruncatedPayload { .. } | TrailingBytes(_) | UnsupportedVersion(_) | Csv(_)
            | Json(_) => "format",
            InvalidConfig(_) | InvalidFraction(_) | Unsupported(_) => "config",
            Io(_) => "io",
        }
    }
}
