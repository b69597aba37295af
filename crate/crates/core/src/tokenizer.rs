//! The contract every tokenization scheme implements, and the tagged union of
//! fitted tokenizers that is persisted in codebook files.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary::BinaryTokenizer;
use crate::error::{Error, Result};
use crate::kmeans::{KMeansConfig, KMeansTokenizer};
use crate::mulaw::{MuLawSearch, MuLawTokenizer};
use crate::quantile::QuantileTokenizer;
use crate::sequence::{GazeSample, GazeSequence};
use crate::stream::{AxisMode, TokenId, TokenStream};
use crate::vqvae::VqVaeCodebook;

pub const DEFAULT_VOCAB: u32 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Binary,
    MuLaw,
    Quantile,
    KMeans,
    VqVae,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Binary, Scheme::MuLaw, Scheme::Quantile, Scheme::KMeans, Scheme::VqVae];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Binary => "binary",
            Scheme::MuLaw => "mu_law",
            Scheme::Quantile => "quantile",
            Scheme::KMeans => "k_means",
            Scheme::VqVae => "vq_vae",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Scheme::ALL.into_iter().find(|sc| sc.as_str() == norm || sc.as_str().replace('_', "") == norm)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Encodes gaze samples into token ids and back.
///
/// Implementors only provide the per-sequence primitives; stream assembly,
/// boundary bookkeeping and parallelism over sequences come for free.
pub trait Tokenizer: Sync {
    fn scheme(&self) -> Scheme;
    fn base_vocab(&self) -> u32;
    fn axis_mode(&self) -> AxisMode;
    fn tokens_per_sample(&self) -> usize;
    fn encode_samples(&self, samples: &[GazeSample]) -> Result<Vec<TokenId>>;
    fn decode_tokens(&self, tokens: &[TokenId]) -> Result<Vec<GazeSample>>;

    fn encode(&self, seqs: &[GazeSequence]) -> Result<TokenStream> {
        let first = seqs.first().ok_or(Error::EmptySequence)?;
        if let Some(s) = seqs.iter().find(|s| s.sample_rate_hz() != first.sample_rate_hz() || s.kind() != first.kind()) {
            return Err(Error::InvalidConfig(format!(
                "mixed sequences in one stream ({} Hz {} vs {} Hz {})",
                first.sample_rate_hz(),
                first.kind(),
                s.sample_rate_hz(),
                s.kind()
            )));
        }
        let runs = seqs
            .par_iter()
            .map(|s| self.encode_samples(s.samples()))
            .collect::<Result<Vec<_>>>()?;
        let template = TokenStream {
            tokens: Vec::new(),
            base_vocab: self.base_vocab(),
            vocab_size: self.base_vocab(),
            tokens_per_sample: self.tokens_per_sample(),
            axis_mode: self.axis_mode(),
            tokenizer_id: self.scheme().as_str().to_string(),
            sequence_boundaries: Vec::new(),
            sample_rate_hz: first.sample_rate_hz(),
            distribution: first.kind(),
        };
        Ok(TokenStream::from_sequences(runs.into_iter().filter(|r| !r.is_empty()).collect(), &template))
    }

    fn decode(&self, ts: &TokenStream) -> Result<Vec<GazeSequence>> {
        ts.validate()?;
        if ts.vocab_size != ts.base_vocab {
            return Err(Error::VocabMismatch("stream still carries BPE merges; decode them first".into()));
        }
        if ts.base_vocab != self.base_vocab() || ts.tokens_per_sample != self.tokens_per_sample() {
            return Err(Error::VocabMismatch(format!(
                "stream layout {}x{} does not match tokenizer {}x{}",
                ts.base_vocab,
                ts.tokens_per_sample,
                self.base_vocab(),
                self.tokens_per_sample()
            )));
        }
        let runs: Vec<&[TokenId]> = ts.sequences().collect();
        runs.par_iter()
            .map(|run| {
                let samples = self.decode_tokens(run)?;
                GazeSequence::new(samples, ts.sample_rate_hz, ts.distribution)
            })
            .collect()
    }
}

/// Splits `tokens` into per-sample chunks, rejecting a ragged tail.
pub(crate) fn sample_chunks(tokens: &[TokenId], per_sample: usize) -> Result<std::slice::ChunksExact<'_, TokenId>> {
    if !tokens.len().is_multiple_of(per_sample) {
        return Err(Error::MalformedStream(format!(
            "{} tokens is not a multiple of {per_sample} tokens per sample",
            tokens.len()
        )));
    }
    Ok(tokens.chunks_exact(per_sample))
}

/// Hyperparameters for [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub vocab: u32,
    pub axis_mode: AxisMode,
    pub kmeans: KMeansConfig,
    pub mulaw: MuLawSearch,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            vocab: DEFAULT_VOCAB,
            axis_mode: AxisMode::Pooled,
            kmeans: KMeansConfig::default(),
            mulaw: MuLawSearch::default(),
        }
    }
}

/// A frozen tokenizer of any scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedTokenizer {
    Binary(BinaryTokenizer),
    MuLaw(MuLawTokenizer),
    Quantile(QuantileTokenizer),
    KMeans(KMeansTokenizer),
    VqVae(VqVaeCodebook),
}

impl FittedTokenizer {
    fn inner(&self) -> &dyn Tokenizer {
        match self {
            FittedTokenizer::Binary(t) => t,
            FittedTokenizer::MuLaw(t) => t,
            FittedTokenizer::Quantile(t) => t,
            FittedTokenizer::KMeans(t) => t,
            FittedTokenizer::VqVae(t) => t,
        }
    }
}

impl Tokenizer for FittedTokenizer {
    fn scheme(&self) -> Scheme {
        self.inner().scheme()
    }
    fn base_vocab(&self) -> u32 {
        self.inner().base_vocab()
    }
    fn axis_mode(&self) -> AxisMode {
        self.inner().axis_mode()
    }
    fn tokens_per_sample(&self) -> usize {
        self.inner().tokens_per_sample()
    }
    fn encode_samples(&self, samples: &[GazeSample]) -> Result<Vec<TokenId>> {
        self.inner().encode_samples(samples)
    }
    fn decode_tokens(&self, tokens: &[TokenId]) -> Result<Vec<GazeSample>> {
        self.inner().decode_tokens(tokens)
    }
}

/// Fits a tokenizer of `scheme` on the samples of `data`.
pub fn fit(scheme: Scheme, data: &[GazeSequence], opts: &FitOptions) -> Result<FittedTokenizer> {
    let samples: Vec<GazeSample> = data.iter().flat_map(|s| s.samples().iter().copied()).collect();
    if samples.is_empty() && scheme != Scheme::Binary {
        return Err(Error::EmptyData);
    }
    Ok(match scheme {
        Scheme::Binary => FittedTokenizer::Binary(BinaryTokenizer),
        Scheme::MuLaw => FittedTokenizer::MuLaw(MuLawTokenizer::fit(&samples, opts.vocab, opts.axis_mode, &opts.mulaw)?),
        Scheme::Quantile => FittedTokenizer::Quantile(QuantileTokenizer::fit(&samples, opts.vocab, opts.axis_mode)?),
        Scheme::KMeans => FittedTokenizer::KMeans(KMeansTokenizer::fit(&samples, opts.vocab, opts.axis_mode, &opts.kmeans)?),
        Scheme::VqVae => {
            return Err(Error::Unsupported(
                "VQ-VAE tokenizers are trained externally; load their codebook file instead".into(),
            ))
        }
    })
}
