//! Token streams: the interchange format between tokenizers, BPE and metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::DistributionKind;

pub type TokenId = u32;

/// Whether the two gaze axes share one set of tokenizer parameters or are
/// fitted independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisMode {
    #[default]
    Pooled,
    PerAxis,
}

impl AxisMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisMode::Pooled => "pooled",
            AxisMode::PerAxis => "per_axis",
        }
    }
}

/// Token ids of one or more sequences plus the layout needed to decode them.
///
/// `sequence_boundaries` holds the start offset of every sequence inside
/// `tokens`; BPE never merges across these offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStream {
    pub tokens: Vec<TokenId>,
    pub base_vocab: u32,
    /// Base vocabulary plus any BPE merges applied to this stream.
    pub vocab_size: u32,
    pub tokens_per_sample: usize,
    pub axis_mode: AxisMode,
    pub tokenizer_id: String,
    pub sequence_boundaries: Vec<usize>,
    pub sample_rate_hz: f64,
    pub distribution: DistributionKind,
}

impl TokenStream {
    /// Builds a stream from per-sequence token runs, computing boundaries.
    pub fn from_sequences(
        runs: Vec<Vec<TokenId>>,
        template: &TokenStream,
    ) -> TokenStream {
        let mut tokens = Vec::with_capacity(runs.iter().map(Vec::len).sum());
        let mut sequence_boundaries = Vec::with_capacity(runs.len());
        for run in runs {
            sequence_boundaries.push(tokens.len());
            tokens.extend(run);
        }
        TokenStream { tokens, sequence_boundaries, ..template.clone_meta() }
    }

    /// Copy of the metadata with no tokens.
    pub fn clone_meta(&self) -> TokenStream {
        TokenStream {
            tokens: Vec::new(),
            base_vocab: self.base_vocab,
            vocab_size: self.vocab_size,
            tokens_per_sample: self.tokens_per_sample,
            axis_mode: self.axis_mode,
            tokenizer_id: self.tokenizer_id.clone(),
            sequence_boundaries: Vec::new(),
            sample_rate_hz: self.sample_rate_hz,
            distribution: self.distribution,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn sequence_count(&self) -> usize {
        self.sequence_boundaries.len()
    }

    /// Token slices of each sequence, in order.
    pub fn sequences(&self) -> impl Iterator<Item = &[TokenId]> + '_ {
        let ends = self.sequence_boundaries.iter().skip(1).copied().chain(std::iter::once(self.tokens.len()));
        self.sequence_boundaries.iter().zip(ends).map(move |(&s, e)| &self.tokens[s..e])
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens_per_sample == 0 {
            return Err(Error::MalformedStream("tokens_per_sample must be positive".into()));
        }
        if self.vocab_size < self.base_vocab {
            return Err(Error::MalformedStream("vocab_size below base vocabulary".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidSampleRate(self.sample_rate_hz));
        }
        match self.sequence_boundaries.first() {
            None if !self.tokens.is_empty() => {
                return Err(Error::MalformedStream("tokens without sequence boundaries".into()))
            }
            Some(&first) if first != 0 => {
                return Err(Error::MalformedStream("first boundary must be 0".into()))
            }
            _ => {}
        }
        if self.sequence_boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedStream("boundaries must be strictly increasing".into()));
        }
        if self.sequence_boundaries.last().is_some_and(|&b| b >= self.tokens.len()) {
            return Err(Error::MalformedStream("boundary past end of stream".into()));
        }
        if let Some(&bad) = self.tokens.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::TokenOutOfRange { token: bad, vocab: self.vocab_size });
        }
        Ok(())
    }
}
