//! Lossless byte tokenizer: every coordinate is stored as an IEEE-754 single
//! precision float and split into its four little-endian bytes.
//!
//! Coordinates are narrowed to `f32` on encode. Data ingested through
//! [`crate::io`] already carries `f32` precision, so for it the round trip is
//! bit-exact.

use crate::error::{Error, Result};
use crate::sequence::GazeSample;
use crate::stream::{AxisMode, TokenId};
use crate::tokenizer::{sample_chunks, Scheme, Tokenizer};

pub const BINARY_VOCAB: u32 = 256;
pub const TOKENS_PER_FLOAT: usize = 4;
pub const TOKENS_PER_SAMPLE: usize = 2 * TOKENS_PER_FLOAT;

pub fn encode_scalar(v: f32) -> [TokenId; TOKENS_PER_FLOAT] {
    v.to_le_bytes().map(TokenId::from)
}

/// Reassembles one float. Fails only on tokens outside the byte range; the
/// result may be NaN or infinite.
pub fn decode_scalar(tokens: &[TokenId]) -> Result<f32> {
    let mut bytes = [0u8; TOKENS_PER_FLOAT];
    if tokens.len() != TOKENS_PER_FLOAT {
        return Err(Error::MalformedStream(format!("a float needs 4 tokens, got {}", tokens.len())));
    }
    for (b, &t) in bytes.iter_mut().zip(tokens) {
        *b = u8::try_from(t).map_err(|_| Error::TokenOutOfRange { token: t, vocab: BINARY_VOCAB })?;
    }
    Ok(f32::from_le_bytes(bytes))
}

/// Decoded samples with a per-sample flag for NaN or infinite coordinates,
/// which arbitrary byte sequences (e.g. generated by a language model) can
/// produce.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDecode {
    pub samples: Vec<[f32; 2]>,
    pub invalid: Vec<bool>,
}

impl RawDecode {
    pub fn invalid_count(&self) -> usize {
        self.invalid.iter().filter(|&&b| b).count()
    }

    /// Finite samples only, widened to `f64`.
    pub fn valid_samples(&self) -> Vec<GazeSample> {
        self.samples
            .iter()
            .zip(&self.invalid)
            .filter(|(_, &bad)| !bad)
            .map(|(s, _)| GazeSample::new(s[0] as f64, s[1] as f64))
            .collect()
    }
}

pub fn decode_raw(tokens: &[TokenId]) -> Result<RawDecode> {
    let chunks = sample_chunks(tokens, TOKENS_PER_SAMPLE)?;
    let mut samples = Vec::with_capacity(chunks.len());
    let mut invalid = Vec::with_capacity(chunks.len());
    for chunk in chunks {
        let x = decode_scalar(&chunk[..TOKENS_PER_FLOAT])?;
        let y = decode_scalar(&chunk[TOKENS_PER_FLOAT..])?;
        invalid.push(!(x.is_finite() && y.is_finite()));
        samples.push([x, y]);
    }
    Ok(RawDecode { samples, invalid })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BinaryTokenizer;

impl Tokenizer for BinaryTokenizer {
    fn scheme(&self) -> Scheme {
        Scheme::Binary
    }

    fn base_vocab(&self) -> u32 {
        BINARY_VOCAB
    }

    fn axis_mode(&self) -> AxisMode {
        AxisMode::PerAxis
    }

    fn tokens_per_sample(&self) -> usize {
        TOKENS_PER_SAMPLE
    }

    fn encode_samples(&self, samples: &[GazeSample]) -> Result<Vec<TokenId>> {
        let mut out = Vec::with_capacity(samples.len() * TOKENS_PER_SAMPLE);
        for s in samples {
            out.extend(encode_scalar(s.x as f32));
            out.extend(encode_scalar(s.y as f32));
        }
        Ok(out)
    }

    fn decode_tokens(&self, tokens: &[TokenId]) -> Result<Vec<GazeSample>> {
        let raw = decode_raw(tokens)?;
        if let Some(index) = raw.invalid.iter().position(|&b| b) {
            return Err(Error::InvalidFloat { index });
        }
        Ok(raw.samples.iter().map(|s| GazeSample::new(s[0] as f64, s[1] as f64)).collect())
    }
}
