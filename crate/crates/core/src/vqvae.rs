//! Codebook exported by the external VQ-VAE trainer.
//!
//! The network itself lives outside this crate, so this type only validates
//! the export and checks that token streams were produced by the same model.
//! Streams carry `tokenizer_id = "vq_vae@<model_hash>"`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{DistributionKind, GazeSample};
use crate::stream::{AxisMode, TokenId, TokenStream};
use crate::tokenizer::{Scheme, Tokenizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCodebook")]
pub struct VqVaeCodebook {
    pub variant: DistributionKind,
    pub embedding_dim: usize,
    /// Codebook indices emitted for each encoder output vector.
    pub codes_per_vector: usize,
    pub window_len: usize,
    pub model_hash: String,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawCodebook {
    variant: DistributionKind,
    embedding_dim: usize,
    codes_per_vector: usize,
    window_len: usize,
    model_hash: String,
    vectors: Vec<Vec<f64>>,
}

impl TryFrom<RawCodebook> for VqVaeCodebook {
    type Error = Error;

    fn try_from(r: RawCodebook) -> Result<Self> {
        let book = VqVaeCodebook {
            variant: r.variant,
            embedding_dim: r.embedding_dim,
            codes_per_vector: r.codes_per_vector,
            window_len: r.window_len,
            model_hash: r.model_hash,
            vectors: r.vectors,
        };
        book.validate()?;
        Ok(book)
    }
}

impl VqVaeCodebook {
    pub fn validate(&self) -> Result<()> {
        if self.vectors.len() < 2 {
            return Err(Error::InvalidBinCount(self.vectors.len()));
        }
        if self.embedding_dim == 0 || self.codes_per_vector == 0 || self.window_len == 0 {
            return Err(Error::InvalidConfig("VQ-VAE dimensions must be positive".into()));
        }
        if self.model_hash.is_empty() {
            return Err(Error::InvalidConfig("VQ-VAE export lacks a model hash".into()));
        }
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != self.embedding_dim {
                return Err(Error::InvalidConfig(format!(
                    "codebook row {i} has {} values, expected {}",
                    v.len(),
                    self.embedding_dim
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(())
    }

    pub fn stream_id(&self) -> String {
        format!("{}@{}", Scheme::VqVae.as_str(), self.model_hash)
    }

    /// Checks that `ts` was produced by this model.
    pub fn check_stream(&self, ts: &TokenStream) -> Result<()> {
        ts.validate()?;
        if ts.tokenizer_id != self.stream_id() {
            return Err(Error::VocabMismatch(format!(
                "stream from {:?}, codebook is {:?}",
                ts.tokenizer_id,
                self.stream_id()
            )));
        }
        if ts.base_vocab as usize != self.vectors.len() || ts.tokens_per_sample != self.codes_per_vector {
            return Err(Error::VocabMismatch("stream layout does not match the VQ-VAE codebook".into()));
        }
        Ok(())
    }
}

impl Tokenizer for VqVaeCodebook {
    fn scheme(&self) -> Scheme {
        Scheme::VqVae
    }

    fn base_vocab(&self) -> u32 {
        self.vectors.len() as u32
    }

    fn axis_mode(&self) -> AxisMode {
        AxisMode::Pooled
    }

    fn tokens_per_sample(&self) -> usize {
        self.codes_per_vector
    }

    fn encode_samples(&self, _: &[GazeSample]) -> Result<Vec<TokenId>> {
        Err(Error::Unsupported("VQ-VAE encoding runs in the external trainer".into()))
    }

    fn decode_tokens(&self, _: &[TokenId]) -> Result<Vec<GazeSample>> {
        Err(Error::Unsupported("VQ-VAE decoding runs in the external trainer".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book() -> VqVaeCodebook {
        VqVaeCodebook {
            variant: DistributionKind::Velocity,
            embedding_dim: 2,
            codes_per_vector: 2,
            window_len: 400,
            model_hash: "abc123".into(),
            vectors: vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]],
        }
    }

    #[test]
    fn serde_validates() {
        let json = serde_json::to_string(&book()).unwrap();
        let back: VqVaeCodebook = serde_json::from_str(&json).unwrap();
        assert_eq!(back, book());
        let bad = json.replace("[0.5,0.5]", "[0.5]");
        assert!(serde_json::from_str::<VqVaeCodebook>(&bad).is_err());
    }

    #[test]
    fn stream_must_match_model() {
        let b = book();
        let mut ts = TokenStream {
            tokens: vec![0, 2, 1, 1],
            base_vocab: 3,
            vocab_size: 3,
            tokens_per_sample: 2,
            axis_mode: AxisMode::Pooled,
            tokenizer_id: b.stream_id(),
            sequence_boundaries: vec![0],
            sample_rate_hz: 100.0,
            distribution: DistributionKind::Velocity,
        };
        b.check_stream(&ts).unwrap();
        ts.tokenizer_id = "vq_vae@other".into();
        assert!(matches!(b.check_stream(&ts), Err(Error::VocabMismatch(_))));
        assert!(matches!(b.decode_tokens(&[0]), Err(Error::Unsupported(_))));
    }
}
