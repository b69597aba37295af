//! Tokenizers for continuous 2-D gaze data.
//!
//! Gaze recordings are turned into discrete token streams by one of several
//! schemes (raw float bytes, μ-law companding, quantile binning, k-means
//! vector quantization, or an externally trained VQ-VAE codebook), optionally
//! compressed with byte-pair encoding, decoded back and scored with
//! reconstruction, alignment and distribution metrics.

pub mod binary;
pub mod bpe;
pub mod dataset;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod metrics;
pub mod pipeline;
pub mod mulaw;
pub mod quantile;
pub mod report;
pub mod sequence;
pub mod stream;
pub mod tokenizer;
pub mod vqvae;

pub use error::{Error, Result};
pub use sequence::{DistributionKind, GazeSample, GazeSequence};
pub use stream::{AxisMode, TokenId, TokenStream};
pub use tokenizer::{fit, FitOptions, FittedTokenizer, Scheme, Tokenizer};
