//! Quantile (frequency) binning: thresholds are empirical quantiles of the
//! training data, so every token covers roughly the same number of samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::GazeSample;
use crate::stream::{AxisMode, TokenId};
use crate::tokenizer::{sample_chunks, Scheme, Tokenizer};

/// Ascending thresholds `q_0..q_{n-1}`; token `t` covers `[q_t, q_{t+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    thresholds: Vec<f64>,
}

impl QuantileTable {
    /// `q_i` is the `floor(i / n * count)`-th smallest value, `i = 0..n`.
    pub fn fit(data: &[f64], n: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if n < 2 {
            return Err(Error::InvalidBinCount(n));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let mut sorted = data.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let count = sorted.len() as u128;
        let thresholds = (0..n as u128).map(|i| sorted[(i * count / n as u128) as usize]).collect();
        Ok(Self { thresholds })
    }

    pub fn from_thresholds(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() < 2 {
            return Err(Error::InvalidBinCount(thresholds.len()));
        }
        if let Some(index) = thresholds.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("quantile thresholds must be non-decreasing".into()));
        }
        Ok(Self { thresholds })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn bins(&self) -> usize {
        self.thresholds.len()
    }

    /// Number of thresholds `<= x`, minus one, floored at 0. Values below
    /// `q_0` share token 0 and everything at or above `q_{n-1}` lands in
    /// `n - 1`; equal thresholds resolve to the highest index.
    pub fn encode(&self, x: f64) -> TokenId {
        let above = self.thresholds.partition_point(|&q| q <= x);
        above.saturating_sub(1) as TokenId
    }

    /// Midpoint of the two thresholds nearest to the token; the top token
    /// decodes to `q_{n-1}`.
    pub fn decode(&self, token: TokenId) -> Result<f64> {
        let n = self.bins();
        let t = token as usize;
        if t >= n {
            return Err(Error::TokenOutOfRange { token, vocab: n as u32 });
        }
        let hi = (t + 1).min(n - 1);
        Ok((self.thresholds[t] + self.thresholds[hi]) / 2.0)
    }

    /// Mean width of the non-degenerate bins.
    pub fn mean_bin_width(&self) -> f64 {
        let widths: Vec<f64> = self.thresholds.windows(2).map(|w| w[1] - w[0]).filter(|&w| w > 0.0).collect();
        if widths.is_empty() {
            0.0
        } else {
            widths.iter().sum::<f64>() / widths.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTokenizer {
    pub axis_mode: AxisMode,
    /// One table when pooled, `[x, y]` when per-axis.
    pub tables: Vec<QuantileTable>,
}

impl QuantileTokenizer {
    pub fn fit(samples: &[GazeSample], n: u32, axis_mode: AxisMode) -> Result<Self> {
        let tables = match axis_mode {
            AxisMode::Pooled => {
                let pooled: Vec<f64> = samples.iter().flat_map(|s| [s.x, s.y]).collect();
                vec![QuantileTable::fit(&pooled, n as usize)?]
            }
            AxisMode::PerAxis => (0..2)
                .map(|axis| {
                    let values: Vec<f64> = samples.iter().map(|s| s.axis(axis)).collect();
                    QuantileTable::fit(&values, n as usize)
                })
                .collect::<Result<_>>()?,
        };
        Ok(Self { axis_mode, tables })
    }

    pub fn table(&self, axis: usize) -> &QuantileTable {
        match self.axis_mode {
            AxisMode::Pooled => &self.tables[0],
            AxisMode::PerAxis => &self.tables[axis],
        }
    }
}

impl Tokenizer for QuantileTokenizer {
    fn scheme(&self) -> Scheme {
        Scheme::Quantile
    }

    fn base_vocab(&self) -> u32 {
        self.tables[0].bins() as u32
    }

    fn axis_mode(&self) -> AxisMode {
        self.axis_mode
    }

    fn tokens_per_sample(&self) -> usize {
        2
    }

    fn encode_samples(&self, samples: &[GazeSample]) -> Result<Vec<TokenId>> {
        Ok(samples.iter().flat_map(|s| [self.table(0).encode(s.x), self.table(1).encode(s.y)]).collect())
    }

    fn decode_tokens(&self, tokens: &[TokenId]) -> Result<Vec<GazeSample>> {
        sample_chunks(tokens, 2)?
            .map(|c| Ok(GazeSample::new(self.table(0).decode(c[0])?, self.table(1).decode(c[1])?)))
            .collect()
    }
}
