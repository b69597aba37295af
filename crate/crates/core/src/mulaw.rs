//! μ-law companding quantizer.
//!
//! Samples are min-max normalized to `[-1, 1]`, compressed with
//! `f(x) = sign(x) ln(1 + |x mu|) / ln(1 + |mu N|)` and binned uniformly in
//! the transformed domain. `N` is the input magnitude that maps to the edge
//! of the vocabulary; anything beyond `±N` saturates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Bounds, GazeSample};
use crate::stream::{AxisMode, TokenId};
use crate::tokenizer::{sample_chunks, Scheme, Tokenizer};

/// Shape parameters `(mu, N)` of one companding curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuLawCurve {
    pub mu: f64,
    #[serde(rename = "n")]
    pub n_scale: f64,
}

impl MuLawCurve {
    pub fn new(mu: f64, n_scale: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0 && n_scale.is_finite() && n_scale > 0.0) {
            return Err(Error::InvalidConfig(format!("mu-law needs mu > 0 and N > 0, got ({mu}, {n_scale})")));
        }
        Ok(Self { mu, n_scale })
    }

    fn log_span(&self) -> f64 {
        (self.mu * self.n_scale).abs().ln_1p()
    }

    pub fn transform(&self, x: f64) -> f64 {
        sign(x) * (x * self.mu).abs().ln_1p() / self.log_span()
    }

    pub fn inverse(&self, y: f64) -> f64 {
        sign(y) * (y.abs() * self.log_span()).exp_m1() / self.mu.abs()
    }

    /// `floor(n (f(x) + 1) / 2)`, clamped into `[0, n - 1]`.
    pub fn encode(&self, x: f64, bins: u32) -> TokenId {
        let raw = (bins as f64 * (self.transform(x) + 1.0) / 2.0).floor();
        raw.clamp(0.0, (bins - 1) as f64) as TokenId
    }

    /// Lower-edge preimage of the token's bin, `f^-1(2 t / n - 1)`.
    pub fn decode(&self, token: TokenId, bins: u32) -> Result<f64> {
        if token >= bins {
            return Err(Error::TokenOutOfRange { token, vocab: bins });
        }
        Ok(self.inverse(2.0 * token as f64 / bins as f64 - 1.0))
    }
}

// f64::signum maps 0 to 1; the transform needs sign(0) = 0.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sum of squared quantization errors `sum (x - g^-1(g(x)))^2`.
pub fn objective(values: &[f64], curve: &MuLawCurve, bins: u32) -> f64 {
    values
        .iter()
        .map(|&x| {
            let back = curve.inverse(2.0 * curve.encode(x, bins) as f64 / bins as f64 - 1.0);
            (x - back).powi(2)
        })
        .sum()
}

/// Deterministic search for `(mu, N)`: a log-spaced grid followed by rounds
/// of local refinement around the incumbent. `fixed` bypasses the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuLawSearch {
    pub fixed: Option<MuLawCurve>,
    pub mu_range: (f64, f64),
    pub n_range: (f64, f64),
    pub grid: usize,
    pub refine_rounds: usize,
    pub refine_grid: usize,
}

impl Default for MuLawSearch {
    fn default() -> Self {
        Self {
            fixed: None,
            mu_range: (1.0, 256.0),
            n_range: (0.1, 2.0),
            grid: 64,
            refine_rounds: 2,
            refine_grid: 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub curve: MuLawCurve,
    pub objective: f64,
}

fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

fn best_of(values: &[f64], bins: u32, mus: &[f64], ns: &[f64]) -> SearchResult {
    let cells: Vec<(f64, f64)> = mus.iter().flat_map(|&m| ns.iter().map(move |&n| (m, n))).collect();
    let scored: Vec<SearchResult> = cells
        .par_iter()
        .map(|&(mu, n_scale)| {
            let curve = MuLawCurve { mu, n_scale };
            SearchResult { curve, objective: objective(values, &curve, bins) }
        })
        .collect();
    // Sequential scan: ties go to the smallest mu, then the smallest N.
    scored
        .into_iter()
        .min_by(|a, b| {
            a.objective
                .total_cmp(&b.objective)
                .then(a.curve.mu.total_cmp(&b.curve.mu))
                .then(a.curve.n_scale.total_cmp(&b.curve.n_scale))
        })
        .expect("search grid is never empty")
}

impl MuLawSearch {
    pub fn run(&self, values: &[f64], bins: u32) -> Result<SearchResult> {
        if values.is_empty() {
            return Err(Error::EmptyData);
        }
        if let Some(curve) = self.fixed {
            let curve = MuLawCurve::new(curve.mu, curve.n_scale)?;
            return Ok(SearchResult { curve, objective: objective(values, &curve, bins) });
        }
        let (mu_lo, mu_hi) = self.mu_range;
        let (n_lo, n_hi) = self.n_range;
        if !(mu_lo > 0.0 && mu_lo < mu_hi && n_lo > 0.0 && n_lo < n_hi && self.grid >= 2) {
            return Err(Error::InvalidConfig("mu-law search ranges must be positive and increasing".into()));
        }
        let mut best = best_of(values, bins, &log_space(mu_lo, mu_hi, self.grid), &log_space(n_lo, n_hi, self.grid));
        let mut mu_step = (mu_hi / mu_lo).ln() / (self.grid - 1) as f64;
        let mut n_step = (n_hi / n_lo).ln() / (self.grid - 1) as f64;
        let points = self.refine_grid.max(3) | 1;
        for _ in 0..self.refine_rounds {
            let around = |centre: f64, step: f64, lo: f64, hi: f64| {
                log_space((centre * (-step).exp()).max(lo), (centre * step.exp()).min(hi), points)
            };
            let mus = around(best.curve.mu, mu_step, mu_lo, mu_hi);
            let ns = around(best.curve.n_scale, n_step, n_lo, n_hi);
            let local = best_of(values, bins, &mus, &ns);
            if local.objective < best.objective {
                best = local;
            }
            mu_step *= 2.0 / (points - 1) as f64;
            n_step *= 2.0 / (points - 1) as f64;
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuLawTokenizer {
    pub axis_mode: AxisMode,
    pub bins: u32,
    /// One curve when pooled, `[x, y]` when per-axis.
    pub curves: Vec<MuLawCurve>,
    /// Normalization bounds, always per axis.
    pub norm_bounds: Bounds,
}

impl MuLawTokenizer {
    pub fn new(curves: Vec<MuLawCurve>, bins: u32, axis_mode: AxisMode, norm_bounds: Bounds) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidBinCount(bins as usize));
        }
        let expected = match axis_mode {
            AxisMode::Pooled => 1,
            AxisMode::PerAxis => 2,
        };
        if curves.len() != expected {
            return Err(Error::InvalidConfig(format!("{} mode needs {expected} curves", axis_mode.as_str())));
        }
        for c in &curves {
            MuLawCurve::new(c.mu, c.n_scale)?;
        }
        Ok(Self { axis_mode, bins, curves, norm_bounds })
    }

    pub fn fit(samples: &[GazeSample], bins: u32, axis_mode: AxisMode, search: &MuLawSearch) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidBinCount(bins as usize));
        }
        let norm_bounds = Bounds::of(samples).ok_or(Error::EmptyData)?;
        let normalized: Vec<GazeSample> = samples.iter().map(|&s| norm_bounds.normalize(s)).collect();
        let curves = match axis_mode {
            AxisMode::Pooled => {
                let pooled: Vec<f64> = normalized.iter().flat_map(|s| [s.x, s.y]).collect();
                vec![search.run(&pooled, bins)?.curve]
            }
            AxisMode::PerAxis => (0..2)
                .map(|axis| {
                    let values: Vec<f64> = normalized.iter().map(|s| s.axis(axis)).collect();
                    Ok(search.run(&values, bins)?.curve)
                })
                .collect::<Result<_>>()?,
        };
        Self::new(curves, bins, axis_mode, norm_bounds)
    }

    pub fn curve(&self, axis: usize) -> &MuLawCurve {
        match self.axis_mode {
            AxisMode::Pooled => &self.curves[0],
            AxisMode::PerAxis => &self.curves[axis],
        }
    }

    pub fn encode_value(&self, v: f64, axis: usize) -> TokenId {
        self.curve(axis).encode(self.norm_bounds.axis(axis).normalize(v), self.bins)
    }

    pub fn decode_value(&self, token: TokenId, axis: usize) -> Result<f64> {
        Ok(self.norm_bounds.axis(axis).denormalize(self.curve(axis).decode(token, self.bins)?))
    }
}

impl Tokenizer for MuLawTokenizer {
    fn scheme(&self) -> Scheme {
        Scheme::MuLaw
    }

    fn base_vocab(&self) -> u32 {
        self.bins
    }

    fn axis_mode(&self) -> AxisMode {
        self.axis_mode
    }

    fn tokens_per_sample(&self) -> usize {
        2
    }

    fn encode_samples(&self, samples: &[GazeSample]) -> Result<Vec<TokenId>> {
        Ok(samples.iter().flat_map(|s| [self.encode_value(s.x, 0), self.encode_value(s.y, 1)]).collect())
    }

    fn decode_tokens(&self, tokens: &[TokenId]) -> Result<Vec<GazeSample>> {
        sample_chunks(tokens, 2)?
            .map(|c| Ok(GazeSample::new(self.decode_value(c[0], 0)?, self.decode_value(c[1], 1)?)))
            .collect()
    }
}
