//! Reconstruction and distribution metrics.
//!
//! Pointwise errors use the Euclidean distance between 2-D samples, so MAE
//! is in degrees and MSE in squared degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{integrate_positions, AxisBounds, Bounds, GazeSample, GazeSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointMetric {
    Mse,
    Mae,
}

fn check_lengths(a: &[GazeSample], b: &[GazeSample]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

pub fn mse_samples(a: &[GazeSample], b: &[GazeSample]) -> Result<f64> {
    check_lengths(a, b)?;
    let total: f64 = a.iter().zip(b).map(|(p, q)| (p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sum();
    Ok(total / a.len() as f64)
}

pub fn mae_samples(a: &[GazeSample], b: &[GazeSample]) -> Result<f64> {
    check_lengths(a, b)?;
    let total: f64 = a.iter().zip(b).map(|(p, q)| p.distance(q)).sum();
    Ok(total / a.len() as f64)
}

pub fn mse(a: &GazeSequence, b: &GazeSequence) -> Result<f64> {
    mse_samples(a.samples(), b.samples())
}

pub fn mae(a: &GazeSequence, b: &GazeSequence) -> Result<f64> {
    mae_samples(a.samples(), b.samples())
}

pub fn point_error(a: &GazeSequence, b: &GazeSequence, metric: PointMetric) -> Result<f64> {
    match metric {
        PointMetric::Mse => mse(a, b),
        PointMetric::Mae => mae(a, b),
    }
}

/// Error of positions rebuilt by integrating `decoded_vel` from the first
/// ground-truth position.
pub fn accumulative_error(gt_positions: &GazeSequence, decoded_vel: &GazeSequence, metric: PointMetric) -> Result<f64> {
    if gt_positions.len() != decoded_vel.len() + 1 {
        return Err(Error::LengthMismatch { left: gt_positions.len(), right: decoded_vel.len() + 1 });
    }
    let rebuilt = integrate_positions(gt_positions.samples()[0], decoded_vel)?;
    point_error(&rebuilt, gt_positions, metric)
}

/// Dynamic time warping cost with Euclidean local cost and the
/// match/insert/delete step pattern; the accumulated cost is not normalized.
pub fn dtw_samples(a: &[GazeSample], b: &[GazeSample]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut prev = vec![f64::INFINITY; b.len() + 1];
    let mut cur = vec![f64::INFINITY; b.len() + 1];
    prev[0] = 0.0;
    for p in a {
        cur[0] = f64::INFINITY;
        for (j, q) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = p.distance(q) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[b.len()])
}

pub fn dtw(a: &GazeSequence, b: &GazeSequence) -> Result<f64> {
    dtw_samples(a.samples(), b.samples())
}

pub const HIST_BINS: usize = 128;

/// 128 x 128 count histogram over ground-truth bounds. Samples outside the
/// bounds (or non-finite) are counted in `discarded` and not binned.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    pub bounds: Bounds,
    /// Row-major, `x` bin major: `counts[xi * 128 + yi]`.
    pub counts: Vec<u64>,
    pub discarded: u64,
}

fn bin_index(v: f64, b: &AxisBounds) -> Option<usize> {
    if !(v >= b.min && v <= b.max) {
        return None;
    }
    if b.is_degenerate() {
        return Some(0);
    }
    let i = ((v - b.min) / (b.max - b.min) * HIST_BINS as f64).floor() as usize;
    Some(i.min(HIST_BINS - 1))
}

impl Histogram2D {
    pub fn from_samples(data: &[GazeSample], bounds: Bounds) -> Self {
        let mut counts = vec![0u64; HIST_BINS * HIST_BINS];
        let mut discarded = 0;
        for s in data {
            match (bin_index(s.x, &bounds.x), bin_index(s.y, &bounds.y)) {
                (Some(xi), Some(yi)) => counts[xi * HIST_BINS + yi] += 1,
                _ => discarded += 1,
            }
        }
        Self { bounds, counts, discarded }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, xi: usize, yi: usize) -> u64 {
        self.counts[xi * HIST_BINS + yi]
    }

    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| if total > 0.0 { c as f64 / total } else { 0.0 }).collect()
    }
}

/// Histogram of `data` over the per-axis range of `bounds_source`.
pub fn histogram2d(data: &[GazeSample], bounds_source: &[GazeSample]) -> Result<Histogram2D> {
    let bounds = Bounds::of(bounds_source).ok_or(Error::EmptySequence)?;
    Ok(Histogram2D::from_samples(data, bounds))
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter().zip(m).filter(|(&pi, _)| pi > 0.0).map(|(&pi, &mi)| pi * (pi / mi).log2()).sum()
}

/// Jensen-Shannon divergence of two probability vectors, base 2.
pub fn jsd_distributions(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let v = 0.5 * kl_to_mixture(p, &m) + 0.5 * kl_to_mixture(q, &m);
    Ok(v.clamp(0.0, 1.0))
}

pub fn jsd(p: &Histogram2D, q: &Histogram2D) -> Result<f64> {
    if p.bounds != q.bounds || p.counts.len() != q.counts.len() {
        return Err(Error::BoundsMismatch);
    }
    if p.total() == 0 || q.total() == 0 {
        return Err(Error::EmptyHistogram);
    }
    jsd_distributions(&p.normalized(), &q.normalized())
}

/// Fractional ranks with ties averaged.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of fractional ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::SequenceTooShort { needed: 2, got: a.len() });
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}
