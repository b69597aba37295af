//! Vector quantization with k-means: the token is the index of the nearest
//! cluster center and decoding returns that center.
//!
//! Fitting seeds with k-means++ from a fixed RNG seed and runs Lloyd
//! iterations. Assignment is data-parallel; every reduction runs in index
//! order so results do not depend on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::GazeSample;
use crate::stream::{AxisMode, TokenId};
use crate::tokenizer::{sample_chunks, Scheme, Tokenizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    /// Stop once the relative inertia improvement drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 300, seed: 0 }
    }
}

/// `k` centers of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansCodebook {
    pub dim: usize,
    pub centers: Vec<f64>,
    pub seed: u64,
}

/// Per-iteration inertia of one fit; `inertia[0]` is the k-means++ seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub inertia: Vec<f64>,
    pub converged: bool,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KMeansCodebook {
    pub fn new(dim: usize, centers: Vec<f64>, seed: u64) -> Result<Self> {
        if dim == 0 || centers.is_empty() || !centers.len().is_multiple_of(dim) {
            return Err(Error::InvalidConfig(format!("{} center values do not form {dim}-D rows", centers.len())));
        }
        if let Some(index) = centers.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: index / dim });
        }
        Ok(Self { dim, centers, seed })
    }

    pub fn k(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    /// Nearest center and its squared distance; ties go to the lowest index.
    pub fn nearest(&self, point: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centers.chunks_exact(self.dim).enumerate() {
            let d = dist2(point, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    pub fn encode(&self, point: &[f64]) -> TokenId {
        self.nearest(point).0 as TokenId
    }

    pub fn decode(&self, token: TokenId) -> Result<&[f64]> {
        if token as usize >= self.k() {
            return Err(Error::TokenOutOfRange { token, vocab: self.k() as u32 });
        }
        Ok(self.center(token as usize))
    }

    /// Lloyd's algorithm from k-means++ seeds over row-major `points`.
    pub fn fit(points: &[f64], dim: usize, k: usize, cfg: &KMeansConfig) -> Result<(Self, FitTrace)> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidConfig(format!("{} values do not form {dim}-D points", points.len())));
        }
        if points.is_empty() {
            return Err(Error::EmptyData);
        }
        if k == 0 {
            return Err(Error::InvalidBinCount(0));
        }
        if cfg.tol.is_nan() || cfg.tol <= 0.0 || cfg.max_iter == 0 {
            return Err(Error::InvalidConfig("k-means needs tol > 0 and max_iter >= 1".into()));
        }
        if let Some(index) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: index / dim });
        }
        let distinct = count_distinct(points, dim);
        if distinct < k {
            return Err(Error::TooFewDistinctPoints { distinct, k });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut book = Self { dim, centers: plus_plus(points, dim, k, &mut rng), seed: cfg.seed };
        let (mut labels, mut d2) = book.assign(points);
        let mut inertia = d2.iter().sum::<f64>();
        let mut trace = FitTrace { inertia: vec![inertia], converged: false };

        for _ in 0..cfg.max_iter {
            let candidate = Self { dim, centers: book.updated_centers(points, &labels, &d2), seed: cfg.seed };
            let (new_labels, new_d2) = candidate.assign(points);
            let new_inertia = new_d2.iter().sum::<f64>();
            if new_inertia > inertia {
                // Rounding noise near a fixed point; keep the better centers.
                trace.converged = true;
                break;
            }
            let improvement = if inertia > 0.0 { (inertia - new_inertia) / inertia } else { 0.0 };
            book = candidate;
            labels = new_labels;
            d2 = new_d2;
            inertia = new_inertia;
            trace.inertia.push(inertia);
            if improvement < cfg.tol {
                trace.converged = true;
                break;
            }
        }
        Ok((book, trace))
    }

    fn assign(&self, points: &[f64]) -> (Vec<usize>, Vec<f64>) {
        points.par_chunks_exact(self.dim).map(|p| self.nearest(p)).unzip()
    }

    /// Cluster means in index order. An empty cluster is reseeded at the
    /// point farthest from its assigned center.
    fn updated_centers(&self, points: &[f64], labels: &[usize], d2: &[f64]) -> Vec<f64> {
        let k = self.k();
        let mut sums = vec![0.0; k * self.dim];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.chunks_exact(self.dim).zip(labels) {
            counts[l] += 1;
            for (s, v) in sums[l * self.dim..(l + 1) * self.dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut spare: Vec<f64> = d2.to_vec();
        for c in 0..k {
            let row = &mut sums[c * self.dim..(c + 1) * self.dim];
            if counts[c] > 0 {
                row.iter_mut().for_each(|s| *s /= counts[c] as f64);
                continue;
            }
            let far = spare
                .iter()
                .enumerate()
                .fold(0, |best, (i, &d)| if d > spare[best] { i } else { best });
            spare[far] = 0.0;
            row.copy_from_slice(&points[far * self.dim..(far + 1) * self.dim]);
        }
        sums
    }
}

fn count_distinct(points: &[f64], dim: usize) -> usize {
    // +0.0 and -0.0 are the same point.
    let mut rows: Vec<Vec<u64>> =
        points.chunks_exact(dim).map(|p| p.iter().map(|v| (v + 0.0).to_bits()).collect()).collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

/// k-means++ seeding: each new center is drawn with probability
/// proportional to the squared distance to the nearest chosen center.
fn plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = points.par_chunks_exact(dim).map(|p| dist2(p, &centers[..dim])).collect();

    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 {
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
        }
        // Distinct points remain while fewer than k centers exist.
        let pick = pick.expect("a point with positive distance exists");
        let c = points[pick * dim..(pick + 1) * dim].to_vec();
        d2.par_iter_mut()
            .zip(points.par_chunks_exact(dim))
            .for_each(|(d, p)| *d = d.min(dist2(p, &c)));
        centers.extend(c);
    }
    centers
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansTokenizer {
    pub axis_mode: AxisMode,
    /// One 2-D codebook when pooled, `[x, y]` 1-D codebooks when per-axis.
    pub codebooks: Vec<KMeansCodebook>,
}

impl KMeansTokenizer {
    pub fn fit(samples: &[GazeSample], k: u32, axis_mode: AxisMode, cfg: &KMeansConfig) -> Result<Self> {
        Ok(Self::fit_traced(samples, k, axis_mode, cfg)?.0)
    }

    pub fn fit_traced(
        samples: &[GazeSample],
        k: u32,
        axis_mode: AxisMode,
        cfg: &KMeansConfig,
    ) -> Result<(Self, Vec<FitTrace>)> {
        let k = k as usize;
        let fits = match axis_mode {
            AxisMode::Pooled => {
                let flat: Vec<f64> = samples.iter().flat_map(|s| [s.x, s.y]).collect();
                vec![KMeansCodebook::fit(&flat, 2, k, cfg)?]
            }
            AxisMode::PerAxis => (0..2)
                .map(|axis| {
                    let values: Vec<f64> = samples.iter().map(|s| s.axis(axis)).collect();
                    KMeansCodebook::fit(&values, 1, k, cfg)
                })
                .collect::<Result<_>>()?,
        };
        let (codebooks, traces) = fits.into_iter().unzip();
        Ok((Self { axis_mode, codebooks }, traces))
    }

    pub fn k(&self) -> usize {
        self.codebooks[0].k()
    }
}

impl Tokenizer for KMeansTokenizer {
    fn scheme(&self) -> Scheme {
        Scheme::KMeans
    }

    fn base_vocab(&self) -> u32 {
        self.k() as u32
    }

    fn axis_mode(&self) -> AxisMode {
        self.axis_mode
    }

    fn tokens_per_sample(&self) -> usize {
        match self.axis_mode {
            AxisMode::Pooled => 1,
            AxisMode::PerAxis => 2,
        }
    }

    fn encode_samples(&self, samples: &[GazeSample]) -> Result<Vec<TokenId>> {
        Ok(match self.axis_mode {
            AxisMode::Pooled => samples.par_iter().map(|s| self.codebooks[0].encode(&[s.x, s.y])).collect(),
            AxisMode::PerAxis => samples
                .par_iter()
                .flat_map_iter(|s| [self.codebooks[0].encode(&[s.x]), self.codebooks[1].encode(&[s.y])])
                .collect(),
        })
    }

    fn decode_tokens(&self, tokens: &[TokenId]) -> Result<Vec<GazeSample>> {
        match self.axis_mode {
            AxisMode::Pooled => tokens
                .iter()
                .map(|&t| {
                    let c = self.codebooks[0].decode(t)?;
                    Ok(GazeSample::new(c[0], c[1]))
                })
                .collect(),
            AxisMode::PerAxis => sample_chunks(tokens, 2)?
                .map(|c| Ok(GazeSample::new(self.codebooks[0].decode(c[0])?[0], self.codebooks[1].decode(c[1])?[0])))
                .collect(),
        }
    }
}

/// One point of the reconstruction-error-versus-cluster-count curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub mse: f64,
    pub mae: f64,
}

/// Fits one tokenizer per `k` and reports its reconstruction error on the
/// fitting data.
pub fn sweep(samples: &[GazeSample], ks: &[u32], axis_mode: AxisMode, cfg: &KMeansConfig) -> Result<Vec<SweepRow>> {
    ks.iter()
        .map(|&k| {
            let tok = KMeansTokenizer::fit(samples, k, axis_mode, cfg)?;
            let back = tok.decode_tokens(&tok.encode_samples(samples)?)?;
            let n = samples.len() as f64;
            let (se, ae) = back.iter().zip(samples).fold((0.0, 0.0), |(se, ae), (a, b)| {
                let d = a.distance(b);
                (se + d * d, ae + d)
            });
            Ok(SweepRow { k: k as usize, mse: se / n, mae: ae / n })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> KMeansConfig {
        KMeansConfig { seed: 7, ..Default::default() }
    }

    #[test]
    fn exact_cover() {
        let pts = [0.0, 0.0, 1.0, 5.0, -3.0, 2.0, 8.0, 8.0];
        let (book, trace) = KMeansCodebook::fit(&pts, 2, 4, &cfg()).unwrap();
        assert_eq!(*trace.inertia.last().unwrap(), 0.0);
        let mut rows: Vec<Vec<f64>> = book.centers.chunks(2).map(<[f64]>::to_vec).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, vec![vec![-3.0, 2.0], vec![0.0, 0.0], vec![1.0, 5.0], vec![8.0, 8.0]]);
    }

    #[test]
    fn two_blobs_recover_means() {
        let mut pts = Vec::new();
        for _ in 0..50 {
            pts.extend([0.0, 0.0, 10.0, 10.0]);
        }
        let (book, _) = KMeansCodebook::fit(&pts, 2, 2, &cfg()).unwrap();
        let mut rows: Vec<Vec<f64>> = book.centers.chunks(2).map(<[f64]>::to_vec).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, vec![vec![0.0, 0.0], vec![10.0, 10.0]]);
    }

    #[test]
    fn single_cluster_is_mean() {
        let pts = [1.0, 2.0, 3.0, 6.0, 5.0, 10.0];
        let (book, _) = KMeansCodebook::fit(&pts, 2, 1, &cfg()).unwrap();
        assert_eq!(book.centers, vec![3.0, 6.0]);
    }

    #[test]
    fn too_few_distinct() {
        let pts = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0];
        assert!(matches!(
            KMeansCodebook::fit(&pts, 2, 3, &cfg()),
            Err(Error::TooFewDistinctPoints { distinct: 2, k: 3 })
        ));
        // -0.0 and 0.0 collapse.
        assert!(KMeansCodebook::fit(&[0.0, -0.0], 1, 2, &cfg()).is_err());
    }

    #[test]
    fn encode_decode_rules() {
        let book = KMeansCodebook::new(2, vec![0.0, 0.0, 10.0, 10.0], 0).unwrap();
        assert_eq!(book.encode(&[0.1, 0.0]), 0);
        assert_eq!(book.encode(&[5.0, 5.0]), 0);
        assert_eq!(book.encode(&[10.0, 10.0]), 1);
        assert_eq!(book.decode(1).unwrap(), &[10.0, 10.0]);
        assert!(matches!(book.decode(2), Err(Error::TokenOutOfRange { token: 2, vocab: 2 })));
        for t in 0..2 {
            assert_eq!(book.encode(book.decode(t).unwrap()), t);
        }
    }

    #[test]
    fn tie_rule_matches_exhaustive_check() {
        // Oracle: every center at equal distance, lowest index must win.
        let book = KMeansCodebook::new(2, vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0], 0).unwrap();
        let d: Vec<f64> = (0..4).map(|i| dist2(&[0.0, 0.0], book.center(i))).collect();
        assert!(d.iter().all(|&x| x == d[0]));
        assert_eq!(book.encode(&[0.0, 0.0]), 0);
    }

    #[test]
    fn empty_clusters_are_reseeded() {
        let book = KMeansCodebook::new(1, vec![0.0, 100.0, 200.0], 0).unwrap();
        let pts = [0.0, 1.0, 2.0, 50.0];
        let (labels, d2) = book.assign(&pts);
        assert_eq!(labels, vec![0, 0, 0, 0]);
        let centers = book.updated_centers(&pts, &labels, &d2);
        assert_eq!(centers[0], 13.25);
        assert_eq!(centers[1], 50.0);
        assert_eq!(centers[2], 2.0);
    }

    #[test]
    fn per_axis_layout() {
        let samples: Vec<GazeSample> = (0..20).map(|i| GazeSample::new(i as f64, (i % 5) as f64)).collect();
        let tok = KMeansTokenizer::fit(&samples, 4, AxisMode::PerAxis, &cfg()).unwrap();
        assert_eq!(tok.tokens_per_sample(), 2);
        assert_eq!(tok.codebooks[0].dim, 1);
        let toks = tok.encode_samples(&samples).unwrap();
        assert_eq!(toks.len(), 40);
        assert_eq!(tok.decode_tokens(&toks).unwrap().len(), 20);
    }

    #[test]
    fn sweep_rows() {
        let mut samples = Vec::new();
        for i in 0..40 {
            let j = (i % 4) as f64 * 0.1;
            samples.push(GazeSample::new(j, -j));
            samples.push(GazeSample::new(20.0 + j, 20.0 - j));
        }
        let rows = sweep(&samples, &[1, 2, 8], AxisMode::Pooled, &cfg()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].mse < rows[0].mse);
        assert_eq!(rows[2].mse, 0.0);
    }

    proptest! {
        #[test]
        fn inertia_never_increases(seed in 0u64..1000, pts in prop::collection::vec(-50.0..50.0f64, 40..400)) {
            let pts = &pts[..pts.len() / 2 * 2];
            let k = 1 + (seed as usize % 8);
            prop_assume!(count_distinct(pts, 2) >= k);
            let (_, trace) = KMeansCodebook::fit(pts, 2, k, &KMeansConfig { seed, ..Default::default() }).unwrap();
            for w in trace.inertia.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }

        #[test]
        fn fit_is_reproducible(seed in 0u64..1000, pts in prop::collection::vec(-5.0..5.0f64, 20..100)) {
            prop_assume!(count_distinct(&pts, 1) >= 3);
            let cfg = KMeansConfig { seed, ..Default::default() };
            let a = KMeansCodebook::fit(&pts, 1, 3, &cfg).unwrap();
            let b = KMeansCodebook::fit(&pts, 1, 3, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
