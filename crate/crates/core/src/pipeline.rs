//! End-to-end evaluation: split, fit on train, encode/decode test, score,
//! and optionally compress with BPE trained on the train tokens.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bpe;
use crate::dataset::{load_dataset, split, synth_dataset, Recording, SynthConfig};
use crate::error::{Error, Result};
use crate::io::{load_codebook, load_stream, Codebook};
use crate::kmeans::{KMeansConfig, KMeansTokenizer};
use crate::metrics::{self, histogram2d, jsd};
use crate::mulaw::MuLawSearch;
use crate::report::{EvalReport, EvalRow};
use crate::sequence::{derive_velocity, integrate_positions, DistributionKind, GazeSample, GazeSequence};
use crate::stream::AxisMode;
use crate::tokenizer::{fit, FitOptions, FittedTokenizer, Scheme, Tokenizer, DEFAULT_VOCAB};
use crate::binary::TOKENS_PER_SAMPLE as BINARY_TOKENS_PER_SAMPLE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Manifest { path: PathBuf },
    Synthetic { config: SynthConfig, recordings: usize },
}

/// Output of the external VQ-VAE trainer for one model: its codebook, the
/// token stream of the test recordings and a manifest of reconstructions
/// (in the model's distribution) whose ids match the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqVaeRun {
    pub codebook: PathBuf,
    pub stream: PathBuf,
    pub reconstructions: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub schemes: Vec<Scheme>,
    pub distributions: Vec<DistributionKind>,
    pub axis_mode: AxisMode,
    pub vocab: u32,
    /// `None` disables BPE; otherwise the merge budget.
    pub bpe_merges: Option<usize>,
    pub data: DataSource,
    pub train_fraction: f64,
    pub seed: u64,
    pub kmeans: KMeansConfig,
    pub mulaw: MuLawSearch,
    pub vqvae_runs: Vec<VqVaeRun>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::Binary, Scheme::MuLaw, Scheme::Quantile, Scheme::KMeans],
            distributions: vec![DistributionKind::Position, DistributionKind::Velocity],
            axis_mode: AxisMode::Pooled,
            vocab: DEFAULT_VOCAB,
            bpe_merges: None,
            data: DataSource::Synthetic { config: SynthConfig::default(), recordings: 10 },
            train_fraction: 0.8,
            seed: 0,
            kmeans: KMeansConfig::default(),
            mulaw: MuLawSearch::default(),
            vqvae_runs: Vec::new(),
        }
    }
}

impl PipelineConfig {
    /// Validates the configuration and folds the global seed into the
    /// per-module settings, so the returned value fully describes a run.
    pub fn resolve(mut self) -> Result<Self> {
        if self.schemes.is_empty() && self.vqvae_runs.is_empty() {
            return Err(Error::InvalidConfig("no tokenizer selected".into()));
        }
        if self.schemes.contains(&Scheme::VqVae) {
            return Err(Error::InvalidConfig("VQ-VAE models are evaluated through vqvae_runs".into()));
        }
        if self.distributions.is_empty() {
            return Err(Error::InvalidConfig("no distribution selected".into()));
        }
        if self.vocab < 2 {
            return Err(Error::InvalidBinCount(self.vocab as usize));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidFraction(self.train_fraction));
        }
        if self.bpe_merges == Some(0) {
            return Err(Error::InvalidConfig("bpe_merges must be positive".into()));
        }
        if !(self.kmeans.tol > 0.0 && self.kmeans.max_iter > 0) {
            return Err(Error::InvalidConfig("k-means needs tol > 0 and max_iter > 0".into()));
        }
        if let DataSource::Synthetic { config, recordings } = &self.data {
            config.validate()?;
            if *recordings < 2 {
                return Err(Error::InvalidConfig("synthetic data needs at least 2 recordings".into()));
            }
        }
        self.schemes.sort();
        self.schemes.dedup();
        self.distributions.sort();
        self.distributions.dedup();
        self.kmeans.seed = self.seed;
        Ok(self)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions { vocab: self.vocab, axis_mode: self.axis_mode, kmeans: self.kmeans.clone(), mulaw: self.mulaw.clone() }
    }
}

/// Position recordings of a configured data source, sorted by id.
pub struct LoadedData {
    pub name: String,
    pub recordings: Vec<Recording>,
    pub dropped_rows: usize,
}

pub fn load_data(source: &DataSource) -> Result<LoadedData> {
    match source {
        DataSource::Manifest { path } => {
            let ds = load_dataset(path)?;
            Ok(LoadedData { name: ds.name, recordings: ds.recordings, dropped_rows: ds.dropped_rows })
        }
        DataSource::Synthetic { config, recordings } => Ok(LoadedData {
            name: "synthetic".into(),
            recordings: synth_dataset(config, *recordings)?,
            dropped_rows: 0,
        }),
    }
}

/// The recordings viewed in `kind`; position recordings shorter than two
/// samples have no velocity and are skipped.
pub fn view(recordings: &[Recording], kind: DistributionKind) -> Result<Vec<(String, GazeSequence)>> {
    recordings
        .iter()
        .filter(|r| kind == DistributionKind::Position || r.seq.len() >= 2)
        .map(|r| {
            let seq = match kind {
                DistributionKind::Position => r.seq.clone(),
                DistributionKind::Velocity => derive_velocity(&r.seq)?,
            };
            Ok((r.id.clone(), seq))
        })
        .collect()
}

fn positions_of(gt_positions: &GazeSequence, seq: &GazeSequence) -> Result<GazeSequence> {
    match seq.kind() {
        DistributionKind::Position => Ok(seq.clone()),
        DistributionKind::Velocity => integrate_positions(gt_positions.samples()[0], seq),
    }
}

fn velocities_of(seq: &GazeSequence) -> Result<Vec<GazeSample>> {
    match seq.kind() {
        DistributionKind::Velocity => Ok(seq.samples().to_vec()),
        DistributionKind::Position if seq.len() >= 2 => Ok(derive_velocity(seq)?.into_samples()),
        DistributionKind::Position => Ok(Vec::new()),
    }
}

/// Reconstruction metrics shared by every row of one tokenizer.
#[derive(Debug, Clone, Copy)]
struct Scores {
    mse: f64,
    mae: f64,
    acc_mse: Option<f64>,
    acc_mae: Option<f64>,
    dtw: f64,
    jsd: f64,
    vel_jsd: f64,
}

struct Pair<'a> {
    gt_positions: &'a GazeSequence,
    gt: &'a GazeSequence,
    decoded: &'a GazeSequence,
}

fn score(pairs: &[Pair<'_>]) -> Result<Scores> {
    struct PerRec {
        se: f64,
        ae: f64,
        acc_se: f64,
        acc_ae: f64,
        acc_n: usize,
        n: usize,
        dtw: f64,
        pos_gt: Vec<GazeSample>,
        pos_dec: Vec<GazeSample>,
        vel_gt: Vec<GazeSample>,
        vel_dec: Vec<GazeSample>,
    }
    let per: Vec<PerRec> = pairs
        .par_iter()
        .map(|p| {
            let n = p.gt.len();
            let mse = metrics::mse(p.gt, p.decoded)?;
            let mae = metrics::mae(p.gt, p.decoded)?;
            let pos_dec = positions_of(p.gt_positions, p.decoded)?;
            let (acc_se, acc_ae, acc_n) = if p.gt.kind() == DistributionKind::Velocity {
                let m = pos_dec.len() as f64;
                (
                    metrics::mse(&pos_dec, p.gt_positions)? * m,
                    metrics::mae(&pos_dec, p.gt_positions)? * m,
                    pos_dec.len(),
                )
            } else {
                (0.0, 0.0, 0)
            };
            Ok(PerRec {
                se: mse * n as f64,
                ae: mae * n as f64,
                acc_se,
                acc_ae,
                acc_n,
                n,
                dtw: metrics::dtw(p.gt, p.decoded)?,
                pos_gt: p.gt_positions.samples().to_vec(),
                vel_gt: velocities_of(p.gt_positions)?,
                vel_dec: velocities_of(&pos_dec)?,
                pos_dec: pos_dec.into_samples(),
            })
        })
        .collect::<Result<_>>()?;
    // Sequential reductions keep results independent of the thread count.
    let n: usize = per.iter().map(|r| r.n).sum();
    let acc_n: usize = per.iter().map(|r| r.acc_n).sum();
    let cat = |f: fn(&PerRec) -> &Vec<GazeSample>| per.iter().flat_map(|r| f(r).iter().copied()).collect::<Vec<_>>();
    let (pos_gt, pos_dec, vel_gt, vel_dec) = (cat(|r| &r.pos_gt), cat(|r| &r.pos_dec), cat(|r| &r.vel_gt), cat(|r| &r.vel_dec));
    let hist_jsd = |gt: &[GazeSample], dec: &[GazeSample]| -> Result<f64> {
        if gt.is_empty() {
            return Ok(f64::NAN);
        }
        let h_gt = histogram2d(gt, gt)?;
        let h_dec = histogram2d(dec, gt)?;
        if h_dec.total() == 0 {
            // Every decoded sample fell outside the ground-truth range.
            return Ok(1.0);
        }
        jsd(&h_gt, &h_dec)
    };
    Ok(Scores {
        mse: per.iter().map(|r| r.se).sum::<f64>() / n as f64,
        mae: per.iter().map(|r| r.ae).sum::<f64>() / n as f64,
        acc_mse: (acc_n > 0).then(|| per.iter().map(|r| r.acc_se).sum::<f64>() / acc_n as f64),
        acc_mae: (acc_n > 0).then(|| per.iter().map(|r| r.acc_ae).sum::<f64>() / acc_n as f64),
        dtw: per.iter().map(|r| r.dtw).sum::<f64>() / per.len() as f64,
        jsd: hist_jsd(&pos_gt, &pos_dec)?,
        vel_jsd: hist_jsd(&vel_gt, &vel_dec)?,
    })
}

struct Counts {
    vocab_size: u32,
    original: usize,
    compressed: usize,
    baseline: usize,
}

fn row(tokenizer: String, dataset: &str, kind: DistributionKind, axis_mode: AxisMode, s: &Scores, c: Counts) -> Result<EvalRow> {
    let stats = bpe::compression_stats(c.original, c.compressed, c.baseline)?;
    Ok(EvalRow {
        tokenizer,
        dataset: dataset.to_string(),
        distribution: kind,
        axis_mode,
        bpe: false,
        mse: s.mse,
        mae: s.mae,
        acc_mse: s.acc_mse,
        acc_mae: s.acc_mae,
        dtw: s.dtw,
        jsd: s.jsd,
        vel_jsd: s.vel_jsd,
        vocab_size: c.vocab_size,
        tokens: c.compressed,
        baseline_tokens: c.baseline,
        ratio: stats.ratio,
        space_saving: stats.space_saving,
        bpe_ratio: stats.bpe_ratio,
    })
}

fn seqs(view: &[(String, GazeSequence)]) -> Vec<GazeSequence> {
    view.iter().map(|(_, s)| s.clone()).collect()
}

fn eval_tokenizer(
    cfg: &PipelineConfig,
    dataset: &str,
    scheme: Scheme,
    kind: DistributionKind,
    train: &[Recording],
    test: &[Recording],
) -> Result<Vec<EvalRow>> {
    let train_view = seqs(&view(train, kind)?);
    let test_view = seqs(&view(test, kind)?);
    if test_view.is_empty() {
        return Err(Error::InvalidConfig("test split has no usable recordings".into()));
    }
    let tok = fit(scheme, &train_view, &cfg.fit_options())?;
    let ts = tok.encode(&test_view)?;
    let decoded = tok.decode(&ts)?;
    let pairs: Vec<Pair<'_>> = test
        .iter()
        .filter(|r| kind == DistributionKind::Position || r.seq.len() >= 2)
        .zip(&test_view)
        .zip(&decoded)
        .map(|((r, gt), dec)| Pair { gt_positions: &r.seq, gt, decoded: dec })
        .collect();
    let scores = score(&pairs)?;
    let baseline = test_view.iter().map(|s| s.len()).sum::<usize>() * BINARY_TOKENS_PER_SAMPLE;
    let axis_mode = tok.axis_mode();
    let plain = Counts { vocab_size: ts.vocab_size, original: ts.len(), compressed: ts.len(), baseline };
    let mut rows = vec![row(scheme.as_str().into(), dataset, kind, axis_mode, &scores, plain)?];
    if let Some(merges) = cfg.bpe_merges {
        let corpus = tok.encode(&train_view)?;
        let table = bpe::train(&corpus, merges)?;
        let packed = bpe::encode(&ts, &table)?;
        if bpe::decode(&packed, &table)?.tokens != ts.tokens {
            return Err(Error::MalformedStream("BPE round trip altered the token stream".into()));
        }
        let counts = Counts { vocab_size: packed.vocab_size, original: ts.len(), compressed: packed.len(), baseline };
        let mut r = row(scheme.as_str().into(), dataset, kind, axis_mode, &scores, counts)?;
        r.bpe = true;
        rows.push(r);
    }
    Ok(rows)
}

fn eval_vqvae(run: &VqVaeRun, dataset: &str, recordings: &[Recording]) -> Result<EvalRow> {
    let book = match load_codebook(&run.codebook)? {
        Codebook::VqVae(b) => b,
        _ => return Err(Error::InvalidConfig(format!("{} is not a VQ-VAE codebook", run.codebook.display()))),
    };
    let ts = load_stream(&run.stream)?;
    book.check_stream(&ts)?;
    if ts.distribution != book.variant {
        return Err(Error::WrongDistribution { expected: book.variant.as_str(), got: ts.distribution.as_str() });
    }
    let recon = load_dataset(&run.reconstructions)?;
    let kind = book.variant;
    let mut owned = Vec::with_capacity(recon.recordings.len());
    for rec in &recon.recordings {
        let gt_rec = recordings
            .iter()
            .find(|r| r.id == rec.id)
            .ok_or_else(|| Error::InvalidConfig(format!("reconstruction {:?} has no matching recording", rec.id)))?;
        let gt = match kind {
            DistributionKind::Position => gt_rec.seq.clone(),
            DistributionKind::Velocity => derive_velocity(&gt_rec.seq)?,
        };
        // Exports may be trimmed to whole windows; compare the common prefix.
        if rec.seq.len() > gt.len() {
            return Err(Error::LengthMismatch { left: rec.seq.len(), right: gt.len() });
        }
        let gt = gt.prefix(rec.seq.len())?;
        let extra = usize::from(kind == DistributionKind::Velocity);
        let gt_positions = gt_rec.seq.prefix(rec.seq.len() + extra)?;
        let decoded = GazeSequence::new(rec.seq.samples().to_vec(), gt.sample_rate_hz(), kind)?;
        owned.push((gt_positions, gt, decoded));
    }
    let pairs: Vec<Pair<'_>> = owned.iter().map(|(p, g, d)| Pair { gt_positions: p, gt: g, decoded: d }).collect();
    let scores = score(&pairs)?;
    let baseline = owned.iter().map(|(_, g, _)| g.len()).sum::<usize>() * BINARY_TOKENS_PER_SAMPLE;
    let counts = Counts { vocab_size: ts.vocab_size, original: ts.len(), compressed: ts.len(), baseline };
    row(book.stream_id(), dataset, kind, AxisMode::Pooled, &scores, counts)
}

/// Runs every configured (scheme, distribution) pair on `threads` workers
/// (0 = all cores). Rows come out in canonical order.
pub fn run_eval(cfg: PipelineConfig, threads: usize) -> Result<EvalReport<PipelineConfig>> {
    let cfg = cfg.resolve()?;
    with_threads(threads, || {
        let data = load_data(&cfg.data)?;
        let (train, test) = split(&data.recordings, cfg.train_fraction, cfg.seed)?;
        let mut rows = Vec::new();
        for &kind in &cfg.distributions {
            for &scheme in &cfg.schemes {
                rows.extend(eval_tokenizer(&cfg, &data.name, scheme, kind, &train, &test)?);
            }
        }
        for run in &cfg.vqvae_runs {
            rows.push(eval_vqvae(run, &data.name, &data.recordings)?);
        }
        Ok(EvalReport {
            train_recordings: train.iter().map(|r| r.id.clone()).collect(),
            test_recordings: test.iter().map(|r| r.id.clone()).collect(),
            dropped_rows: data.dropped_rows,
            config: cfg.clone(),
            rows,
        })
    })
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = all cores).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

// ---------------------------------------------------------------- sweeps

/// Reconstruction error on the test split for one cluster count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSweepRow {
    pub k: usize,
    pub mse: f64,
    pub mae: f64,
}

pub fn kmeans_sweep(cfg: PipelineConfig, ks: &[u32], threads: usize) -> Result<Vec<ClusterSweepRow>> {
    let cfg = cfg.resolve()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidConfig("cluster counts must be positive".into()));
    }
    let kind = cfg.distributions[0];
    with_threads(threads, || {
        let data = load_data(&cfg.data)?;
        let (train, test) = split(&data.recordings, cfg.train_fraction, cfg.seed)?;
        let train_samples: Vec<GazeSample> =
            view(&train, kind)?.into_iter().flat_map(|(_, s)| s.into_samples()).collect();
        let test_samples: Vec<GazeSample> =
            view(&test, kind)?.into_iter().flat_map(|(_, s)| s.into_samples()).collect();
        ks.iter()
            .map(|&k| {
                let tok = KMeansTokenizer::fit(&train_samples, k, cfg.axis_mode, &cfg.kmeans)?;
                let back = tok.decode_tokens(&tok.encode_samples(&test_samples)?)?;
                Ok(ClusterSweepRow {
                    k: k as usize,
                    mse: metrics::mse_samples(&test_samples, &back)?,
                    mae: metrics::mae_samples(&test_samples, &back)?,
                })
            })
            .collect()
    })
}

/// Accumulative error of the first `length` integrated velocity samples,
/// averaged over the test recordings that are at least that long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthCurveRow {
    pub length: usize,
    pub recordings: usize,
    pub acc_mse: f64,
    pub acc_mae: f64,
}

/// Per-position Euclidean error of positions rebuilt from decoded velocities.
pub fn accumulated_distances(tok: &FittedTokenizer, positions: &GazeSequence) -> Result<Vec<f64>> {
    let vel = derive_velocity(positions)?;
    let ts = tok.encode(std::slice::from_ref(&vel))?;
    let decoded = tok.decode(&ts)?.pop().ok_or(Error::EmptySequence)?;
    let rebuilt = integrate_positions(positions.samples()[0], &decoded)?;
    Ok(rebuilt.samples().iter().zip(positions.samples()).map(|(a, b)| a.distance(b)).collect())
}

pub fn accumulative_curve(cfg: PipelineConfig, scheme: Scheme, lengths: &[usize], threads: usize) -> Result<Vec<LengthCurveRow>> {
    let cfg = cfg.resolve()?;
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(Error::InvalidConfig("curve lengths must be positive".into()));
    }
    with_threads(threads, || {
        let data = load_data(&cfg.data)?;
        let (train, test) = split(&data.recordings, cfg.train_fraction, cfg.seed)?;
        let train_view = seqs(&view(&train, DistributionKind::Velocity)?);
        let tok = fit(scheme, &train_view, &cfg.fit_options())?;
        let dists: Vec<Vec<f64>> = test
            .par_iter()
            .filter(|r| r.seq.len() >= 2)
            .map(|r| accumulated_distances(&tok, &r.seq))
            .collect::<Result<_>>()?;
        Ok(length_curve(&dists, lengths))
    })
}

/// Averages prefix errors. Position 0 is the shared start point, so a curve
/// point of `length` velocity samples covers positions `0..=length`.
pub fn length_curve(dists: &[Vec<f64>], lengths: &[usize]) -> Vec<LengthCurveRow> {
    lengths
        .iter()
        .map(|&length| {
            let long: Vec<&Vec<f64>> = dists.iter().filter(|d| d.len() > length).collect();
            let per = |sq: bool| {
                long.iter()
                    .map(|d| d[..=length].iter().map(|&e| if sq { e * e } else { e }).sum::<f64>() / (length + 1) as f64)
                    .sum::<f64>()
                    / long.len() as f64
            };
            LengthCurveRow { length, recordings: long.len(), acc_mse: per(true), acc_mae: per(false) }
        })
        .collect()
}

/// One point of an externally produced codebook-size sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodebookSizeRow {
    pub codebook_size: usize,
    pub mse: f64,
    pub mae: f64,
}

/// Reads a `codebook_size,mse,mae` CSV, checks it and returns the rows
/// sorted by size.
pub fn ingest_codebook_sweep(path: &std::path::Path) -> Result<Vec<CodebookSizeRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows: Vec<CodebookSizeRow> = reader.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err(Error::NoValidRows(path.to_path_buf()));
    }
    for r in &rows {
        if r.codebook_size < 2 {
            return Err(Error::InvalidConfig(format!("codebook size {} is below 2", r.codebook_size)));
        }
        if !(r.mse.is_finite() && r.mae.is_finite() && r.mse >= 0.0 && r.mae >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid error values for size {}", r.codebook_size)));
        }
    }
    rows.sort_by_key(|r| r.codebook_size);
    if rows.windows(2).any(|w| w[0].codebook_size == w[1].codebook_size) {
        return Err(Error::InvalidConfig("duplicate codebook size in sweep".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        PipelineConfig {
            vocab: 32,
            data: DataSource::Synthetic {
                config: SynthConfig { n_fixations: 6, fixation_len_range: (10, 30), ..Default::default() },
                recordings: 5,
            },
            mulaw: MuLawSearch { grid: 8, refine_rounds: 1, refine_grid: 5, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn eval_rows_and_constants() {
        let rep = run_eval(small(), 2).unwrap();
        assert_eq!(rep.rows.len(), 8);
        for r in &rep.rows {
            let expected = match (r.tokenizer.as_str(), r.axis_mode) {
                ("binary", _) => 1.0,
                ("k_means", AxisMode::Pooled) => 8.0,
                _ => 4.0,
            };
            assert_eq!(r.ratio, expected, "{}", r.tokenizer);
            assert_eq!(r.acc_mae.is_some(), r.distribution == DistributionKind::Velocity);
            if r.tokenizer == "binary" {
                assert_eq!((r.mse, r.mae, r.dtw, r.jsd), (0.0, 0.0, 0.0, 0.0));
                assert_eq!(r.acc_mae.unwrap_or(0.0), 0.0);
            }
        }
        assert_eq!(rep.test_recordings.len(), 1);
    }

    #[test]
    fn bpe_rows() {
        let rep = run_eval(PipelineConfig { bpe_merges: Some(50), schemes: vec![Scheme::Quantile], ..small() }, 1).unwrap();
        assert_eq!(rep.rows.len(), 4);
        let (plain, packed) = (&rep.rows[0], &rep.rows[1]);
        assert!(!plain.bpe && packed.bpe);
        assert_eq!(plain.mae, packed.mae);
        assert!(packed.tokens <= plain.tokens);
        assert!(packed.vocab_size > plain.vocab_size);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(PipelineConfig { train_fraction: 1.0, ..small() }.resolve(), Err(Error::InvalidFraction(_))));
        assert!(PipelineConfig { schemes: vec![Scheme::VqVae], ..small() }.resolve().is_err());
        assert!(PipelineConfig { bpe_merges: Some(0), ..small() }.resolve().is_err());
        let missing = PipelineConfig { data: DataSource::Manifest { path: "/nonexistent/m.json".into() }, ..small() };
        assert_eq!(run_eval(missing, 1).unwrap_err().category(), "config");
    }

    #[test]
    fn config_json_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"schemes": ["quantile"], "seed": 4}"#).unwrap();
        assert_eq!(cfg.vocab, 2048);
        assert_eq!(cfg.resolve().unwrap().kmeans.seed, 4);
    }

    #[test]
    fn curve_prefix_means() {
        let rows = length_curve(&[vec![0.0, 1.0, 2.0], vec![0.0, 3.0]], &[1, 2, 5]);
        assert_eq!(rows[0].recordings, 2);
        assert_eq!(rows[0].acc_mae, (0.5 + 1.5) / 2.0);
        assert_eq!(rows[1].acc_mae, 1.0);
        assert_eq!(rows[1].acc_mse, 5.0 / 3.0);
        assert_eq!(rows[2].recordings, 0);
        assert!(rows[2].acc_mae.is_nan());
    }

    #[test]
    fn sweep_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "codebook_size,mse,mae\n2048,0.1,0.2\n64,0.5,0.6\n").unwrap();
        let rows = ingest_codebook_sweep(&p).unwrap();
        assert_eq!(rows.iter().map(|r| r.codebook_size).collect::<Vec<_>>(), [64, 2048]);
        std::fs::write(&p, "codebook_size,mse,mae\n1,0.1,0.2\n").unwrap();
        assert!(ingest_codebook_sweep(&p).is_err());
    }
}
