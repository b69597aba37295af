//! Recordings, dataset manifests, train/test splitting and a synthetic gaze
//! generator.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_csv, resolve, CsvSchema};
use crate::sequence::{GazeSample, GazeSequence};

/// One gaze recording. `id` is unique within a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub seq: GazeSequence,
    pub source: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
}

/// JSON description of a dataset: CSV files relative to the manifest itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    #[serde(default)]
    pub sample_rate_hz: Option<f64>,
    #[serde(default)]
    pub schema: CsvSchema,
    pub recordings: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    /// Sorted by id.
    pub recordings: Vec<Recording>,
    pub dropped_rows: usize,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidConfig(format!("cannot read dataset manifest {}: {e}", path.display()))
    })?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("invalid dataset manifest {}: {e}", path.display())))?;
    let mut seen = BTreeSet::new();
    for r in &manifest.recordings {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::InvalidConfig(format!("duplicate recording id {:?}", r.id)));
        }
    }
    if manifest.recordings.is_empty() {
        return Err(Error::InvalidConfig(format!("manifest {} lists no recordings", path.display())));
    }
    Ok(manifest)
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut recordings = Vec::with_capacity(manifest.recordings.len());
    let mut dropped_rows = 0;
    for entry in &manifest.recordings {
        let loaded = load_csv(&resolve(base, &entry.path), &manifest.schema, manifest.sample_rate_hz)?;
        dropped_rows += loaded.dropped_rows;
        recordings.push(Recording { id: entry.id.clone(), ..loaded.recording });
    }
    recordings.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Dataset { name: manifest.name, recordings, dropped_rows })
}

/// Splits recordings into train and test sets without cutting any recording.
/// Both halves are non-empty and sorted by id.
pub fn split(recordings: &[Recording], train_fraction: f64, seed: u64) -> Result<(Vec<Recording>, Vec<Recording>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    let n = recordings.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 recordings to split, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| recordings[a].id.cmp(&recordings[b].id));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let pick = |idx: &[usize]| {
        let mut v: Vec<Recording> = idx.iter().map(|&i| recordings[i].clone()).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Parameters of the synthetic fixation/saccade generator. Ranges are
/// inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_fixations: usize,
    pub fixation_len_range: (usize, usize),
    pub saccade_amp_range_deg: (f64, f64),
    pub saccade_len_range: (usize, usize),
    pub noise_std_deg: f64,
    /// Constant slow drift added during fixations.
    #[serde(default)]
    pub drift_deg_per_sample: (f64, f64),
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_fixations: 20,
            fixation_len_range: (40, 120),
            saccade_amp_range_deg: (2.0, 15.0),
            saccade_len_range: (3, 8),
            noise_std_deg: 0.02,
            drift_deg_per_sample: (0.0, 0.0),
            sample_rate_hz: 100.0,
            seed: 0,
        }
    }
}

/// Coordinates are snapped to multiples of this step. Within the generator's
/// range every such value, and every difference of two, is exact in `f32`.
pub const SYNTH_LATTICE: f64 = 1.0 / 65536.0;
/// Fixation centers stay inside this square, in degrees.
pub const SYNTH_FIELD_DEG: f64 = 30.0;

fn snap(v: f64) -> f64 {
    (v / SYNTH_LATTICE).round() * SYNTH_LATTICE
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synth: {m}")));
        let (f0, f1) = self.fixation_len_range;
        let (s0, s1) = self.saccade_len_range;
        let (a0, a1) = self.saccade_amp_range_deg;
        let (dx, dy) = self.drift_deg_per_sample;
        if self.n_fixations == 0 {
            return bad("n_fixations must be positive");
        }
        if f0 == 0 || f0 > f1 {
            return bad("fixation_len_range must be a positive range");
        }
        if s0 == 0 || s0 > s1 {
            return bad("saccade_len_range must be a positive range");
        }
        if !(a0.is_finite() && a1.is_finite() && a0 >= 0.0 && a0 <= a1 && a1 <= SYNTH_FIELD_DEG) {
            return bad("saccade_amp_range_deg must be a range within [0, 30]");
        }
        if !(self.noise_std_deg.is_finite() && self.noise_std_deg >= 0.0 && self.noise_std_deg <= 1.0) {
            return bad("noise_std_deg must lie in [0, 1]");
        }
        if !(dx.is_finite() && dy.is_finite() && dx.abs() <= 0.1 && dy.abs() <= 0.1) {
            return bad("drift_deg_per_sample components must lie in [-0.1, 0.1]");
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive");
        }
        Ok(())
    }
}

fn generate(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<GazeSequence> {
    let noise = Normal::new(0.0, cfg.noise_std_deg).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let (dx, dy) = cfg.drift_deg_per_sample;
    let mut out = Vec::new();
    let mut center = GazeSample::new(0.0, 0.0);
    for f in 0..cfg.n_fixations {
        if f > 0 {
            let amp = rng.random_range(cfg.saccade_amp_range_deg.0..=cfg.saccade_amp_range_deg.1);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let mut target = GazeSample::new(center.x + amp * angle.cos(), center.y + amp * angle.sin());
            // Reflect back into the field instead of drifting off screen.
            if target.x.abs() > SYNTH_FIELD_DEG {
                target.x = center.x - amp * angle.cos();
            }
            if target.y.abs() > SYNTH_FIELD_DEG {
                target.y = center.y - amp * angle.sin();
            }
            let len = rng.random_range(cfg.saccade_len_range.0..=cfg.saccade_len_range.1);
            let start = *out.last().unwrap_or(&center);
            for i in 1..=len {
                let t = i as f64 / (len + 1) as f64;
                out.push(GazeSample::new(
                    snap(start.x + t * (target.x - start.x)),
                    snap(start.y + t * (target.y - start.y)),
                ));
            }
            center = target;
        }
        let len = rng.random_range(cfg.fixation_len_range.0..=cfg.fixation_len_range.1);
        for i in 0..len {
            let jx = if cfg.noise_std_deg > 0.0 { noise.sample(rng) } else { 0.0 };
            let jy = if cfg.noise_std_deg > 0.0 { noise.sample(rng) } else { 0.0 };
            out.push(GazeSample::new(
                snap(center.x + i as f64 * dx + jx),
                snap(center.y + i as f64 * dy + jy),
            ));
        }
        center = GazeSample::new(
            (center.x + len as f64 * dx).clamp(-SYNTH_FIELD_DEG, SYNTH_FIELD_DEG),
            (center.y + len as f64 * dy).clamp(-SYNTH_FIELD_DEG, SYNTH_FIELD_DEG),
        );
    }
    GazeSequence::positions(out, cfg.sample_rate_hz)
}

fn synth_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Alternating jittered fixations and linear saccade ramps: `n_fixations`
/// fixations joined by `n_fixations - 1` saccades.
pub fn synth_gaze(cfg: &SynthConfig) -> Result<Recording> {
    cfg.validate()?;
    let seq = generate(cfg, &mut synth_rng(cfg.seed, 0))?;
    Ok(Recording { id: format!("synth-{}", cfg.seed), seq, source: PathBuf::new() })
}

/// `n` independent recordings named `synth-0000`, `synth-0001`, ...
pub fn synth_dataset(cfg: &SynthConfig, n: usize) -> Result<Vec<Recording>> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("synth: need at least one recording".into()));
    }
    (0..n)
        .map(|i| {
            let seq = generate(cfg, &mut synth_rng(cfg.seed, i as u64))?;
            Ok(Recording { id: format!("synth-{i:04}"), seq, source: PathBuf::new() })
        })
        .collect()
}
