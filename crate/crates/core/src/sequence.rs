//! Gaze samples, sequences and the sequence calculus shared by every tokenizer.
//!
//! Coordinates are visual angles in degrees. Velocities are per-sample
//! displacements (degrees per sample), so integrating a velocity sequence is
//! a plain prefix sum starting from a known position.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One 2-D gaze sample in degrees of visual angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GazeSample {
    pub x: f64,
    pub y: f64,
}

impl GazeSample {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => panic!("gaze samples have two axes, got axis {axis}"),
        }
    }

    /// Rounds both coordinates to the nearest `f32`, the native precision of
    /// recorded gaze data.
    pub fn to_f32_precision(self) -> Self {
        Self::new(self.x as f32 as f64, self.y as f32 as f64)
    }

    pub fn distance(&self, other: &GazeSample) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for GazeSample {
    fn from((x, y): (f64, f64)) -> Self {
        Self::new(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Position,
    Velocity,
}

impl DistributionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistributionKind::Position => "position",
            DistributionKind::Velocity => "velocity",
        }
    }
}

impl std::fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A non-empty, finite, ordered run of gaze samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence")]
pub struct GazeSequence {
    samples: Vec<GazeSample>,
    sample_rate_hz: f64,
    kind: DistributionKind,
}

#[derive(Deserialize)]
struct RawSequence {
    samples: Vec<GazeSample>,
    sample_rate_hz: f64,
    kind: DistributionKind,
}

impl TryFrom<RawSequence> for GazeSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        GazeSequence::new(raw.samples, raw.sample_rate_hz, raw.kind)
    }
}

impl GazeSequence {
    pub fn new(samples: Vec<GazeSample>, sample_rate_hz: f64, kind: DistributionKind) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySequence);
        }
        Self::new_allow_empty(samples, sample_rate_hz, kind)
    }

    /// Like [`GazeSequence::new`] but accepts zero samples. Only velocity
    /// sequences derived from a single position are legitimately empty.
    pub(crate) fn new_allow_empty(
        samples: Vec<GazeSample>,
        sample_rate_hz: f64,
        kind: DistributionKind,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidSampleRate(sample_rate_hz));
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { samples, sample_rate_hz, kind })
    }

    pub fn positions(samples: Vec<GazeSample>, sample_rate_hz: f64) -> Result<Self> {
        Self::new(samples, sample_rate_hz, DistributionKind::Position)
    }

    pub fn velocities(samples: Vec<GazeSample>, sample_rate_hz: f64) -> Result<Self> {
        Self::new_allow_empty(samples, sample_rate_hz, DistributionKind::Velocity)
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<GazeSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    /// Scalar values of one axis.
    pub fn axis_values(&self, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.axis(axis)).collect()
    }

    /// Leading sub-sequence of `len` samples.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        Self::new(self.samples[..len.min(self.len())].to_vec(), self.sample_rate_hz, self.kind)
    }

    /// Multiplies every sample by `factor`, e.g. the sample rate to turn
    /// per-sample displacements into degrees per second.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let samples = self.samples.iter().map(|s| GazeSample::new(s.x * factor, s.y * factor)).collect();
        Self::new_allow_empty(samples, self.sample_rate_hz, self.kind)
    }
}

/// Per-sample displacements `v_i = p_i - p_{i-1}`.
pub fn derive_velocity(seq: &GazeSequence) -> Result<GazeSequence> {
    expect_kind(seq, DistributionKind::Position)?;
    if seq.len() < 2 {
        return Err(Error::SequenceTooShort { needed: 2, got: seq.len() });
    }
    let vel = seq
        .samples
        .windows(2)
        .map(|w| GazeSample::new(w[1].x - w[0].x, w[1].y - w[0].y))
        .collect();
    GazeSequence::new_allow_empty(vel, seq.sample_rate_hz, DistributionKind::Velocity)
}

/// Rebuilds positions from a start point and per-sample displacements:
/// `p_i = p_0 + sum_{j<=i} v_j`. The result has one more sample than `vel`.
pub fn integrate_positions(p0: GazeSample, vel: &GazeSequence) -> Result<GazeSequence> {
    expect_kind(vel, DistributionKind::Velocity)?;
    if !p0.is_finite() {
        return Err(Error::NonFinite { index: 0 });
    }
    let mut out = Vec::with_capacity(vel.len() + 1);
    let mut acc = p0;
    out.push(acc);
    for v in &vel.samples {
        acc = GazeSample::new(acc.x + v.x, acc.y + v.y);
        out.push(acc);
    }
    GazeSequence::new(out, vel.sample_rate_hz, DistributionKind::Position)
}

fn expect_kind(seq: &GazeSequence, expected: DistributionKind) -> Result<()> {
    if seq.kind != expected {
        return Err(Error::WrongDistribution { expected: expected.as_str(), got: seq.kind.as_str() });
    }
    Ok(())
}

/// Closed interval of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBounds {
    pub min: f64,
    pub max: f64,
}

impl AxisBounds {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(AxisBounds { min: v, max: v }),
            Some(b) => Some(AxisBounds { min: b.min.min(v), max: b.max.max(v) }),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.min == self.max
    }

    /// Affine map of `[min, max]` onto `[-1, 1]`; a degenerate axis maps to 0.
    pub fn normalize(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        2.0 * (v - self.min) / (self.max - self.min) - 1.0
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        if self.is_degenerate() {
            return self.min;
        }
        (u + 1.0) * 0.5 * (self.max - self.min) + self.min
    }
}

/// Per-axis bounds of a 2-D sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x: AxisBounds,
    pub y: AxisBounds,
}

impl Bounds {
    pub fn of(samples: &[GazeSample]) -> Option<Self> {
        Some(Self {
            x: AxisBounds::of(samples.iter().map(|s| s.x))?,
            y: AxisBounds::of(samples.iter().map(|s| s.y))?,
        })
    }

    pub fn axis(&self, axis: usize) -> &AxisBounds {
        match axis {
            0 => &self.x,
            1 => &self.y,
            _ => panic!("gaze samples have two axes, got axis {axis}"),
        }
    }

    pub fn normalize(&self, s: GazeSample) -> GazeSample {
        GazeSample::new(self.x.normalize(s.x), self.y.normalize(s.y))
    }

    pub fn denormalize(&self, s: GazeSample) -> GazeSample {
        GazeSample::new(self.x.denormalize(s.x), self.y.denormalize(s.y))
    }
}

/// Maps each axis affinely onto `[-1, 1]` and returns the bounds needed to
/// undo it.
pub fn min_max_normalize(seq: &GazeSequence) -> Result<(GazeSequence, Bounds)> {
    let bounds = Bounds::of(&seq.samples).ok_or(Error::EmptySequence)?;
    let samples = seq.samples.iter().map(|&s| bounds.normalize(s)).collect();
    Ok((GazeSequence::new(samples, seq.sample_rate_hz, seq.kind)?, bounds))
}

pub fn denormalize(seq: &GazeSequence, bounds: &Bounds) -> Result<GazeSequence> {
    let samples = seq.samples.iter().map(|&s| bounds.denormalize(s)).collect();
    GazeSequence::new_allow_empty(samples, seq.sample_rate_hz, seq.kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pos(points: &[(f64, f64)]) -> GazeSequence {
        GazeSequence::positions(points.iter().map(|&p| p.into()).collect(), 100.0).unwrap()
    }

    #[test]
    fn velocity_is_finite_difference() {
        let v = derive_velocity(&pos(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)])).unwrap();
        assert_eq!(v.samples(), &[GazeSample::new(1.0, 0.0), GazeSample::new(2.0, 0.0)]);
        assert_eq!(v.kind(), DistributionKind::Velocity);
        assert_eq!(v.sample_rate_hz(), 100.0);
    }

    #[test]
    fn constant_positions_have_zero_velocity() {
        let v = derive_velocity(&pos(&[(2.5, -1.0); 5])).unwrap();
        assert!(v.samples().iter().all(|s| s.x == 0.0 && s.y == 0.0));
    }

    #[test]
    fn single_sample_is_too_short() {
        let err = derive_velocity(&pos(&[(1.0, 1.0)])).unwrap_err();
        assert!(matches!(err, Error::SequenceTooShort { got: 1, .. }));
    }

    #[test]
    fn integrate_is_prefix_sum() {
        let vel = GazeSequence::velocities(vec![(1.0, 0.0).into(), (0.0, 1.0).into()], 10.0).unwrap();
        let p = integrate_positions(GazeSample::new(0.0, 0.0), &vel).unwrap();
        assert_eq!(p.samples(), &[(0.0, 0.0).into(), (1.0, 0.0).into(), (1.0, 1.0).into()]);
    }

    #[test]
    fn integrate_empty_velocity_gives_start_point() {
        let vel = GazeSequence::velocities(vec![], 10.0).unwrap();
        let p = integrate_positions(GazeSample::new(4.0, 2.0), &vel).unwrap();
        assert_eq!(p.samples(), &[GazeSample::new(4.0, 2.0)]);
    }

    #[test]
    fn normalize_endpoints() {
        let (n, b) = min_max_normalize(&pos(&[(0.0, -1.0), (5.0, 0.0), (10.0, 1.0)])).unwrap();
        assert_eq!(n.axis_values(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(n.axis_values(1), vec![-1.0, 0.0, 1.0]);
        assert_eq!(b.x, AxisBounds { min: 0.0, max: 10.0 });
    }

    #[test]
    fn normalize_constant_axis_to_zero() {
        let (n, b) = min_max_normalize(&pos(&[(3.0, 0.0), (3.0, 1.0), (3.0, 2.0)])).unwrap();
        assert_eq!(n.axis_values(0), vec![0.0; 3]);
        assert_eq!(b.x, AxisBounds { min: 3.0, max: 3.0 });
        assert_eq!(denormalize(&n, &b).unwrap().axis_values(0), vec![3.0; 3]);
    }

    #[test]
    fn rejects_non_finite() {
        let err = GazeSequence::positions(vec![(0.0, 0.0).into(), (f64::NAN, 1.0).into()], 100.0);
        assert!(matches!(err, Err(Error::NonFinite { index: 1 })));
        let err = GazeSequence::positions(vec![(f64::INFINITY, 0.0).into()], 100.0);
        assert!(matches!(err, Err(Error::NonFinite { index: 0 })));
        assert!(matches!(GazeSequence::positions(vec![], 100.0), Err(Error::EmptySequence)));
        assert!(matches!(
            GazeSequence::positions(vec![(0.0, 0.0).into()], 0.0),
            Err(Error::InvalidSampleRate(_))
        ));
    }

    #[test]
    fn wrong_kind_rejected() {
        let v = GazeSequence::velocities(vec![(1.0, 0.0).into()], 10.0).unwrap();
        assert!(matches!(derive_velocity(&v), Err(Error::WrongDistribution { .. })));
        let p = pos(&[(0.0, 0.0)]);
        assert!(integrate_positions(GazeSample::default(), &p).is_err());
    }

    fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-180.0..180.0f64, -90.0..90.0f64), 2..300)
    }

    proptest! {
        #[test]
        fn integrate_inverts_derive(pts in points()) {
            let p = pos(&pts);
            let back = integrate_positions(p.samples()[0], &derive_velocity(&p).unwrap()).unwrap();
            prop_assert_eq!(back.len(), p.len());
            for (a, b) in back.samples().iter().zip(p.samples()) {
                prop_assert!((a.x - b.x).abs() <= 1e-5 && (a.y - b.y).abs() <= 1e-5);
            }
        }

        #[test]
        fn normalize_bounded_and_invertible(pts in points()) {
            let p = pos(&pts);
            let (n, b) = min_max_normalize(&p).unwrap();
            for s in n.samples() {
                prop_assert!((-1.0..=1.0).contains(&s.x) && (-1.0..=1.0).contains(&s.y));
            }
            let back = denormalize(&n, &b).unwrap();
            for (a, o) in back.samples().iter().zip(p.samples()) {
                prop_assert!((a.x - o.x).abs() <= 1e-6 * o.x.abs().max(1.0));
                prop_assert!((a.y - o.y).abs() <= 1e-6 * o.y.abs().max(1.0));
            }
        }
    }
}
