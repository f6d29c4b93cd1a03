//! Per-user force calibration.
//!
//! A short recording in which the user holds a light, a moderate and a firm
//! pinch is clustered into three force levels. Those levels become the
//! anchors of a raw-force to tracking-speed curve: raw force is first
//! normalized piecewise-linearly so the levels land on 0, 0.5 and 1, then fed
//! through the same normalized monotone curve the technique config defines.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mapping::{ForceCurve, ForcePinchParams, MappingError, SpeedSample};

pub const MIN_SAMPLES: usize = 30;
pub const CENTROID_TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("insufficient calibration data: {0}")]
    InsufficientData(String),
    #[error("force levels are not distinguishable: {0}")]
    DegenerateClusters(String),
    #[error("invalid force sample at index {index}: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("profile does not match its recorded curve: {0}")]
    InconsistentProfile(String),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

/// One reading of the pinch force sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub t: f64,
    pub raw: f64,
}

/// The light, moderate and firm force levels in sensor units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceAnchors {
    pub f_min: f64,
    pub f_mid: f64,
    pub f_max: f64,
}

impl ForceAnchors {
    pub fn new(f_min: f64, f_mid: f64, f_max: f64) -> Result<Self, CalibrationError> {
        let a = Self {
            f_min,
            f_mid,
            f_max,
        };
        a.check()?;
        Ok(a)
    }

    fn check(&self) -> Result<(), CalibrationError> {
        let vals = [self.f_min, self.f_mid, self.f_max];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(CalibrationError::DegenerateClusters(
                "anchors must be finite".into(),
            ));
        }
        if !(self.f_mid - self.f_min > CENTROID_TOLERANCE
            && self.f_max - self.f_mid > CENTROID_TOLERANCE)
        {
            return Err(CalibrationError::DegenerateClusters(format!(
                "anchors must be strictly increasing, got ({}, {}, {})",
                self.f_min, self.f_mid, self.f_max
            )));
        }
        Ok(())
    }
}

/// Sum of squared distances from each value to its nearest centroid.
pub fn kmeans_objective(values: &[f64], centroids: &[f64]) -> f64 {
    values
        .iter()
        .map(|v| {
            centroids
                .iter()
                .map(|c| (v - c) * (v - c))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Initial centroids at the 1/6, 3/6 and 5/6 quantiles of sorted data.
pub fn initial_centroids(sorted: &[f64]) -> [f64; 3] {
    let n = sorted.len();
    let at = |num: usize| sorted[((num * n) / 6).min(n - 1)];
    [at(1), at(3), at(5)]
}

fn lloyd_1d(sorted: &[f64], mut centroids: [f64; 3]) -> [f64; 3] {
    for _ in 0..MAX_ITERATIONS {
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        for &v in sorted {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, &c) in centroids.iter().enumerate() {
                let d = (v - c).abs();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            sums[best] += v;
            counts[best] += 1;
        }
        let mut next = centroids;
        for j in 0..3 {
            if counts[j] > 0 {
                next[j] = sums[j] / counts[j] as f64;
            }
        }
        if next == centroids {
            break;
        }
        centroids = next;
    }
    centroids
}

/// Clusters a calibration recording into three ascending force levels.
///
/// Data are sorted before clustering, so the result does not depend on the
/// order of the samples.
pub fn cluster_force_levels(stream: &[ForceSample]) -> Result<ForceAnchors, CalibrationError> {
    if stream.is_empty() {
        return Err(CalibrationError::InsufficientData("empty stream".into()));
    }
    for (index, s) in stream.iter().enumerate() {
        if !s.raw.is_finite() || s.raw < 0.0 {
            return Err(CalibrationError::InvalidSample {
                index,
                reason: format!("raw force must be finite and nonnegative, got {}", s.raw),
            });
        }
        if !s.t.is_finite() {
            return Err(CalibrationError::InvalidSample {
                index,
                reason: "timestamp must be finite".into(),
            });
        }
        if index > 0 && s.t < stream[index - 1].t {
            return Err(CalibrationError::InvalidSample {
                index,
                reason: "timestamps must be nondecreasing".into(),
            });
        }
    }

    let mut values: Vec<f64> = stream.iter().map(|s| s.raw).collect();
    values.sort_by(f64::total_cmp);
    let mut distinct = values.clone();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(CalibrationError::DegenerateClusters(format!(
            "stream holds {} distinct force value(s), need 3",
            distinct.len()
        )));
    }
    if values.len() < MIN_SAMPLES {
        return Err(CalibrationError::InsufficientData(format!(
            "{} samples, need at least {MIN_SAMPLES}",
            values.len()
        )));
    }

    let mut c = lloyd_1d(&values, initial_centroids(&values));
    c.sort_by(f64::total_cmp);
    if c[1] - c[0] <= CENTROID_TOLERANCE || c[2] - c[1] <= CENTROID_TOLERANCE {
        return Err(CalibrationError::DegenerateClusters(format!(
            "centroids ({}, {}, {}) coincide",
            c[0], c[1], c[2]
        )));
    }
    Ok(ForceAnchors {
        f_min: c[0],
        f_mid: c[1],
        f_max: c[2],
    })
}

/// Per-user raw-force to speed mapping. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ProfileFile", try_from = "ProfileFile")]
pub struct CalibrationProfile {
    anchors: ForceAnchors,
    c: f64,
    params: ForcePinchParams,
    curve: ForceCurve,
}

/// On-disk form of a profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProfileFile {
    f_min: f64,
    f_mid: f64,
    f_max: f64,
    c: f64,
    anchors_norm: Vec<[f64; 2]>,
    tangents: Vec<f64>,
}

impl From<CalibrationProfile> for ProfileFile {
    fn from(p: CalibrationProfile) -> Self {
        Self {
            f_min: p.anchors.f_min,
            f_mid: p.anchors.f_mid,
            f_max: p.anchors.f_max,
            c: p.c,
            tangents: p.curve.spline().tangents().to_vec(),
            anchors_norm: p.params.anchors_norm,
        }
    }
}

impl TryFrom<ProfileFile> for CalibrationProfile {
    type Error = CalibrationError;

    fn try_from(f: ProfileFile) -> Result<Self, Self::Error> {
        let anchors = ForceAnchors::new(f.f_min, f.f_mid, f.f_max)?;
        let params = ForcePinchParams {
            anchors_norm: f.anchors_norm,
        };
        let profile = build_force_mapping_with(anchors, &params, f.c)?;
        let expected = profile.curve.spline().tangents();
        if expected.len() != f.tangents.len()
            || expected
                .iter()
                .zip(&f.tangents)
                .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(CalibrationError::InconsistentProfile(format!(
                "recorded tangents {:?} differ from recomputed {:?}",
                f.tangents, expected
            )));
        }
        Ok(profile)
    }
}

impl CalibrationProfile {
    pub fn anchors(&self) -> ForceAnchors {
        self.anchors
    }

    pub fn base_gain(&self) -> f64 {
        self.c
    }

    pub fn params(&self) -> &ForcePinchParams {
        &self.params
    }

    pub fn tangents(&self) -> &[f64] {
        self.curve.spline().tangents()
    }

    /// Piecewise-linear map sending the three levels to 0, 0.5 and 1,
    /// clamped outside `[f_min, f_max]`.
    pub fn normalize(&self, raw: f64) -> f64 {
        let ForceAnchors {
            f_min,
            f_mid,
            f_max,
        } = self.anchors;
        if raw <= f_min {
            0.0
        } else if raw <= f_mid {
            0.5 * (raw - f_min) / (f_mid - f_min)
        } else if raw < f_max {
            0.5 + 0.5 * (raw - f_mid) / (f_max - f_mid)
        } else {
            1.0
        }
    }

    /// Speed as a multiple of `c` for a raw sensor reading.
    pub fn multiple(&self, raw: f64) -> f64 {
        self.curve.multiple(self.normalize(raw))
    }

    /// Same anchors rebuilt for a different base gain or curve shape.
    pub fn rebuilt(&self, params: &ForcePinchParams, c: f64) -> Result<Self, CalibrationError> {
        build_force_mapping_with(self.anchors, params, c)
    }

    /// Hex SHA-256 of the serialized profile.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("profile serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Builds the per-user curve with the default normalized anchors
/// `(0, 4c)`, `(0.5, c)`, `(1, 0.25c)`.
pub fn build_force_mapping(
    anchors: ForceAnchors,
    c: f64,
) -> Result<CalibrationProfile, CalibrationError> {
    build_force_mapping_with(anchors, &ForcePinchParams::default(), c)
}

pub fn build_force_mapping_with(
    anchors: ForceAnchors,
    params: &ForcePinchParams,
    c: f64,
) -> Result<CalibrationProfile, CalibrationError> {
    anchors.check()?;
    if !(c.is_finite() && c > 0.0) {
        return Err(
            MappingError::InvalidConfig(format!("base gain c must be > 0, got {c}")).into(),
        );
    }
    Ok(CalibrationProfile {
        anchors,
        c,
        params: params.clone(),
        curve: ForceCurve::new(params)?,
    })
}

/// Tracking speed for a raw force reading; out-of-range readings clamp to
/// the fastest or slowest speed.
pub fn eval_curve(profile: &CalibrationProfile, raw: f64) -> SpeedSample {
    SpeedSample(profile.c * profile.multiple(raw))
}
