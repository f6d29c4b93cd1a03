//! Trial measures computed from logs: error distance, operation time and
//! count, travel, overshoots, histograms and summary statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::tasks::{Task, TracePath};
use crate::triallog::{LogRecord, TrialLog};
use crate::vec3::{self, Vec3};

pub const OVERSHOOT_MARGIN: f64 = 0.10;
pub const SPEED_BINS: usize = 32;
pub const SLIDER_POSITION_BINS: usize = 50;
pub const PLACEMENT_POSITION_BINS: usize = 30;
/// Placement progress histogram spans `[0, PLACEMENT_PROGRESS_MAX]` of the
/// intended distance.
pub const PLACEMENT_PROGRESS_MAX: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no samples to measure")]
    EmptySamples,
    #[error("log contains no pinch operations")]
    NoOperations,
    #[error("trial start and target coincide")]
    DegenerateTrial,
    #[error("need at least 2 values, got {0}")]
    InsufficientData(usize),
    #[error("TLX score {0} outside [0, 20]")]
    OutOfRange(f64),
    #[error("histogram edges must be strictly increasing and at least 2")]
    InvalidEdges,
}

pub fn error_final(final_pos: &[f64], target_pos: &[f64]) -> f64 {
    assert_eq!(final_pos.len(), target_pos.len(), "dimension mismatch");
    final_pos
        .iter()
        .zip(target_pos)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (abx, aby) = (b[0] - a[0], b[1] - a[1]);
    let (apx, apy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    (dx * dx + dy * dy).sqrt()
}

/// Distance from `p` to the nearest point on any segment of `polyline`.
pub fn point_polyline_distance(p: [f64; 2], polyline: &[[f64; 2]]) -> f64 {
    match polyline {
        [] => f64::INFINITY,
        [only] => point_segment_distance(p, *only, *only),
        _ => polyline
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathError {
    pub median: f64,
    pub mean: f64,
}

pub fn path_error(samples: &[[f64; 2]], path: &TracePath) -> Result<PathError, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let mut d: Vec<f64> = samples
        .iter()
        .map(|&p| point_polyline_distance(p, &path.polyline))
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok(PathError {
        median: median(&mut d),
        mean,
    })
}

/// Median sample-to-path distance.
pub fn error_path(samples: &[[f64; 2]], path: &TracePath) -> Result<f64, MetricsError> {
    path_error(samples, path).map(|e| e.median)
}

/// A pinch interval as record indices: `start` is the first pinched record;
/// `end` is the release record, or the last record for a pinch still held
/// when the log ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PinchCycle {
    pub start: usize,
    pub end: usize,
}

pub fn pinch_cycles(records: &[LogRecord]) -> Vec<PinchCycle> {
    let mut cycles = Vec::new();
    let mut open: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        match (open, r.pinching) {
            (None, true) => open = Some(i),
            (Some(start), false) => {
                cycles.push(PinchCycle { start, end: i });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        cycles.push(PinchCycle {
            start,
            end: records.len() - 1,
        });
    }
    cycles
}

pub fn count_operations(records: &[LogRecord]) -> usize {
    pinch_cycles(records).len()
}

/// From the first selection to the final deselection.
pub fn operation_time(records: &[LogRecord]) -> Result<f64, MetricsError> {
    let cycles = pinch_cycles(records);
    match (cycles.first(), cycles.last()) {
        (Some(first), Some(last)) => Ok(records[last.end].t - records[first.start].t),
        _ => Err(MetricsError::NoOperations),
    }
}

pub fn travel_distance(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| vec3::dist(w[1], w[0])).sum()
}

/// Counts entries into the region beyond `target` by more than 10% of the
/// start-to-target distance, measured along the start-to-target axis.
pub fn count_overshoots(
    positions: &[Vec3],
    start: Vec3,
    target: Vec3,
) -> Result<usize, MetricsError> {
    let axis = vec3::sub(target, start);
    let intended = vec3::norm(axis);
    if intended == 0.0 {
        return Err(MetricsError::DegenerateTrial);
    }
    let u = vec3::scale(axis, 1.0 / intended);
    let limit = intended * (1.0 + OVERSHOOT_MARGIN);
    let mut inside = false;
    let mut count = 0;
    for &p in positions {
        let beyond = vec3::dot(vec3::sub(p, start), u) > limit;
        if beyond && !inside {
            count += 1;
        }
        inside = beyond;
    }
    Ok(count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Half-open bins `[e_i, e_{i+1})`, the last one closed. Values outside the
/// edges are not counted.
pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Histogram, MetricsError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MetricsError::InvalidEdges);
    }
    let bins = edges.len() - 1;
    let mut counts = vec![0; bins];
    let last = edges[bins];
    for &v in values {
        if v < edges[0] || v > last || v.is_nan() {
            continue;
        }
        let idx = if v == last {
            bins - 1
        } else {
            edges.partition_point(|&e| e <= v) - 1
        };
        counts[idx] += 1;
    }
    Ok(Histogram {
        edges: edges.to_vec(),
        counts,
    })
}

pub fn linspace(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect()
}

/// Sample mean and Student-t 95% half-width.
pub fn mean_ci95(values: &[f64]) -> Result<(f64, f64), MetricsError> {
    let n = values.len();
    if n < 2 {
        return Err(MetricsError::InsufficientData(n));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .expect("df >= 1")
        .inverse_cdf(0.975);
    Ok((mean, t * var.sqrt() / nf.sqrt()))
}

/// Maps a 0–20 TLX response onto 1–7.
pub fn rescale_tlx(x: f64) -> Result<f64, MetricsError> {
    if !(0.0..=20.0).contains(&x) {
        return Err(MetricsError::OutOfRange(x));
    }
    Ok(1.0 + x * (6.0 / 20.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    /// Final-position error for slider and placement, median path error for
    /// tracing.
    pub error_distance: Option<f64>,
    /// Mean path error (tracing only).
    pub error_path_mean: Option<f64>,
    pub operation_time: Option<f64>,
    pub num_operations: usize,
    pub hand_travel: f64,
    pub object_travel: f64,
    pub overshoot_count: Option<usize>,
    pub speed_histogram: Histogram,
    pub position_histogram: Option<Histogram>,
}

/// Computes every measure for one trial log. Travel and histograms cover the
/// span from the first selection to the final deselection, or the whole log
/// when nothing was selected.
pub fn trial_metrics(log: &TrialLog) -> Result<TrialMetrics, MetricsError> {
    let records = &log.records;
    if records.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let cycles = pinch_cycles(records);
    let span = match (cycles.first(), cycles.last()) {
        (Some(f), Some(l)) => &records[f.start..=l.end],
        _ => &records[..],
    };
    let hand: Vec<Vec3> = span.iter().map(|r| r.hand_pos).collect();
    let object: Vec<Vec3> = span.iter().map(|r| r.object_pos).collect();

    let task = &log.header.task;
    let final_pos = records[records.len() - 1].object_pos;
    let (mut error_distance, mut error_path_mean, mut overshoot_count) = (None, None, None);
    let mut position_histogram = None;
    match task {
        Task::Trace(path) => {
            let stroke: Vec<[f64; 2]> = records
                .iter()
                .filter(|r| r.pinching)
                .map(|r| [r.object_pos[0], r.object_pos[1]])
                .collect();
            if let Ok(e) = path_error(&stroke, path) {
                error_distance = Some(e.median);
                error_path_mean = Some(e.mean);
            }
        }
        Task::Slider(_) | Task::Placement(_) => {
            let start = task.start_pos();
            let target = task
                .target_pos()
                .expect("slider and placement have targets");
            error_distance = Some(error_final(&final_pos, &target));
            overshoot_count = Some(count_overshoots(&object, start, target)?);
            let (values, edges): (Vec<f64>, Vec<f64>) = match task {
                Task::Slider(s) => (
                    object.iter().map(|p| p[0] / s.length).collect(),
                    linspace(0.0, 1.0, SLIDER_POSITION_BINS),
                ),
                _ => {
                    let axis = vec3::sub(target, start);
                    let d2 = vec3::dot(axis, axis);
                    (
                        object
                            .iter()
                            .map(|p| vec3::dot(vec3::sub(*p, start), axis) / d2)
                            .collect(),
                        linspace(0.0, PLACEMENT_PROGRESS_MAX, PLACEMENT_POSITION_BINS),
                    )
                }
            };
            position_histogram = Some(histogram(&values, &edges)?);
        }
    }

    let cfg = &log.header.technique;
    let top = cfg.cursor.speed_max_mult * cfg.base_gain_c;
    let speeds: Vec<f64> = span.iter().map(|r| r.speed).collect();
    let speed_histogram = histogram(&speeds, &linspace(0.0, top, SPEED_BINS))?;

    Ok(TrialMetrics {
        error_distance,
        error_path_mean,
        operation_time: operation_time(records).ok(),
        num_operations: cycles.len(),
        hand_travel: travel_distance(&hand),
        object_travel: travel_distance(&object),
        overshoot_count,
        speed_histogram,
        position_histogram,
    })
}
