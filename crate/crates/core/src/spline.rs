//! Monotone piecewise-cubic Hermite interpolation.
//!
//! Tangents follow the Fritsch–Carlson construction: start from the average
//! of adjacent secants (one-sided secants at the ends), zero them at local
//! extrema, then shrink any pair whose ratio to the interval secant leaves the
//! circle of radius 3. The resulting curve never overshoots the data and is
//! strictly monotone on every interval whose secant is nonzero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("need at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knots and values differ in length ({knots} vs {values})")]
    LengthMismatch { knots: usize, values: usize },
    #[error("knots must be strictly increasing (violated at index {0})")]
    NonIncreasingKnots(usize),
    #[error("non-finite knot or value at index {0}")]
    NonFinite(usize),
}

/// A C1 monotone cubic through a set of knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    knots: Vec<f64>,
    values: Vec<f64>,
    tangents: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(knots: &[f64], values: &[f64]) -> Result<Self, SplineError> {
        let n = knots.len();
        if n != values.len() {
            return Err(SplineError::LengthMismatch {
                knots: n,
                values: values.len(),
            });
        }
        if n < 2 {
            return Err(SplineError::TooFewKnots(n));
        }
        for (i, (x, y)) in knots.iter().zip(values).enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(SplineError::NonFinite(i));
            }
        }
        for i in 1..n {
            if knots[i] <= knots[i - 1] {
                return Err(SplineError::NonIncreasingKnots(i));
            }
        }

        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]))
            .collect();

        let mut tangents = vec![0.0; n];
        tangents[0] = secants[0];
        tangents[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            tangents[i] = if a * b <= 0.0 { 0.0 } else { 0.5 * (a + b) };
        }

        for i in 0..n - 1 {
            let delta = secants[i];
            if delta == 0.0 {
                tangents[i] = 0.0;
                tangents[i + 1] = 0.0;
                continue;
            }
            let alpha = tangents[i] / delta;
            let beta = tangents[i + 1] / delta;
            let r2 = alpha * alpha + beta * beta;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                tangents[i] = tau * alpha * delta;
                tangents[i + 1] = tau * beta * delta;
            }
        }

        Ok(Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            tangents,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tangents(&self) -> &[f64] {
        &self.tangents
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Index of the interval containing `x`, which must lie strictly inside
    /// the domain.
    fn interval(&self, x: f64) -> usize {
        let last = self.knots.len() - 2;
        let idx = self.knots.partition_point(|&k| k <= x);
        idx.saturating_sub(1).min(last)
    }

    /// Evaluates the curve; inputs outside the domain take the nearest
    /// endpoint value.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        if x <= lo {
            return self.values[0];
        }
        if x >= hi {
            return self.values[self.values.len() - 1];
        }
        let i = self.interval(x);
        let h = self.knots[i + 1] - self.knots[i];
        let t = (x - self.knots[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i]
            + h10 * h * self.tangents[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.tangents[i + 1]
    }

    /// First derivative; zero outside the domain where the curve is clamped.
    pub fn derivative(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return 0.0;
        }
        let i = self.interval(x.min(hi));
        let h = self.knots[i + 1] - self.knots[i];
        let t = (x - self.knots[i]) / h;
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.values[i] + d01 * self.values[i + 1]) / h
            + d10 * self.tangents[i]
            + d11 * self.tangents[i + 1]
    }
}
