//! Tracking-speed transfer functions for the four techniques and the
//! feedback-cursor radius.
//!
//! Every function returns `c * multiplier(input)` where the multiplier does
//! not depend on `c`, so doubling the base gain doubles the output exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spline::{MonotoneCubic, SplineError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("{what} must be nonnegative, got {value}")]
    NegativeInput { what: &'static str, value: f64 },
    #[error("invalid technique config: {0}")]
    InvalidConfig(String),
    #[error("invalid force curve: {0}")]
    Spline(#[from] SplineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Technique {
    #[serde(rename = "constant")]
    Constant,
    #[serde(rename = "gogo")]
    GoGo,
    #[serde(rename = "prism")]
    Prism,
    #[serde(rename = "forcepinch")]
    ForcePinch,
}

impl Technique {
    pub const ALL: [Technique; 4] = [
        Technique::Constant,
        Technique::GoGo,
        Technique::Prism,
        Technique::ForcePinch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Technique::Constant => "constant",
            Technique::GoGo => "gogo",
            Technique::Prism => "prism",
            Technique::ForcePinch => "forcepinch",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technique {
    type Err = MappingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "constant" => Ok(Technique::Constant),
            "gogo" => Ok(Technique::GoGo),
            "prism" => Ok(Technique::Prism),
            "forcepinch" => Ok(Technique::ForcePinch),
            other => Err(MappingError::InvalidConfig(format!(
                "unknown technique `{other}`"
            ))),
        }
    }
}

/// Distance-driven gain: flat at `c` below `d_flat`, linear up to
/// `s_max_mult * c` at `d_max`, clamped beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoGoParams {
    pub d_flat: f64,
    pub d_max: f64,
    pub s_max_mult: f64,
}

impl Default for GoGoParams {
    fn default() -> Self {
        Self {
            d_flat: 0.1,
            d_max: 0.5,
            s_max_mult: 4.0,
        }
    }
}

/// Velocity-driven gain: linear from `s_min_mult * c` at rest to
/// `s_max_mult * c` at `v_max`, clamped beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrismParams {
    pub v_max: f64,
    pub s_min_mult: f64,
    pub s_max_mult: f64,
}

impl Default for PrismParams {
    fn default() -> Self {
        Self {
            v_max: 0.75,
            s_min_mult: 0.25,
            s_max_mult: 4.0,
        }
    }
}

/// Knots of the normalized force curve as `[force, multiple of c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForcePinchParams {
    pub anchors_norm: Vec<[f64; 2]>,
}

impl Default for ForcePinchParams {
    fn default() -> Self {
        Self {
            anchors_norm: vec![[0.0, 4.0], [0.5, 1.0], [1.0, 0.25]],
        }
    }
}

/// Log-linear map from `[speed_min_mult * c, speed_max_mult * c]` onto
/// `[r_min, r_max]` meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CursorParams {
    pub r_min: f64,
    pub r_max: f64,
    pub speed_min_mult: f64,
    pub speed_max_mult: f64,
}

impl Default for CursorParams {
    fn default() -> Self {
        Self {
            r_min: 0.005,
            r_max: 0.02,
            speed_min_mult: 0.25,
            speed_max_mult: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueConfig {
    pub technique: Technique,
    pub base_gain_c: f64,
    #[serde(default)]
    pub gogo: GoGoParams,
    #[serde(default)]
    pub prism: PrismParams,
    #[serde(default)]
    pub forcepinch: ForcePinchParams,
    #[serde(default)]
    pub cursor: CursorParams,
}

impl TechniqueConfig {
    pub fn new(technique: Technique, base_gain_c: f64) -> Self {
        Self {
            technique,
            base_gain_c,
            gogo: GoGoParams::default(),
            prism: PrismParams::default(),
            forcepinch: ForcePinchParams::default(),
            cursor: CursorParams::default(),
        }
    }

    pub fn with_gain(&self, base_gain_c: f64) -> Self {
        Self {
            base_gain_c,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        let bad = |msg: String| Err(MappingError::InvalidConfig(msg));
        let c = self.base_gain_c;
        if !(c.is_finite() && c > 0.0) {
            return bad(format!("base gain c must be > 0, got {c}"));
        }
        let g = &self.gogo;
        if !(g.d_flat >= 0.0 && g.d_flat < g.d_max) {
            return bad(format!(
                "gogo requires 0 <= d_flat < d_max, got {} / {}",
                g.d_flat, g.d_max
            ));
        }
        if !(g.s_max_mult > 1.0) {
            return bad(format!(
                "gogo s_max_mult must exceed 1, got {}",
                g.s_max_mult
            ));
        }
        let p = &self.prism;
        if !(p.v_max > 0.0) {
            return bad(format!("prism v_max must be > 0, got {}", p.v_max));
        }
        if !(p.s_min_mult > 0.0 && p.s_min_mult < 1.0 && 1.0 < p.s_max_mult) {
            return bad(format!(
                "prism requires 0 < s_min_mult < 1 < s_max_mult, got {} / {}",
                p.s_min_mult, p.s_max_mult
            ));
        }
        let a = &self.forcepinch.anchors_norm;
        if a.len() < 2 {
            return bad("forcepinch needs at least 2 anchors".into());
        }
        for w in a.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return bad("forcepinch anchor forces must be strictly increasing".into());
            }
            if !(w[1][1] < w[0][1]) {
                return bad("forcepinch anchor speeds must be strictly decreasing".into());
            }
        }
        if a[0][0] < 0.0 || a[a.len() - 1][0] > 1.0 {
            return bad("forcepinch anchor forces must lie in [0, 1]".into());
        }
        if a[a.len() - 1][1] <= 0.0 {
            return bad("forcepinch anchor speeds must be positive".into());
        }
        let r = &self.cursor;
        if !(r.r_min > 0.0
            && r.r_min < r.r_max
            && r.speed_min_mult > 0.0
            && r.speed_min_mult < r.speed_max_mult)
        {
            return bad(
                "cursor requires 0 < r_min < r_max and 0 < speed_min_mult < speed_max_mult".into(),
            );
        }
        Ok(())
    }

    /// Normalized-force curve in multiples of `c`.
    pub fn force_curve(&self) -> Result<ForceCurve, MappingError> {
        ForceCurve::new(&self.forcepinch)
    }

    /// Closed output range of this technique's speed, in absolute units.
    pub fn speed_range(&self) -> (f64, f64) {
        let c = self.base_gain_c;
        match self.technique {
            Technique::Constant => (c, c),
            Technique::GoGo => (c, c * self.gogo.s_max_mult),
            Technique::Prism => (c * self.prism.s_min_mult, c * self.prism.s_max_mult),
            Technique::ForcePinch => {
                let a = &self.forcepinch.anchors_norm;
                (c * a[a.len() - 1][1], c * a[0][1])
            }
        }
    }
}

/// Control-display gain: pointer meters per hand meter.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeedSample(pub f64);

impl SpeedSample {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// The normalized-force spline, prebuilt for repeated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceCurve {
    spline: MonotoneCubic,
}

impl ForceCurve {
    pub fn new(params: &ForcePinchParams) -> Result<Self, MappingError> {
        let xs: Vec<f64> = params.anchors_norm.iter().map(|a| a[0]).collect();
        let ys: Vec<f64> = params.anchors_norm.iter().map(|a| a[1]).collect();
        Ok(Self {
            spline: MonotoneCubic::new(&xs, &ys)?,
        })
    }

    /// Multiple of `c` at normalized force `f`, clamped to the anchor domain.
    pub fn multiple(&self, f_norm: f64) -> f64 {
        self.spline.eval(f_norm)
    }

    pub fn derivative(&self, f_norm: f64) -> f64 {
        self.spline.derivative(f_norm)
    }

    pub fn spline(&self) -> &MonotoneCubic {
        &self.spline
    }
}

pub fn eval_constant(cfg: &TechniqueConfig) -> SpeedSample {
    SpeedSample(cfg.base_gain_c)
}

pub fn gogo_multiple(d: f64, p: &GoGoParams) -> f64 {
    if d < p.d_flat {
        1.0
    } else if d <= p.d_max {
        1.0 + (d - p.d_flat) / (p.d_max - p.d_flat) * (p.s_max_mult - 1.0)
    } else {
        p.s_max_mult
    }
}

/// Go-Go gain at hand displacement `d` meters from the grab anchor.
pub fn eval_gogo(d: f64, cfg: &TechniqueConfig) -> Result<SpeedSample, MappingError> {
    if !(d >= 0.0) {
        return Err(MappingError::NegativeInput {
            what: "hand displacement",
            value: d,
        });
    }
    Ok(SpeedSample(cfg.base_gain_c * gogo_multiple(d, &cfg.gogo)))
}

pub fn prism_multiple(v: f64, p: &PrismParams) -> f64 {
    let u = (v / p.v_max).min(1.0);
    p.s_min_mult + u * (p.s_max_mult - p.s_min_mult)
}

/// PRISM gain at hand speed `v` m/s.
pub fn eval_prism(v: f64, cfg: &TechniqueConfig) -> Result<SpeedSample, MappingError> {
    if !(v >= 0.0) {
        return Err(MappingError::NegativeInput {
            what: "hand velocity",
            value: v,
        });
    }
    Ok(SpeedSample(cfg.base_gain_c * prism_multiple(v, &cfg.prism)))
}

/// ForcePinch gain at normalized force `f_norm`; values outside `[0, 1]`
/// clamp to the nearest anchor.
///
/// Panics if the config's anchors do not form a valid curve; configs coming
/// from files go through [`TechniqueConfig::validate`] first.
pub fn eval_forcepinch(f_norm: f64, cfg: &TechniqueConfig) -> SpeedSample {
    let curve = cfg
        .force_curve()
        .expect("forcepinch anchors must be validated before evaluation");
    SpeedSample(cfg.base_gain_c * curve.multiple(f_norm))
}

/// Feedback-cursor radius in meters for the current speed.
pub fn cursor_radius(speed: SpeedSample, cfg: &TechniqueConfig) -> f64 {
    let p = &cfg.cursor;
    let c = cfg.base_gain_c;
    let s = match cfg.technique {
        Technique::Constant => c,
        _ => speed.0,
    };
    let lo = p.speed_min_mult * c;
    let u = ((s / lo).ln() / (p.speed_max_mult / p.speed_min_mult).ln()).clamp(0.0, 1.0);
    p.r_min + u * (p.r_max - p.r_min)
}
