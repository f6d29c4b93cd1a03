//! Force-responsive tracking-speed control.
//!
//! The engine maps a pinch-force signal inversely onto control-display gain
//! ("more force, more friction") and runs it alongside three baselines:
//! constant gain, distance-driven Go-Go and velocity-driven PRISM. Around it
//! sit per-user calibration, the three evaluation tasks, a synthetic user
//! that produces seeded input streams, and the trial metrics.

// `!(x > y)` is how inputs reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod engine;
pub mod mapping;
pub mod metrics;
pub mod spline;
pub mod synthuser;
pub mod tasks;
pub mod triallog;
pub mod vec3;

pub use calibration::{
    build_force_mapping, cluster_force_levels, eval_curve, CalibrationError, CalibrationProfile,
    ForceAnchors, ForceSample,
};
pub use engine::{start_session, EngineError, EngineFrame, InputSample, Session};
pub use mapping::{SpeedSample, Technique, TechniqueConfig};
pub use synthuser::{simulate_trial, ForceStrategy, MotionPlan, NoiseModel, PolicyParams};
pub use tasks::{Shape, Task, TaskKind};
pub use triallog::{EngineOptions, LogHeader, LogRecord, TrialLog};
