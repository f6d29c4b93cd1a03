//! 100 Hz manipulation session: pinch lifecycle, speed evaluation,
//! kinematic integration and peak-force release rollback.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{eval_curve, CalibrationError, CalibrationProfile};
use crate::mapping::{
    cursor_radius, eval_constant, gogo_multiple, prism_multiple, MappingError, SpeedSample,
    Technique, TechniqueConfig,
};
use crate::tasks::Task;
use crate::triallog::{EngineOptions, LogHeader, LogRecord, TrialLog, LOG_FORMAT};
use crate::vec3::{self, Vec3};

pub const TICK: f64 = 0.01;
pub const VELOCITY_WINDOW: f64 = 0.1;
pub const ROLLBACK_WINDOW: f64 = 0.2;
/// Slack on window edges so ticks accumulated as `k * 0.01` stay inside.
const WINDOW_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("technique forcepinch requires a calibration profile")]
    MissingProfile,
    #[error("sample time {got} does not exceed previous time {prev}")]
    NonMonotonicTime { prev: f64, got: f64 },
    #[error("invalid input sample: {0}")]
    InvalidSample(String),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// One tick of tracked input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSample {
    pub t: f64,
    pub hand_pos: Vec3,
    pub raw_force: f64,
    pub pinching: bool,
}

/// What the display needs after each tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineFrame {
    pub object_pos: Vec3,
    pub speed: f64,
    pub cursor_radius: f64,
    pub pinch_active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ForceEntry {
    t: f64,
    raw: f64,
    object_pos: Vec3,
}

/// Hand speed over a window of `(t, position)` samples: net displacement
/// divided by the window span. Zero for fewer than two samples.
pub fn estimate_velocity(window: &[(f64, Vec3)]) -> f64 {
    match (window.first(), window.last()) {
        (Some(&(t0, p0)), Some(&(t1, p1))) if t1 > t0 => vec3::dist(p1, p0) / (t1 - t0),
        _ => 0.0,
    }
}

/// Object position at the tick of highest force within `ROLLBACK_WINDOW` of
/// `t_release`; ties go to the latest tick.
fn rollback_target(history: &VecDeque<ForceEntry>, t_release: f64) -> Option<Vec3> {
    let mut best: Option<&ForceEntry> = None;
    for e in history
        .iter()
        .filter(|e| t_release - e.t <= ROLLBACK_WINDOW + WINDOW_SLACK)
    {
        if best.is_none_or(|b| e.raw >= b.raw) {
            best = Some(e);
        }
    }
    best.map(|e| e.object_pos)
}

#[derive(Debug, Clone)]
pub struct Session {
    task: Task,
    cfg: TechniqueConfig,
    profile: Option<CalibrationProfile>,
    options: EngineOptions,
    seed: u64,
    object_pos: Vec3,
    pinch_active: bool,
    gogo_anchor: Option<Vec3>,
    prev_hand: Option<Vec3>,
    last_t: Option<f64>,
    velocity_window: VecDeque<(f64, Vec3)>,
    force_history: VecDeque<ForceEntry>,
    log: Vec<LogRecord>,
    recording: bool,
    op_count: usize,
}

/// Opens a session with the object at the task's start position.
///
/// A supplied profile is rebuilt with the technique's base gain and curve
/// shape so both always agree.
pub fn start_session(
    task: Task,
    cfg: &TechniqueConfig,
    profile: Option<&CalibrationProfile>,
    seed: u64,
    options: EngineOptions,
) -> Result<Session, EngineError> {
    cfg.validate()?;
    if cfg.technique == Technique::ForcePinch && profile.is_none() {
        return Err(EngineError::MissingProfile);
    }
    let profile = profile
        .map(|p| p.rebuilt(&cfg.forcepinch, cfg.base_gain_c))
        .transpose()?;
    Ok(Session {
        object_pos: task.start_pos(),
        task,
        cfg: cfg.clone(),
        profile,
        options,
        seed,
        pinch_active: false,
        gogo_anchor: None,
        prev_hand: None,
        last_t: None,
        velocity_window: VecDeque::new(),
        force_history: VecDeque::new(),
        log: Vec::new(),
        recording: true,
        op_count: 0,
    })
}

impl Session {
    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn config(&self) -> &TechniqueConfig {
        &self.cfg
    }

    pub fn profile(&self) -> Option<&CalibrationProfile> {
        self.profile.as_ref()
    }

    pub fn object_pos(&self) -> Vec3 {
        self.object_pos
    }

    pub fn pinch_active(&self) -> bool {
        self.pinch_active
    }

    pub fn gogo_anchor(&self) -> Option<Vec3> {
        self.gogo_anchor
    }

    /// Completed pinch cycles.
    pub fn op_count(&self) -> usize {
        self.op_count
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.log
    }

    /// Turns per-tick logging on or off; forward simulations that clone a
    /// session many times run without it.
    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    pub fn rollback_enabled(&self) -> bool {
        self.options
            .rollback
            .unwrap_or(self.cfg.technique == Technique::ForcePinch)
    }

    pub fn header(&self) -> LogHeader {
        LogHeader {
            format: LOG_FORMAT.to_string(),
            seed: self.seed,
            task: self.task.clone(),
            technique: self.cfg.clone(),
            options: self.options,
            profile_digest: self.profile.as_ref().map(|p| p.digest()),
        }
    }

    pub fn trial_log(&self) -> TrialLog {
        TrialLog {
            header: self.header(),
            records: self.log.clone(),
        }
    }

    pub fn into_trial_log(self) -> TrialLog {
        TrialLog {
            header: self.header(),
            records: self.log,
        }
    }

    fn speed_for(&self, sample: &InputSample) -> SpeedSample {
        let c = self.cfg.base_gain_c;
        match self.cfg.technique {
            Technique::Constant => eval_constant(&self.cfg),
            Technique::GoGo => {
                let d = self
                    .gogo_anchor
                    .map_or(0.0, |a| vec3::dist(sample.hand_pos, a));
                SpeedSample(c * gogo_multiple(d, &self.cfg.gogo))
            }
            Technique::Prism => {
                let v = estimate_velocity(self.velocity_window.as_slices().0);
                SpeedSample(c * prism_multiple(v, &self.cfg.prism))
            }
            Technique::ForcePinch => {
                let profile = self.profile.as_ref().expect("checked at session start");
                eval_curve(profile, sample.raw_force)
            }
        }
    }

    /// Restores the object to its position at the peak-force tick of the
    /// trailing window. No-op with an empty history.
    pub fn apply_rollback(&mut self, t_release: f64) -> Vec3 {
        if let Some(p) = rollback_target(&self.force_history, t_release) {
            self.object_pos = p;
        }
        self.object_pos
    }

    pub fn step(&mut self, sample: &InputSample) -> Result<EngineFrame, EngineError> {
        if !sample.t.is_finite()
            || !sample.raw_force.is_finite()
            || sample.hand_pos.iter().any(|v| !v.is_finite())
        {
            return Err(EngineError::InvalidSample(format!(
                "non-finite field in sample at t={}",
                sample.t
            )));
        }
        if let Some(prev) = self.last_t {
            if !(sample.t > prev) {
                return Err(EngineError::NonMonotonicTime {
                    prev,
                    got: sample.t,
                });
            }
        }
        let t = sample.t;

        self.velocity_window.push_back((t, sample.hand_pos));
        while self
            .velocity_window
            .front()
            .is_some_and(|&(t0, _)| t - t0 > VELOCITY_WINDOW + WINDOW_SLACK)
        {
            self.velocity_window.pop_front();
        }
        self.velocity_window.make_contiguous();

        let threshold_met = self
            .options
            .min_engage_force
            .is_none_or(|m| sample.raw_force >= m);
        let engaged = sample.pinching && (self.pinch_active || threshold_met);
        let rising = engaged && !self.pinch_active;
        let falling = !engaged && self.pinch_active;

        if rising {
            self.pinch_active = true;
            self.gogo_anchor = Some(sample.hand_pos);
            self.force_history.clear();
        }

        let speed = self.speed_for(sample);

        // the release tick is already unpinched and carries no motion
        if self.pinch_active && !rising && !falling {
            let prev = self
                .prev_hand
                .expect("a pinched tick follows the onset tick");
            let delta = vec3::sub(sample.hand_pos, prev);
            let moved = vec3::add(self.object_pos, vec3::scale(delta, speed.0));
            self.object_pos = self.task.constrain(moved);
        }

        if falling {
            if self.rollback_enabled() {
                self.apply_rollback(t);
            }
            self.pinch_active = false;
            self.gogo_anchor = None;
            self.force_history.clear();
            self.op_count += 1;
        }

        if self.pinch_active {
            self.force_history.push_back(ForceEntry {
                t,
                raw: sample.raw_force,
                object_pos: self.object_pos,
            });
            while self
                .force_history
                .front()
                .is_some_and(|e| t - e.t > ROLLBACK_WINDOW + WINDOW_SLACK)
            {
                self.force_history.pop_front();
            }
        }

        self.prev_hand = Some(sample.hand_pos);
        self.last_t = Some(t);

        if self.recording {
            self.log.push(LogRecord {
                t,
                hand_pos: sample.hand_pos,
                raw_force: sample.raw_force,
                f_norm: self.profile.as_ref().map(|p| p.normalize(sample.raw_force)),
                pinching: self.pinch_active,
                object_pos: self.object_pos,
                speed: speed.0,
            });
        }

        Ok(EngineFrame {
            object_pos: self.object_pos,
            speed: speed.0,
            cursor_radius: cursor_radius(speed, &self.cfg),
            pinch_active: self.pinch_active,
        })
    }

    pub fn run<'a, I>(&mut self, samples: I) -> Result<(), EngineError>
    where
        I: IntoIterator<Item = &'a InputSample>,
    {
        for s in samples {
            self.step(s)?;
        }
        Ok(())
    }
}
