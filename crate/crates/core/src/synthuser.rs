//! Seeded synthetic user.
//!
//! A [`MotionPlan`] is a chain of minimum-jerk hand movements, each either
//! grasped (pinching) or free. [`gen_input_stream`] turns a plan into 100 Hz
//! input samples with a force profile and hand tremor. [`plan_trial`] builds
//! plans for the study tasks: it lays out the intended object path, then
//! finds the hand stroke for every grasped segment by running a noise-free
//! copy of the engine as the user's internal model of the technique.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationProfile;
use crate::engine::{start_session, EngineError, InputSample, Session, TICK};
use crate::mapping::TechniqueConfig;
use crate::tasks::{Task, TaskKind, TracePath};
use crate::triallog::{EngineOptions, TrialLog};
use crate::vec3::{self, Vec3};

pub const DEFAULT_TREMOR: f64 = 0.0005;
/// Force ramps up within this many seconds of a significant waypoint.
pub const TURN_WINDOW: f64 = 0.1;
pub const TURN_THRESHOLD_DEG: f64 = 10.0;
/// Fraction of each segment held with heavy force under `LightThenHeavy`.
pub const HEAVY_TAIL: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("t = {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("invalid motion plan: {0}")]
    InvalidPlan(String),
    #[error("target unreachable: {0}")]
    Unreachable(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceStrategy {
    /// Firm pinch for the whole movement.
    ConstantHeavyForce,
    /// Light on straight stretches, firm around corners and the goal.
    DynamicModulation,
    /// Light in transit, firm over the last part of each segment.
    LightThenHeavy,
}

impl std::str::FromStr for ForceStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "constantheavyforce" | "constantheavy" | "heavy" => Ok(Self::ConstantHeavyForce),
            "dynamicmodulation" | "dynamic" => Ok(Self::DynamicModulation),
            "lightthenheavy" => Ok(Self::LightThenHeavy),
            other => Err(format!("unknown force strategy `{other}`")),
        }
    }
}

fn min_jerk_profile(tau: f64) -> f64 {
    tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
}

/// Minimum-jerk position between `x0` and `x1` at time `t` of a movement
/// lasting `duration` seconds.
pub fn min_jerk(x0: Vec3, x1: Vec3, duration: f64, t: f64) -> Result<Vec3, SynthError> {
    if !(duration > 0.0) || !(0.0..=duration).contains(&t) {
        return Err(SynthError::TimeOutOfRange { t, duration });
    }
    Ok(lerp_profile(x0, x1, t / duration))
}

fn lerp_profile(x0: Vec3, x1: Vec3, tau: f64) -> Vec3 {
    vec3::add(x0, vec3::scale(vec3::sub(x1, x0), min_jerk_profile(tau)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPlan {
    pub waypoints: Vec<Vec3>,
    pub segment_durations: Vec<f64>,
    /// Whether the hand pinches during each segment; empty means every
    /// segment is grasped.
    #[serde(default)]
    pub grasp: Vec<bool>,
    pub strategy: ForceStrategy,
}

impl MotionPlan {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidPlan(m));
        if self.waypoints.len() < 2 {
            return bad(format!(
                "need at least 2 waypoints, got {}",
                self.waypoints.len()
            ));
        }
        if self.segment_durations.len() != self.waypoints.len() - 1 {
            return bad("one duration per segment required".into());
        }
        if let Some(d) = self
            .segment_durations
            .iter()
            .find(|d| !(**d > 0.0 && d.is_finite()))
        {
            return bad(format!("segment durations must be positive, got {d}"));
        }
        if !self.grasp.is_empty() && self.grasp.len() != self.segment_durations.len() {
            return bad("grasp flags must match the segment count".into());
        }
        if self.waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return bad("waypoints must be finite".into());
        }
        Ok(())
    }

    fn grasped(&self, seg: usize) -> bool {
        self.grasp.get(seg).copied().unwrap_or(true)
    }

    pub fn segment_count(&self) -> usize {
        self.segment_durations.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub tremor_amplitude: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            tremor_amplitude: 0.0,
            seed: 0,
        }
    }
}

/// Raw sensor readings used for a relaxed and a firm pinch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceLevels {
    pub light: f64,
    pub heavy: f64,
}

impl ForceLevels {
    /// The calibrated extremes, or the normalized range without a profile.
    pub fn from_profile(profile: Option<&CalibrationProfile>) -> Self {
        match profile {
            Some(p) => Self {
                light: p.anchors().f_min,
                heavy: p.anchors().f_max,
            },
            None => Self {
                light: 0.0,
                heavy: 1.0,
            },
        }
    }
}

/// Per-tick layout of a plan: segment boundaries in ticks, pinch state and
/// force for every tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub boundaries: Vec<usize>,
    pub pinching: Vec<bool>,
    pub force: Vec<f64>,
}

impl Schedule {
    pub fn ticks(&self) -> usize {
        self.pinching.len()
    }

    /// Index of the segment a tick moves along; tick 0 belongs to segment 0.
    pub fn owner(&self, tick: usize) -> usize {
        let segs = self.boundaries.len() - 1;
        let i = self.boundaries.partition_point(|&b| b < tick);
        i.saturating_sub(1).min(segs - 1)
    }

    fn local(&self, tick: usize) -> (usize, usize, usize) {
        let seg = self.owner(tick);
        let n = self.boundaries[seg + 1] - self.boundaries[seg];
        (seg, (tick - self.boundaries[seg]).min(n), n)
    }
}

fn segment_ticks(duration: f64) -> usize {
    ((duration / TICK).round() as usize).max(1)
}

fn turn_angle_deg(a: Vec3, b: Vec3) -> Option<f64> {
    let (ua, ub) = (vec3::normalize(a)?, vec3::normalize(b)?);
    Some(vec3::dot(ua, ub).clamp(-1.0, 1.0).acos().to_degrees())
}

/// Builds the tick schedule. Forces depend only on segment directions,
/// timing and grasp flags, never on segment lengths.
pub fn schedule(plan: &MotionPlan, levels: ForceLevels) -> Result<Schedule, SynthError> {
    plan.validate()?;
    let segs = plan.segment_count();
    let mut boundaries = vec![0usize];
    for &d in &plan.segment_durations {
        boundaries.push(boundaries.last().unwrap() + segment_ticks(d));
    }
    let last_tick = boundaries[segs];
    let ends_grasped = plan.grasped(segs - 1);
    let ticks = last_tick + 1 + usize::from(ends_grasped);

    let mut pinching = vec![false; ticks];
    for (seg, w) in boundaries.windows(2).enumerate() {
        if plan.grasped(seg) {
            for p in &mut pinching[w[0]..=w[1]] {
                *p = true;
            }
        }
    }

    // waypoints where the user firms up the pinch
    let mut significant = Vec::new();
    #[allow(clippy::needless_range_loop)]
    for w in 1..=segs {
        let is_last = w == segs;
        let turns = !is_last
            && turn_angle_deg(
                vec3::sub(plan.waypoints[w], plan.waypoints[w - 1]),
                vec3::sub(plan.waypoints[w + 1], plan.waypoints[w]),
            )
            .is_some_and(|a| a > TURN_THRESHOLD_DEG);
        let releases = !is_last && plan.grasped(w - 1) && !plan.grasped(w);
        if is_last || turns || releases {
            significant.push(boundaries[w]);
        }
    }
    let window = (TURN_WINDOW / TICK).round() as usize;

    let sched = Schedule {
        boundaries,
        pinching,
        force: Vec::new(),
    };
    let force = (0..ticks)
        .map(|k| {
            if !sched.pinching[k] || k > last_tick {
                return levels.light;
            }
            let heavy = match plan.strategy {
                ForceStrategy::ConstantHeavyForce => true,
                ForceStrategy::DynamicModulation => {
                    significant.iter().any(|&b| b.abs_diff(k) <= window)
                }
                ForceStrategy::LightThenHeavy => {
                    let (seg, j, n) = sched.local(k);
                    // a grasp starting at a free segment's last tick is the
                    // next segment's first tick
                    let (j, n) = if plan.grasped(seg) { (j, n) } else { (0, 1) };
                    j as f64 > (1.0 - HEAVY_TAIL) * n as f64
                }
            };
            if heavy {
                levels.heavy
            } else {
                levels.light
            }
        })
        .collect();
    Ok(Schedule { force, ..sched })
}

/// Independent Gaussian hand-space offsets, one per axis per tick.
pub fn tremor_offsets(noise: &NoiseModel, ticks: usize) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(7);
    let a = noise.tremor_amplitude;
    (0..ticks)
        .map(|_| {
            let z: [f64; 3] = [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ];
            vec3::scale(z, a)
        })
        .collect()
}

fn nominal_hand(plan: &MotionPlan, sched: &Schedule, tick: usize) -> Vec3 {
    let last = sched.boundaries[sched.boundaries.len() - 1];
    if tick >= last {
        return plan.waypoints[plan.waypoints.len() - 1];
    }
    let (seg, j, n) = sched.local(tick);
    lerp_profile(
        plan.waypoints[seg],
        plan.waypoints[seg + 1],
        j as f64 / n as f64,
    )
}

/// Renders a plan to 100 Hz samples starting at t = 0. A plan that ends
/// grasped gets one trailing release tick.
pub fn gen_input_stream(
    plan: &MotionPlan,
    noise: &NoiseModel,
    profile: Option<&CalibrationProfile>,
) -> Result<Vec<InputSample>, SynthError> {
    if !(noise.tremor_amplitude >= 0.0) {
        return Err(SynthError::InvalidPlan(format!(
            "tremor amplitude must be nonnegative, got {}",
            noise.tremor_amplitude
        )));
    }
    let sched = schedule(plan, ForceLevels::from_profile(profile))?;
    let tremor = tremor_offsets(noise, sched.ticks());
    Ok((0..sched.ticks())
        .map(|k| InputSample {
            t: k as f64 * TICK,
            hand_pos: vec3::add(nominal_hand(plan, &sched, k), tremor[k]),
            raw_force: sched.force[k],
            pinching: sched.pinching[k],
        })
        .collect())
}

/// Movement habits of the synthetic user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Longest hand stroke per grab; longer moves are split into grabs with
    /// a free return stroke in between. `None` never clutches.
    pub max_reach: Option<f64>,
    pub slider_duration: f64,
    pub grab_duration: f64,
    pub return_duration: f64,
    /// Object-space speed along trace paths, m/s.
    pub trace_speed: f64,
    /// Minimum spacing of trace waypoints, meters.
    pub trace_spacing: f64,
    pub min_segment_duration: f64,
}

impl PolicyParams {
    pub fn for_task(kind: TaskKind) -> Self {
        Self {
            max_reach: match kind {
                TaskKind::Placement => Some(0.6),
                TaskKind::Slider | TaskKind::Trace => None,
            },
            slider_duration: 2.0,
            grab_duration: 1.0,
            return_duration: 0.5,
            trace_speed: 0.25,
            trace_spacing: 0.05,
            min_segment_duration: 0.1,
        }
    }
}

/// Trace waypoints: every corner sharper than the turn threshold plus
/// enough intermediate vertices to keep spacing near `spacing`.
pub fn trace_waypoints(path: &TracePath, spacing: f64) -> Vec<Vec3> {
    let pts: Vec<Vec3> = path.polyline.iter().map(|p| [p[0], p[1], 0.0]).collect();
    let mut out = vec![pts[0]];
    let mut acc = 0.0;
    for i in 1..pts.len() {
        acc += vec3::dist(pts[i], pts[i - 1]);
        let corner = i + 1 < pts.len()
            && turn_angle_deg(vec3::sub(pts[i], pts[i - 1]), vec3::sub(pts[i + 1], pts[i]))
                .is_some_and(|a| a > TURN_THRESHOLD_DEG);
        if i + 1 == pts.len() || corner || acc >= spacing {
            out.push(pts[i]);
            acc = 0.0;
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum SegmentGoal {
    /// Grasped: carry the object to this position.
    Carry(Vec3),
    /// Free: undo the hand stroke of an earlier segment.
    Return(usize),
}

#[derive(Debug, Clone, Copy)]
struct SegmentSpec {
    dir: Vec3,
    duration: f64,
    goal: SegmentGoal,
}

impl SegmentSpec {
    fn grasped(&self) -> bool {
        matches!(self.goal, SegmentGoal::Carry(_))
    }
}

fn carry_specs(start: Vec3, targets: &[Vec3], durations: impl Fn(f64) -> f64) -> Vec<SegmentSpec> {
    let mut prev = start;
    targets
        .iter()
        .map(|&p| {
            let d = vec3::sub(p, prev);
            prev = p;
            SegmentSpec {
                dir: vec3::normalize(d).unwrap_or(vec3::ZERO),
                duration: durations(vec3::norm(d)),
                goal: SegmentGoal::Carry(p),
            }
        })
        .collect()
}

fn clutch_specs(
    start: Vec3,
    target: Vec3,
    grabs: usize,
    p: &PolicyParams,
    carry_duration: f64,
) -> Vec<SegmentSpec> {
    let axis = vec3::sub(target, start);
    let dir = vec3::normalize(axis).unwrap_or(vec3::ZERO);
    let mut specs = Vec::new();
    for g in 0..grabs {
        let goal = if g + 1 == grabs {
            target
        } else {
            vec3::add(start, vec3::scale(axis, (g + 1) as f64 / grabs as f64))
        };
        specs.push(SegmentSpec {
            dir,
            duration: carry_duration,
            goal: SegmentGoal::Carry(goal),
        });
        if g + 1 < grabs {
            specs.push(SegmentSpec {
                dir: vec3::scale(dir, -1.0),
                duration: p.return_duration,
                goal: SegmentGoal::Return(specs.len() - 1),
            });
        }
    }
    specs
}

fn step_tick(
    session: &mut Session,
    sched: &Schedule,
    tick: usize,
    hand: Vec3,
) -> Result<(), EngineError> {
    session
        .step(&InputSample {
            t: tick as f64 * TICK,
            hand_pos: hand,
            raw_force: sched.force[tick],
            pinching: sched.pinching[tick],
        })
        .map(|_| ())
}

/// Runs the ticks of one segment with the given end waypoint. When the next
/// tick releases, it is included so rollback is accounted for.
fn run_segment(
    session: &mut Session,
    sched: &Schedule,
    seg: usize,
    x0: Vec3,
    x1: Vec3,
    include_release: bool,
) -> Result<(), EngineError> {
    let (b0, b1) = (sched.boundaries[seg], sched.boundaries[seg + 1]);
    let n = b1 - b0;
    for k in b0 + 1..=b1 {
        step_tick(
            session,
            sched,
            k,
            lerp_profile(x0, x1, (k - b0) as f64 / n as f64),
        )?;
    }
    if include_release && b1 + 1 < sched.ticks() && !sched.pinching[b1 + 1] {
        step_tick(session, sched, b1 + 1, x1)?;
    }
    Ok(())
}

/// Finds the stroke length that carries the object to `goal`, by bracketed
/// regula falsi (Illinois variant) on a noise-free forward simulation.
fn solve_stroke(
    base: &Session,
    sched: &Schedule,
    seg: usize,
    x0: Vec3,
    dir: Vec3,
    goal: Vec3,
    guess: f64,
) -> Result<f64, SynthError> {
    let origin = base.object_pos();
    let wanted = vec3::dot(vec3::sub(goal, origin), dir);
    if wanted <= 0.0 || dir == vec3::ZERO {
        return Ok(0.0);
    }
    let progress = |len: f64| -> Result<f64, SynthError> {
        let mut s = base.clone();
        let x1 = vec3::add(x0, vec3::scale(dir, len));
        run_segment(&mut s, sched, seg, x0, x1, true)?;
        Ok(vec3::dot(vec3::sub(s.object_pos(), origin), dir) - wanted)
    };

    let (mut lo, mut f_lo) = (0.0, -wanted);
    let mut hi = guess.max(1e-6);
    let mut f_hi = progress(hi)?;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(SynthError::Unreachable(format!(
                "segment {seg} cannot reach {goal:?}"
            )));
        }
        f_hi = progress(hi)?;
    }
    let tol = 1e-13 * wanted.max(1e-3);
    let mut side = 0i8;
    let mut best = hi;
    for _ in 0..200 {
        let mid = if f_hi != f_lo {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        } else {
            0.5 * (lo + hi)
        };
        let mid = if mid > lo && mid < hi {
            mid
        } else {
            0.5 * (lo + hi)
        };
        let f_mid = progress(mid)?;
        best = mid;
        if f_mid.abs() <= tol || hi - lo <= 1e-15 * hi {
            break;
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            f_hi = f_mid;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(best)
}

fn solve_plan(
    task: &Task,
    cfg: &TechniqueConfig,
    profile: Option<&CalibrationProfile>,
    specs: &[SegmentSpec],
    strategy: ForceStrategy,
    options: EngineOptions,
) -> Result<(MotionPlan, Vec<f64>), SynthError> {
    let home = task.start_pos();
    let mut skeleton = vec![home];
    for s in specs {
        skeleton.push(vec3::add(*skeleton.last().unwrap(), s.dir));
    }
    let mut plan = MotionPlan {
        waypoints: skeleton,
        segment_durations: specs.iter().map(|s| s.duration).collect(),
        grasp: specs.iter().map(SegmentSpec::grasped).collect(),
        strategy,
    };
    let sched = schedule(&plan, ForceLevels::from_profile(profile))?;

    let mut session = start_session(task.clone(), cfg, profile, 0, options)?;
    session.set_recording(false);
    step_tick(&mut session, &sched, 0, home)?;

    let mut waypoints = vec![home];
    let mut lengths = Vec::with_capacity(specs.len());
    for (seg, spec) in specs.iter().enumerate() {
        let x0 = waypoints[seg];
        let len = match spec.goal {
            SegmentGoal::Return(of) => lengths[of],
            SegmentGoal::Carry(goal) => {
                let guess = vec3::dist(goal, session.object_pos()) / cfg.base_gain_c;
                solve_stroke(&session, &sched, seg, x0, spec.dir, goal, guess)?
            }
        };
        let x1 = vec3::add(x0, vec3::scale(spec.dir, len));
        run_segment(&mut session, &sched, seg, x0, x1, false)?;
        waypoints.push(x1);
        lengths.push(len);
    }
    plan.waypoints = waypoints;
    Ok((plan, lengths))
}

/// Plans the hand motion that completes `task` with the given technique.
///
/// Slider and placement run along the straight start-to-target line,
/// clutching when a stroke would exceed the reach limit. Tracing follows
/// the path's waypoints in one continuous grasp.
pub fn plan_trial(
    task: &Task,
    cfg: &TechniqueConfig,
    profile: Option<&CalibrationProfile>,
    strategy: ForceStrategy,
    params: &PolicyParams,
    options: EngineOptions,
) -> Result<MotionPlan, SynthError> {
    let min_d = params.min_segment_duration;
    match task {
        Task::Trace(path) => {
            let pts = trace_waypoints(path, params.trace_spacing);
            let specs = carry_specs(pts[0], &pts[1..], |len| {
                (len / params.trace_speed).max(min_d)
            });
            Ok(solve_plan(task, cfg, profile, &specs, strategy, options)?.0)
        }
        Task::Slider(_) | Task::Placement(_) => {
            let start = task.start_pos();
            let target = task
                .target_pos()
                .expect("slider and placement have targets");
            let carry = match task {
                Task::Slider(_) => params.slider_duration,
                _ => params.grab_duration,
            };
            for grabs in 1..=64 {
                let specs = clutch_specs(start, target, grabs, params, carry);
                let (plan, lengths) = solve_plan(task, cfg, profile, &specs, strategy, options)?;
                let fits = params
                    .max_reach
                    .is_none_or(|r| lengths.iter().all(|&l| l <= r));
                if fits {
                    return Ok(plan);
                }
            }
            Err(SynthError::Unreachable(
                "no clutch count up to 64 keeps strokes within reach".into(),
            ))
        }
    }
}

/// One synthetic trial: plans the task, renders a stream with tremor seeded
/// by `seed` and replays it through a fresh engine session.
#[allow(clippy::too_many_arguments)]
pub fn simulate_trial(
    task: &Task,
    cfg: &TechniqueConfig,
    profile: Option<&CalibrationProfile>,
    strategy: ForceStrategy,
    params: &PolicyParams,
    tremor_amplitude: f64,
    seed: u64,
    options: EngineOptions,
) -> Result<TrialLog, SynthError> {
    let plan = plan_trial(task, cfg, profile, strategy, params, options)?;
    let noise = NoiseModel {
        tremor_amplitude,
        seed,
    };
    let stream = gen_input_stream(&plan, &noise, profile)?;
    let mut session = start_session(task.clone(), cfg, profile, seed, options)?;
    session.run(&stream)?;
    Ok(session.into_trial_log())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::Technique;
    use crate::tasks::{make_slider_trial, make_trace_path, PlacementTrial, Shape};

    #[test]
    fn min_jerk_boundaries_and_midpoint() {
        let x0 = [1.0, -2.0, 0.5];
        let x1 = [3.0, 2.0, -0.5];
        assert_eq!(min_jerk(x0, x1, 2.0, 0.0).unwrap(), x0);
        assert_eq!(min_jerk(x0, x1, 2.0, 2.0).unwrap(), x1);
        let mid = min_jerk(x0, x1, 2.0, 1.0).unwrap();
        for i in 0..3 {
            assert!((mid[i] - 0.5 * (x0[i] + x1[i])).abs() < 1e-15);
        }
        assert!(matches!(
            min_jerk(x0, x1, 2.0, 2.5),
            Err(SynthError::TimeOutOfRange { .. })
        ));
        assert!(min_jerk(x0, x1, 2.0, -0.1).is_err());
    }

    #[test]
    fn min_jerk_endpoints_are_at_rest() {
        // central differences of the quintic, which extends past [0, T]
        let (x0, x1) = ([0.0; 3], [1.0, -2.0, 0.5]);
        let h = 1e-4;
        let at = |tau: f64| lerp_profile(x0, x1, tau);
        for tau in [0.0, 1.0] {
            let (a, m, b) = (at(tau - h), at(tau), at(tau + h));
            for i in 0..3 {
                let vel = (b[i] - a[i]) / (2.0 * h);
                let acc = (b[i] - 2.0 * m[i] + a[i]) / (h * h);
                assert!(vel.abs() < 1e-6, "vel {vel} at {tau}");
                assert!(acc.abs() < 1e-6, "acc {acc} at {tau}");
            }
        }
        assert_eq!(min_jerk(x0, x1, 1.0, 1.0).unwrap(), at(1.0));
    }

    fn single_segment(strategy: ForceStrategy) -> MotionPlan {
        MotionPlan {
            waypoints: vec![[0.0; 3], [0.4, 0.1, 0.0]],
            segment_durations: vec![1.0],
            grasp: vec![],
            strategy,
        }
    }

    #[test]
    fn heavy_strategy_without_noise() {
        let plan = single_segment(ForceStrategy::ConstantHeavyForce);
        let profile = crate::calibration::build_force_mapping(
            crate::calibration::ForceAnchors::new(2.0, 5.0, 9.0).unwrap(),
            1.0,
        )
        .unwrap();
        let s = gen_input_stream(&plan, &NoiseModel::none(), Some(&profile)).unwrap();
        assert_eq!(s.len(), 102);
        let pinched: Vec<_> = s.iter().filter(|x| x.pinching).collect();
        assert_eq!(pinched.len(), 101);
        assert!(pinched.iter().all(|x| x.raw_force == 9.0));
        assert_eq!(pinched.last().unwrap().hand_pos, [0.4, 0.1, 0.0]);
        assert!(!s.last().unwrap().pinching);
    }

    #[test]
    fn streams_are_seeded() {
        let plan = single_segment(ForceStrategy::DynamicModulation);
        let noise = NoiseModel {
            tremor_amplitude: 0.001,
            seed: 11,
        };
        let a = gen_input_stream(&plan, &noise, None).unwrap();
        let b = gen_input_stream(&plan, &noise, None).unwrap();
        assert_eq!(a, b);
        let other = NoiseModel { seed: 12, ..noise };
        assert_ne!(a, gen_input_stream(&plan, &other, None).unwrap());
        for w in a.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!((w[1].t - w[0].t - TICK).abs() < 1e-12);
        }
    }

    #[test]
    fn tremor_std_dev_matches_amplitude() {
        let a = 0.0005;
        let offsets = tremor_offsets(
            &NoiseModel {
                tremor_amplitude: a,
                seed: 3,
            },
            100_000,
        );
        for axis in 0..3 {
            let n = offsets.len() as f64;
            let mean = offsets.iter().map(|o| o[axis]).sum::<f64>() / n;
            let var = offsets
                .iter()
                .map(|o| (o[axis] - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            let sd = var.sqrt();
            assert!((sd - a).abs() < 0.1 * a, "axis {axis}: {sd}");
        }
    }

    #[test]
    fn light_then_heavy_tail() {
        let plan = single_segment(ForceStrategy::LightThenHeavy);
        let s = gen_input_stream(&plan, &NoiseModel::none(), None).unwrap();
        // 100 ticks; ticks 81..=100 heavy
        let heavy: Vec<usize> = (0..s.len()).filter(|&k| s[k].raw_force == 1.0).collect();
        assert_eq!(heavy.first(), Some(&81));
        assert_eq!(heavy.last(), Some(&100));
        assert_eq!(heavy.len(), 20);
    }

    #[test]
    fn dynamic_modulation_firms_up_at_corners() {
        let plan = MotionPlan {
            waypoints: vec![[0.0; 3], [0.3, 0.0, 0.0], [0.6, 0.0, 0.0], [0.6, 0.3, 0.0]],
            segment_durations: vec![0.5, 0.5, 0.5],
            grasp: vec![],
            strategy: ForceStrategy::DynamicModulation,
        };
        let s = schedule(
            &plan,
            ForceLevels {
                light: 0.0,
                heavy: 1.0,
            },
        )
        .unwrap();
        // collinear waypoint at tick 50 stays light, the corner at 100 and the end at 150 firm up
        assert_eq!(s.force[50], 0.0);
        assert_eq!(s.force[89], 0.0);
        assert!((90..=110).all(|k| s.force[k] == 1.0));
        assert_eq!(s.force[111], 0.0);
        assert!((140..=150).all(|k| s.force[k] == 1.0));
    }

    #[test]
    fn invalid_plans_rejected() {
        let mut p = single_segment(ForceStrategy::ConstantHeavyForce);
        p.segment_durations = vec![0.0];
        assert!(gen_input_stream(&p, &NoiseModel::none(), None).is_err());
        let mut p = single_segment(ForceStrategy::ConstantHeavyForce);
        p.waypoints.pop();
        assert!(gen_input_stream(&p, &NoiseModel::none(), None).is_err());
        let p = single_segment(ForceStrategy::ConstantHeavyForce);
        let bad = NoiseModel {
            tremor_amplitude: -1.0,
            seed: 0,
        };
        assert!(gen_input_stream(&p, &bad, None).is_err());
    }

    #[test]
    fn constant_unit_gain_reproduces_plan_endpoint() {
        let task = Task::Placement(PlacementTrial {
            object_start: [0.1, 0.2, 0.3],
            target_pos: [3.0, 0.0, 0.0],
        });
        let plan = MotionPlan {
            waypoints: vec![[0.1, 0.2, 0.3], [0.5, 0.9, -0.2], [1.3, 0.4, 0.6]],
            segment_durations: vec![0.73, 1.2],
            grasp: vec![],
            strategy: ForceStrategy::DynamicModulation,
        };
        let stream = gen_input_stream(&plan, &NoiseModel::none(), None).unwrap();
        let cfg = TechniqueConfig::new(Technique::Constant, 1.0);
        let mut s = start_session(task, &cfg, None, 0, EngineOptions::default()).unwrap();
        s.run(&stream).unwrap();
        let end = plan.waypoints[2];
        for (got, want) in s.object_pos().iter().zip(end) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn planned_slider_reaches_target_for_every_technique() {
        let task = Task::Slider(make_slider_trial(4));
        let target = task.target_pos().unwrap();
        let profile = crate::calibration::build_force_mapping(
            crate::calibration::ForceAnchors::new(0.1, 0.5, 0.9).unwrap(),
            0.5,
        )
        .unwrap();
        for t in Technique::ALL {
            let cfg = TechniqueConfig::new(t, 0.5);
            let params = PolicyParams::for_task(TaskKind::Slider);
            let plan = plan_trial(
                &task,
                &cfg,
                Some(&profile),
                ForceStrategy::LightThenHeavy,
                &params,
                EngineOptions::default(),
            )
            .unwrap();
            let stream = gen_input_stream(&plan, &NoiseModel::none(), Some(&profile)).unwrap();
            let mut s = start_session(
                task.clone(),
                &cfg,
                Some(&profile),
                0,
                EngineOptions::default(),
            )
            .unwrap();
            s.run(&stream).unwrap();
            assert!(
                (s.object_pos()[0] - target[0]).abs() < 1e-9,
                "{t}: {:?}",
                s.object_pos()
            );
        }
    }

    #[test]
    fn placement_clutches_within_reach() {
        let task = Task::Placement(PlacementTrial {
            object_start: [0.0; 3],
            target_pos: [0.0, 2.0, 2.0],
        });
        let cfg = TechniqueConfig::new(Technique::Constant, 1.0);
        let params = PolicyParams::for_task(TaskKind::Placement);
        let plan = plan_trial(
            &task,
            &cfg,
            None,
            ForceStrategy::ConstantHeavyForce,
            &params,
            EngineOptions::default(),
        )
        .unwrap();
        // 2.83 m at unit gain with 0.6 m reach needs 5 grabs
        assert_eq!(plan.grasp.iter().filter(|g| **g).count(), 5);
        for w in plan.waypoints.windows(2) {
            assert!(vec3::dist(w[0], w[1]) <= 0.6 + 1e-9);
        }
        let stream = gen_input_stream(&plan, &NoiseModel::none(), None).unwrap();
        let mut s = start_session(task.clone(), &cfg, None, 0, EngineOptions::default()).unwrap();
        s.run(&stream).unwrap();
        assert_eq!(s.op_count(), 5);
        assert!(vec3::dist(s.object_pos(), [0.0, 2.0, 2.0]) < 1e-9);
    }

    #[test]
    fn planned_trace_follows_waypoints() {
        let path = make_trace_path(Shape::Star);
        let task = Task::Trace(path.clone());
        let cfg = TechniqueConfig::new(Technique::GoGo, 0.5);
        let params = PolicyParams::for_task(TaskKind::Trace);
        let plan = plan_trial(
            &task,
            &cfg,
            None,
            ForceStrategy::DynamicModulation,
            &params,
            EngineOptions::default(),
        )
        .unwrap();
        let stream = gen_input_stream(&plan, &NoiseModel::none(), None).unwrap();
        let mut s = start_session(task, &cfg, None, 0, EngineOptions::default()).unwrap();
        s.run(&stream).unwrap();
        // a straight-segment path is reproduced up to solver tolerance
        let worst = s
            .records()
            .iter()
            .map(|r| {
                crate::metrics::point_polyline_distance(
                    [r.object_pos[0], r.object_pos[1]],
                    &path.polyline,
                )
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn trace_waypoints_keep_corners() {
        let sq = make_trace_path(Shape::Square);
        assert_eq!(trace_waypoints(&sq, 0.05).len(), 5);
        let circle = make_trace_path(Shape::Circle);
        let w = trace_waypoints(&circle, 0.05);
        assert!(w.len() > 30 && w.len() < 60, "{}", w.len());
        assert_eq!(w.last(), Some(&[0.4, 0.0, 0.0]));
    }
}
