//! The three study tasks: a 1D slider, 2D path tracing and 3D placement.
//!
//! Canvas frame for tracing: origin at the canvas center, x right, y up,
//! meters. Generated trials are pure functions of their seed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::vec3::{self, Vec3};

pub const SLIDER_LENGTH: f64 = 1.5;
pub const SLIDER_TARGET_RANGE: (f64, f64) = (0.5, 0.8);
pub const CANVAS_SIZE: f64 = 1.0;
pub const CANVAS_PADDING: f64 = 0.1;
pub const PLACEMENT_DISTANCE: (f64, f64) = (3.0, 4.0);
pub const SMOOTH_VERTICES: usize = 512;
const SPIRAL_TURNS: f64 = 2.0;
const STAR_INNER_RATIO: f64 = 0.5;

/// Half-width of the padded drawing area.
pub fn canvas_half_extent() -> f64 {
    0.5 * CANVAS_SIZE * (1.0 - 2.0 * CANVAS_PADDING)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliderTrial {
    pub length: f64,
    pub start_value: f64,
    pub target_value: f64,
}

impl SliderTrial {
    /// Handle start as a position along the slider's x axis.
    pub fn start_pos(&self) -> Vec3 {
        [self.start_value * self.length, 0.0, 0.0]
    }

    pub fn target_pos(&self) -> Vec3 {
        [self.target_value * self.length, 0.0, 0.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle,
    Square,
    Triangle,
    Spiral,
    Star,
}

impl Shape {
    pub const ALL: [Shape; 5] = [
        Shape::Circle,
        Shape::Square,
        Shape::Triangle,
        Shape::Spiral,
        Shape::Star,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Square => "square",
            Shape::Triangle => "triangle",
            Shape::Spiral => "spiral",
            Shape::Star => "star",
        }
    }

    pub fn is_closed(self) -> bool {
        !matches!(self, Shape::Spiral)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Shape::ALL
            .into_iter()
            .find(|sh| sh.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown shape `{s}`"))
    }
}

/// A target path on the canvas. Closed paths repeat their first vertex at
/// the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePath {
    pub shape: Shape,
    pub closed: bool,
    pub polyline: Vec<[f64; 2]>,
}

impl TracePath {
    pub fn start_pos(&self) -> Vec3 {
        let p = self.polyline[0];
        [p[0], p[1], 0.0]
    }

    pub fn length(&self) -> f64 {
        self.polyline
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementTrial {
    pub object_start: Vec3,
    pub target_pos: Vec3,
}

/// A concrete trial handed to the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Slider(SliderTrial),
    Trace(TracePath),
    Placement(PlacementTrial),
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Slider(_) => TaskKind::Slider,
            Task::Trace(_) => TaskKind::Trace,
            Task::Placement(_) => TaskKind::Placement,
        }
    }

    pub fn start_pos(&self) -> Vec3 {
        match self {
            Task::Slider(s) => s.start_pos(),
            Task::Trace(p) => p.start_pos(),
            Task::Placement(p) => p.object_start,
        }
    }

    /// Final target for tasks that have one.
    pub fn target_pos(&self) -> Option<Vec3> {
        match self {
            Task::Slider(s) => Some(s.target_pos()),
            Task::Trace(_) => None,
            Task::Placement(p) => Some(p.target_pos),
        }
    }

    /// Restricts a candidate object position to the task's degrees of freedom.
    pub fn constrain(&self, pos: Vec3) -> Vec3 {
        match self {
            Task::Slider(s) => [pos[0].clamp(0.0, s.length), 0.0, 0.0],
            Task::Trace(_) => [pos[0], pos[1], 0.0],
            Task::Placement(_) => pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Slider,
    Trace,
    Placement,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Slider => "slider",
            TaskKind::Trace => "trace",
            TaskKind::Placement => "placement",
        }
    }

    /// Generates the trial for this task kind. Trace trials cycle through
    /// the shapes by seed unless one is given.
    pub fn make_trial(self, seed: u64, shape: Option<Shape>) -> Task {
        match self {
            TaskKind::Slider => Task::Slider(make_slider_trial(seed)),
            TaskKind::Trace => {
                let shape = shape.unwrap_or(Shape::ALL[(seed % 5) as usize]);
                Task::Trace(make_trace_path(shape))
            }
            TaskKind::Placement => Task::Placement(make_placement_trial(seed)),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "slider" | "1d" => Ok(TaskKind::Slider),
            "trace" | "tracing" | "2d" => Ok(TaskKind::Trace),
            "placement" | "3d" => Ok(TaskKind::Placement),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn make_slider_trial(seed: u64) -> SliderTrial {
    let mut rng = task_rng(seed, 1);
    let (lo, hi) = SLIDER_TARGET_RANGE;
    SliderTrial {
        length: SLIDER_LENGTH,
        start_value: 0.0,
        target_value: rng.random_range(lo..=hi),
    }
}

pub fn make_placement_trial(seed: u64) -> PlacementTrial {
    let mut rng = task_rng(seed, 3);
    let dir: [f64; 3] = UnitSphere.sample(&mut rng);
    let (lo, hi) = PLACEMENT_DISTANCE;
    let r = rng.random_range(lo..=hi);
    let object_start = vec3::ZERO;
    PlacementTrial {
        object_start,
        target_pos: vec3::add(object_start, vec3::scale(dir, r)),
    }
}

fn closed_ring(points: impl Iterator<Item = [f64; 2]>) -> Vec<[f64; 2]> {
    let mut v: Vec<[f64; 2]> = points.collect();
    v.push(v[0]);
    v
}

pub fn make_trace_path(shape: Shape) -> TracePath {
    let h = canvas_half_extent();
    let polyline = match shape {
        Shape::Circle => closed_ring((0..SMOOTH_VERTICES).map(|i| {
            let a = 2.0 * PI * i as f64 / SMOOTH_VERTICES as f64;
            [h * a.cos(), h * a.sin()]
        })),
        Shape::Square => closed_ring([[-h, -h], [h, -h], [h, h], [-h, h]].into_iter()),
        Shape::Triangle => {
            let side = 2.0 * h;
            let apex = -h + side * 3f64.sqrt() / 2.0;
            closed_ring([[-h, -h], [h, -h], [0.0, apex]].into_iter())
        }
        Shape::Star => closed_ring((0..10).map(|i| {
            let r = if i % 2 == 0 { h } else { h * STAR_INNER_RATIO };
            let a = PI / 2.0 + PI * i as f64 / 5.0;
            [r * a.cos(), r * a.sin()]
        })),
        Shape::Spiral => {
            let n = 2 * SMOOTH_VERTICES;
            let theta_max = 2.0 * PI * SPIRAL_TURNS;
            (0..n)
                .map(|i| {
                    let theta = theta_max * i as f64 / (n - 1) as f64;
                    let r = h * theta / theta_max;
                    [r * theta.cos(), r * theta.sin()]
                })
                .collect()
        }
    };
    TracePath {
        shape,
        closed: shape.is_closed(),
        polyline,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slider_trial_is_seeded_and_bounded() {
        assert_eq!(make_slider_trial(42), make_slider_trial(42));
        let mut sum = 0.0;
        for seed in 0..1000 {
            let t = make_slider_trial(seed);
            assert!((0.5..=0.8).contains(&t.target_value));
            assert_eq!(t.start_value, 0.0);
            assert_eq!(t.length, 1.5);
            sum += t.target_value;
        }
        let mean = sum / 1000.0;
        // uniform mean 0.65, std of the mean ~0.0027
        assert!((0.62..=0.68).contains(&mean), "{mean}");
    }

    #[test]
    fn placement_distance_and_octants() {
        assert_eq!(make_placement_trial(9), make_placement_trial(9));
        let mut octants = [0usize; 8];
        for seed in 0..1000 {
            let t = make_placement_trial(seed);
            let d = vec3::dist(t.target_pos, t.object_start);
            assert!((3.0 - 1e-12..=4.0 + 1e-12).contains(&d), "{d}");
            let rel = vec3::sub(t.target_pos, t.object_start);
            let idx = (rel[0] > 0.0) as usize
                | ((rel[1] > 0.0) as usize) << 1
                | ((rel[2] > 0.0) as usize) << 2;
            octants[idx] += 1;
        }
        assert!(octants.iter().all(|&n| n > 0), "{octants:?}");
    }

    #[test]
    fn square_corners_at_padded_bounds() {
        let p = make_trace_path(Shape::Square);
        assert_eq!(
            p.polyline,
            vec![
                [-0.4, -0.4],
                [0.4, -0.4],
                [0.4, 0.4],
                [-0.4, 0.4],
                [-0.4, -0.4]
            ]
        );
        for w in p.polyline.windows(2) {
            assert!(w[0][0] == w[1][0] || w[0][1] == w[1][1]);
        }
    }

    #[test]
    fn circle_is_equidistant() {
        let p = make_trace_path(Shape::Circle);
        assert!(p.polyline.len() > SMOOTH_VERTICES);
        for q in &p.polyline {
            assert!(((q[0] * q[0] + q[1] * q[1]).sqrt() - 0.4).abs() < 1e-6);
        }
        assert_eq!(p.polyline.first(), p.polyline.last());
    }

    #[test]
    fn spiral_radius_increases_along_archimedean_oracle() {
        let p = make_trace_path(Shape::Spiral);
        assert!(!p.closed);
        let n = p.polyline.len();
        let mut prev = -1.0;
        for (i, q) in p.polyline.iter().enumerate() {
            let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
            assert!(r > prev);
            // Archimedean: radius proportional to swept angle
            let oracle = 0.4 * i as f64 / (n - 1) as f64;
            assert!((r - oracle).abs() < 1e-12);
            prev = r;
        }
    }

    #[test]
    fn every_shape_stays_inside_padding() {
        for shape in Shape::ALL {
            let p = make_trace_path(shape);
            assert_eq!(p.closed, p.polyline.first() == p.polyline.last());
            for q in &p.polyline {
                assert!(
                    q[0].abs() <= 0.4 + 1e-12 && q[1].abs() <= 0.4 + 1e-12,
                    "{shape}"
                );
            }
        }
    }

    #[test]
    fn triangle_is_equilateral() {
        let p = make_trace_path(Shape::Triangle);
        let sides: Vec<f64> = p
            .polyline
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .collect();
        for s in &sides {
            assert!((s - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn slider_constraint_projects_and_clamps() {
        let t = Task::Slider(make_slider_trial(0));
        assert_eq!(t.constrain([0.3, 2.0, -1.0]), [0.3, 0.0, 0.0]);
        assert_eq!(t.constrain([-0.3, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        assert_eq!(t.constrain([9.0, 0.0, 0.0]), [1.5, 0.0, 0.0]);
    }

    #[test]
    fn task_json_is_tagged() {
        let t = Task::Slider(make_slider_trial(1));
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["kind"], "slider");
        let back: Task = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
