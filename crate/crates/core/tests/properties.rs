use forcepinch_core::calibration::{
    build_force_mapping, cluster_force_levels, eval_curve, initial_centroids, kmeans_objective,
    ForceAnchors, ForceSample,
};
use forcepinch_core::engine::VELOCITY_WINDOW;
use forcepinch_core::mapping::{
    eval_constant, eval_forcepinch, eval_gogo, eval_prism, SpeedSample,
};
use forcepinch_core::metrics::{histogram, path_error, travel_distance, trial_metrics};
use forcepinch_core::tasks::{PlacementTrial, TracePath};
use forcepinch_core::vec3;
use forcepinch_core::{
    start_session, CalibrationProfile, EngineOptions, InputSample, Shape, Task, TaskKind,
    Technique, TechniqueConfig, TrialLog,
};
use proptest::prelude::*;

const TECHNIQUES: [Technique; 4] = Technique::ALL;

fn speed(t: Technique, x: f64, c: f64) -> f64 {
    let cfg = TechniqueConfig::new(t, c);
    match t {
        Technique::Constant => eval_constant(&cfg).0,
        Technique::GoGo => eval_gogo(x, &cfg).unwrap().0,
        Technique::Prism => eval_prism(x, &cfg).unwrap().0,
        Technique::ForcePinch => eval_forcepinch(x, &cfg).0,
    }
}

fn range(t: Technique, c: f64) -> (f64, f64) {
    match t {
        Technique::Constant => (c, c),
        Technique::GoGo => (c, 4.0 * c),
        Technique::Prism | Technique::ForcePinch => (0.25 * c, 4.0 * c),
    }
}

fn unit_profile(c: f64) -> CalibrationProfile {
    build_force_mapping(ForceAnchors::new(0.0, 0.5, 1.0).unwrap(), c).unwrap()
}

fn free_task() -> Task {
    Task::Placement(PlacementTrial {
        object_start: [0.0; 3],
        target_pos: [3.0, 0.0, 0.0],
    })
}

prop_compose! {
    fn stream()(steps in prop::collection::vec(
        ((-0.03f64..0.03, -0.03f64..0.03, -0.03f64..0.03), 0.0f64..1.0, prop::bool::weighted(0.7)),
        2..120,
    )) -> Vec<InputSample> {
        let mut hand = [0.0; 3];
        steps
            .into_iter()
            .enumerate()
            .map(|(k, ((dx, dy, dz), force, pinching))| {
                hand = vec3::add(hand, [dx, dy, dz]);
                InputSample { t: k as f64 * 0.01, hand_pos: hand, raw_force: force, pinching }
            })
            .collect()
    }
}

fn replay(t: Technique, c: f64, samples: &[InputSample]) -> TrialLog {
    let cfg = TechniqueConfig::new(t, c);
    let profile = unit_profile(c);
    let mut s = start_session(
        free_task(),
        &cfg,
        Some(&profile),
        0,
        EngineOptions::default(),
    )
    .unwrap();
    s.run(samples).unwrap();
    s.into_trial_log()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn outputs_stay_in_range(x in 0.0f64..3.0, c in 0.01f64..10.0) {
        for t in TECHNIQUES {
            let (lo, hi) = range(t, c);
            let s = speed(t, x, c);
            prop_assert!(s >= lo && s <= hi, "{t} at {x}: {s}");
        }
    }

    #[test]
    fn speed_scales_with_gain(x in 0.0f64..3.0, c in 0.01f64..10.0) {
        for t in TECHNIQUES {
            prop_assert_eq!(speed(t, x, 2.0 * c), 2.0 * speed(t, x, c));
        }
    }

    #[test]
    fn forcepinch_strictly_decreasing(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(speed(Technique::ForcePinch, lo, 1.0) > speed(Technique::ForcePinch, hi, 1.0));
    }

    #[test]
    fn baselines_nondecreasing(a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for t in [Technique::GoGo, Technique::Prism] {
            prop_assert!(speed(t, lo, 1.0) <= speed(t, hi, 1.0));
        }
    }

    #[test]
    fn histogram_conserves_counts(values in prop::collection::vec(0.0f64..=1.0, 0..200), bins in 1usize..40) {
        let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        prop_assert_eq!(histogram(&values, &edges).unwrap().total(), values.len());
    }

    #[test]
    fn travel_at_least_displacement(points in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..50)) {
        let pts: Vec<[f64; 3]> = points.into_iter().map(|(x, y, z)| [x, y, z]).collect();
        let straight = vec3::dist(pts[0], pts[pts.len() - 1]);
        prop_assert!(travel_distance(&pts) >= straight - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn calibration_ignores_sample_order(
        levels in (0.5f64..2.0, 3.0f64..5.0, 6.0f64..9.0),
        jitter in prop::collection::vec(-0.2f64..0.2, 60..150),
        perm_seed in any::<u64>(),
    ) {
        let centers = [levels.0, levels.1, levels.2];
        let raws: Vec<f64> = jitter.iter().enumerate().map(|(i, j)| centers[i % 3] + j).collect();
        let mut shuffled = raws.clone();
        // deterministic Fisher-Yates from the seed
        let mut state = perm_seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let as_stream = |v: &[f64]| -> Vec<ForceSample> {
            v.iter().enumerate().map(|(i, &raw)| ForceSample { t: i as f64 * 0.01, raw }).collect()
        };
        let a = cluster_force_levels(&as_stream(&raws)).unwrap();
        let b = cluster_force_levels(&as_stream(&shuffled)).unwrap();
        prop_assert_eq!(a, b);

        let mut sorted = raws.clone();
        sorted.sort_by(f64::total_cmp);
        let start = kmeans_objective(&sorted, &initial_centroids(&sorted));
        let end = kmeans_objective(&sorted, &[a.f_min, a.f_mid, a.f_max]);
        prop_assert!(end <= start + 1e-12);
    }

    #[test]
    fn replay_is_deterministic(samples in stream(), t in 0usize..4) {
        let a = replay(TECHNIQUES[t], 0.5, &samples);
        let b = replay(TECHNIQUES[t], 0.5, &samples);
        prop_assert_eq!(a.to_jsonl_string(), b.to_jsonl_string());
    }

    #[test]
    fn object_moves_only_while_pinched(samples in stream(), t in 0usize..4) {
        let log = replay(TECHNIQUES[t], 1.0, &samples);
        let r = &log.records;
        for k in 1..r.len() {
            let rolled_back = TECHNIQUES[t] == Technique::ForcePinch && r[k - 1].pinching;
            if !r[k].pinching && !rolled_back {
                prop_assert_eq!(r[k].object_pos, r[k - 1].object_pos);
            }
        }
    }

    #[test]
    fn rollback_lands_on_recent_pinched_position(samples in stream()) {
        let log = replay(Technique::ForcePinch, 0.5, &samples);
        let r = &log.records;
        for k in 1..r.len() {
            if r[k - 1].pinching && !r[k].pinching {
                let found = (0..k)
                    .rev()
                    .take_while(|&j| r[j].pinching && r[k].t - r[j].t <= 0.2 + 1e-9)
                    .any(|j| r[j].object_pos == r[k].object_pos);
                prop_assert!(found, "release at tick {k}");
            }
        }
    }

    #[test]
    fn constant_unit_gain_is_identity(samples in stream()) {
        let log = replay(Technique::Constant, 1.0, &samples);
        let r = &log.records;
        let mut hand = [0.0; 3];
        for k in 1..r.len() {
            if r[k].pinching && r[k - 1].pinching {
                hand = vec3::add(hand, vec3::sub(r[k].hand_pos, r[k - 1].hand_pos));
            }
        }
        let last = r[r.len() - 1].object_pos;
        for i in 0..3 {
            prop_assert!((last[i] - hand[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn logged_speeds_match_mappings(samples in stream(), t in 0usize..4) {
        let technique = TECHNIQUES[t];
        let c = 0.5;
        let cfg = TechniqueConfig::new(technique, c);
        let profile = unit_profile(c);
        let log = replay(technique, c, &samples);
        let r = &log.records;
        let mut anchor: Option<[f64; 3]> = None;
        for k in 0..r.len() {
            let was = k > 0 && r[k - 1].pinching;
            if r[k].pinching && !was {
                anchor = Some(r[k].hand_pos);
            }
            let expected = match technique {
                Technique::Constant => eval_constant(&cfg),
                Technique::GoGo => {
                    let d = anchor.map_or(0.0, |a| vec3::dist(r[k].hand_pos, a));
                    eval_gogo(d, &cfg).unwrap()
                }
                Technique::Prism => {
                    let first = (0..=k)
                        .find(|&j| r[k].t - r[j].t <= VELOCITY_WINDOW + 1e-9)
                        .unwrap();
                    let span = r[k].t - r[first].t;
                    let v = if span > 0.0 {
                        vec3::dist(r[k].hand_pos, r[first].hand_pos) / span
                    } else {
                        0.0
                    };
                    eval_prism(v, &cfg).unwrap()
                }
                Technique::ForcePinch => eval_forcepinch(profile.normalize(r[k].raw_force), &cfg),
            };
            prop_assert!((r[k].speed - expected.0).abs() < 1e-12, "tick {k}: {} vs {}", r[k].speed, expected.0);
            if technique == Technique::ForcePinch {
                prop_assert_eq!(eval_curve(&profile, r[k].raw_force), SpeedSample(r[k].speed));
            }
            if !r[k].pinching {
                anchor = None;
            }
        }
    }

    #[test]
    fn metrics_survive_log_round_trip(seed in 0u64..500, t in 0usize..4, kind in 0usize..3) {
        let kind = [TaskKind::Slider, TaskKind::Trace, TaskKind::Placement][kind];
        let task = kind.make_trial(seed, None);
        let c = 0.5;
        let profile = unit_profile(c);
        let cfg = TechniqueConfig::new(TECHNIQUES[t], c);
        let mut s = start_session(task, &cfg, Some(&profile), seed, EngineOptions::default()).unwrap();
        let mut hand = [0.0; 3];
        for k in 0..80u64 {
            let wobble = ((seed + k) % 7) as f64 * 0.003 - 0.009;
            hand = vec3::add(hand, [0.01 + wobble, wobble, -wobble * 0.5]);
            s.step(&InputSample {
                t: k as f64 * 0.01,
                hand_pos: hand,
                raw_force: ((k * 37 + seed) % 100) as f64 / 100.0,
                pinching: k % 30 < 22,
            }).unwrap();
        }
        let log = s.into_trial_log();
        let text = log.to_jsonl_string();
        let back = TrialLog::read_jsonl(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &log);
        prop_assert_eq!(trial_metrics(&back).unwrap(), trial_metrics(&log).unwrap());
    }
}

fn dense_distance(p: [f64; 2], poly: &[[f64; 2]], n: usize) -> f64 {
    let lens: Vec<f64> = poly
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .collect();
    let total: f64 = lens.iter().sum();
    let mut best = f64::INFINITY;
    let mut check = |q: [f64; 2]| {
        best = best.min(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
    };
    poly.iter().for_each(|&v| check(v));
    for (w, &len) in poly.windows(2).zip(&lens) {
        let m = ((len / total) * n as f64).ceil() as usize;
        for i in 0..=m {
            let u = i as f64 / m as f64;
            check([
                w[0][0] + u * (w[1][0] - w[0][0]),
                w[0][1] + u * (w[1][1] - w[0][1]),
            ]);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn path_error_matches_dense_sampling(
        verts in prop::collection::vec((-0.4f64..0.4, -0.4f64..0.4), 2..6),
        pts in prop::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 1..12),
    ) {
        let poly: Vec<[f64; 2]> = verts.into_iter().map(|(x, y)| [x, y]).collect();
        let samples: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let path = TracePath { shape: Shape::Star, closed: false, polyline: poly.clone() };
        let mut dense: Vec<f64> = samples.iter().map(|&p| dense_distance(p, &poly, 100_000)).collect();
        dense.sort_by(f64::total_cmp);
        let n = dense.len();
        let median = if n % 2 == 1 { dense[n / 2] } else { 0.5 * (dense[n / 2 - 1] + dense[n / 2]) };
        let got = path_error(&samples, &path).unwrap().median;
        prop_assert!((got - median).abs() < 1e-6, "{got} vs {median}");
    }
}

#[test]
fn generated_geometry_respects_bounds() {
    for seed in 0..10_000u64 {
        match TaskKind::Slider.make_trial(seed, None) {
            Task::Slider(s) => assert!((0.5..=0.8).contains(&s.target_value)),
            _ => unreachable!(),
        }
        match TaskKind::Placement.make_trial(seed, None) {
            Task::Placement(p) => {
                let d = vec3::dist(p.object_start, p.target_pos);
                assert!((3.0..=4.0).contains(&d), "seed {seed}: {d}");
            }
            _ => unreachable!(),
        }
    }
    for shape in Shape::ALL {
        let path = forcepinch_core::tasks::make_trace_path(shape);
        let inside = |p: &[f64; 2]| p[0].abs() <= 0.4 + 1e-12 && p[1].abs() <= 0.4 + 1e-12;
        assert!(path.polyline.iter().all(inside), "{shape}");
    }
}
