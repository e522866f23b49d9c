use nalgebra::Vector3;
use peacock_core::config::{RunConfig, Value};
use peacock_core::geometry::Aabb;
use peacock_core::mission::{compute_summary, run_mission, MetricsRow, MissionConfig, MissionMode, MissionRun, Outcome};
use peacock_core::sensor_world::{generate_maze, MazeKind, World};
use proptest::prelude::*;

fn kinematic() -> MissionConfig {
    MissionConfig {
        mode: MissionMode::Kinematic,
        ..MissionConfig::default()
    }
}

fn assert_common_invariants(run: &MissionRun, cfg: &MissionConfig) {
    let series = &run.metrics.series;
    assert!(!series.is_empty());
    for w in series.windows(2) {
        assert!(w[1].known_volume >= w[0].known_volume);
        assert!(w[1].path_length >= w[0].path_length);
        assert!(w[1].t > w[0].t);
    }
    if run.metrics.outcome != Outcome::CollisionFailure {
        let min = run.path.iter().map(|p| p.clearance).fold(f64::INFINITY, f64::min);
        assert!(min > cfg.vehicle_radius, "min clearance {min}");
    }
}

#[test]
fn empty_world_is_mapped_almost_entirely() {
    let bounds = Aabb::from_slice([0.0, 0.0, 0.0, 20.0, 20.0, 4.0]);
    let world = World::new(bounds, vec![]).unwrap();
    let cfg = kinematic();
    let run = run_mission(&world, &cfg).unwrap();
    assert!(run.metrics.outcome.is_success(), "{}", run.metrics.outcome);
    assert_common_invariants(&run, &cfg);
    let known = run.metrics.series.last().unwrap().known_volume;
    assert!(known >= 0.95 * bounds.volume(), "known {known} of {}", bounds.volume());
}

/// A closed shell of one-voxel walls around the start and the takeoff point,
/// wide enough that hovering at the center keeps the planner's margin.
fn shell_world() -> World {
    let t = 0.5;
    let (lo, hi, top) = (0.5, 4.5, 4.0);
    let boxes = vec![
        Aabb::from_slice([lo - t, lo - t, 0.0, hi + t, lo, top + t]),
        Aabb::from_slice([lo - t, hi, 0.0, hi + t, hi + t, top + t]),
        Aabb::from_slice([lo - t, lo, 0.0, lo, hi, top + t]),
        Aabb::from_slice([hi, lo, 0.0, hi + t, hi, top + t]),
        Aabb::from_slice([lo, lo, top, hi, hi, top + t]),
    ];
    World::new(Aabb::from_slice([0.0, 0.0, 0.0, 10.0, 10.0, 6.0]), boxes).unwrap()
}

#[test]
fn enclosed_start_stalls_without_moving() {
    let world = shell_world();
    let cfg = kinematic();
    let run = run_mission(&world, &cfg).unwrap();
    assert_eq!(run.metrics.outcome, Outcome::Stalled);
    assert_common_invariants(&run, &cfg);
    assert!(run.planner_log.iter().all(|r| r.row.is_none()));
    assert_eq!(run.planner_log.len(), cfg.stall_cycles);
    let flown = run.metrics.series.last().unwrap().path_length;
    assert!((flown - run.takeoff_length).abs() < 1e-9, "flew {flown} after takeoff {}", run.takeoff_length);
}

#[test]
fn each_cycle_flies_one_first_step() {
    let world = generate_maze(MazeKind::Desk, 3);
    let cfg = kinematic();
    let run = run_mission(&world, &cfg).unwrap();
    assert_common_invariants(&run, &cfg);
    let step = cfg.bundle.speed * cfg.bundle.period;
    let at = |t: f64| {
        run.path
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .map(|p| p.position)
            .unwrap()
    };
    let mut checked = 0;
    for rec in run.planner_log.iter().filter(|r| r.row.is_some()) {
        if rec.t + cfg.bundle.period > run.path.last().unwrap().t {
            continue;
        }
        let d = (at(rec.t + cfg.bundle.period) - at(rec.t)).norm();
        assert!((d - step).abs() < 1e-6, "cycle {}: moved {d}", rec.cycle);
        checked += 1;
    }
    assert!(checked > 5, "{checked} cycles checked");
}

#[test]
fn dynamic_desk_run_is_safe_and_repeatable() {
    let world = generate_maze(MazeKind::Desk, 1);
    let cfg = MissionConfig {
        seed: 1,
        ..MissionConfig::default()
    };
    let a = run_mission(&world, &cfg).unwrap();
    let b = run_mission(&world, &cfg).unwrap();
    assert!(a.metrics.outcome.is_success(), "{}", a.metrics.outcome);
    assert_common_invariants(&a, &cfg);
    assert_eq!(a.metrics.series, b.metrics.series);
    assert_eq!(a.metrics.summary, b.metrics.summary);
    assert_eq!(a.metrics.summary.seed, 1);
}

#[test]
fn timeout_is_reported() {
    let world = generate_maze(MazeKind::Desk, 1);
    let cfg = MissionConfig {
        max_mission_time: 4.0,
        ..kinematic()
    };
    let run = run_mission(&world, &cfg).unwrap();
    assert_eq!(run.metrics.outcome, Outcome::TimedOut);
}

#[test]
fn start_outside_world_is_an_error() {
    let world = generate_maze(MazeKind::Desk, 1);
    let cfg = MissionConfig {
        start: Vector3::new(-1.0, 2.0, 1.0),
        ..MissionConfig::default()
    };
    assert!(run_mission(&world, &cfg).is_err());
}

fn row(t: f64, path_length: f64, known_volume: f64) -> MetricsRow {
    MetricsRow {
        t,
        position: Vector3::zeros(),
        velocity: Vector3::zeros(),
        yaw: 0.0,
        path_length,
        free_volume: known_volume,
        occupied_volume: 0.0,
        known_volume,
        cycle: 0,
        score: 0.0,
        blocked_count: 0,
        plan_ms: 0.0,
    }
}

#[test]
fn summary_ratios_from_totals() {
    let s = compute_summary(&[row(0.0, 0.0, 0.0), row(140.24, 467.327, 27712.125)]);
    assert!((s.avg_velocity - 3.332).abs() < 1e-3);
    assert!((s.mapping_rate - 197.6).abs() < 0.1);
    assert!((s.mapping_efficiency - 59.30).abs() < 0.01);
    let other = compute_summary(&[row(0.0, 0.0, 0.0), row(326.90, 773.642, 11641.75)]);
    assert!((other.mapping_efficiency - 15.05).abs() < 0.01);
    assert!((other.avg_velocity - 2.37).abs() < 0.01);
    assert!((other.mapping_rate - 35.61).abs() < 0.01);
}

#[test]
fn default_parameters() {
    let cfg = RunConfig::default().mission_config().unwrap();
    assert_eq!((cfg.bundle.rows, cfg.bundle.cols, cfg.bundle.branches), (9, 9, 7));
    assert!((cfg.bundle.pitch_range.to_degrees() - 40.0).abs() < 1e-12);
    assert!((cfg.bundle.yaw_range.to_degrees() - 60.0).abs() < 1e-12);
    assert!((cfg.bundle.branch_yaw_range.to_degrees() - 27.0).abs() < 1e-12);
    assert_eq!(cfg.bundle.speed, 5.0);
    assert_eq!(cfg.map.resolution, 0.5);
    assert_eq!((cfg.map.hit_prob, cfg.map.miss_prob), (0.65, 0.35));
    assert_eq!(cfg.map.query_depth, 15);
    assert_eq!((cfg.camera.min_range, cfg.camera.max_range), (0.11, 15.0));
    assert!((cfg.camera.h_fov.to_degrees() - 60.0).abs() < 1e-12);
    assert!((cfg.camera.v_fov.to_degrees() - 45.0).abs() < 1e-12);
    assert_eq!(cfg.takeoff_altitude, 2.0);
    assert_eq!(cfg, MissionConfig::default());
}

fn value_strategy(v: &Value) -> BoxedStrategy<String> {
    match v {
        Value::Real(_) => prop_oneof![
            (-1e6..1e6f64).prop_map(|x| x.to_string()),
            any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(|x| x.to_string()),
        ]
        .boxed(),
        Value::Count(_) => any::<u64>().prop_map(|x| x.to_string()).boxed(),
        Value::Flag(_) => any::<bool>().prop_map(|x| x.to_string()).boxed(),
        Value::Mode(_) => prop_oneof![Just("dynamic".to_string()), Just("kinematic".to_string())].boxed(),
    }
}

fn random_config() -> impl Strategy<Value = Vec<(String, String)>> {
    let defaults = RunConfig::default();
    let per_key: Vec<_> = RunConfig::documented_keys()
        .map(|(key, _, _)| {
            let strat = value_strategy(defaults.get(key).unwrap());
            (Just(key.to_string()), proptest::option::of(strat))
        })
        .collect();
    per_key.prop_map(|pairs| pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(pairs in random_config()) {
        let text: String = pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let cfg = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_text(), cfg.to_text());
    }
}
