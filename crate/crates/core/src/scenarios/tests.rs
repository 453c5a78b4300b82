use super::*;
use crate::grid::loads::{ScalarSchedule, Thermostat, VectorSchedule};
use crate::grid::snapshot;

fn point_config(duration: f64, dt: f64) -> ScenarioConfig {
    let mut material = MaterialParams::reference();
    material.tau_c = crate::constitutive::ThetaProfile::constant(0.1);
    ScenarioConfig {
        name: "point".into(),
        grid: GridSpec::point(),
        material,
        loads: Loads::default(),
        motion: vec![MotionPhase { until: duration, motion: MotionKind::Rest }],
        initial: InitialSpec { theta: 0.5, m: [0.0, 0.0], ee: [[0.0; 2]; 2], blob: None },
        duration,
        dt: DtController::fixed(dt),
        solver: SolverSpec::default(),
        demag: false,
        eps: 0.0,
        frozen_theta: false,
        output: OutputSpec { every: 1, snapshots: true, audit: true },
        audit: AuditBounds::default(),
        experiment: None,
    }
}

#[test]
fn zero_load_trajectory_is_constant() {
    let mut cfg = point_config(0.5, 0.05);
    let ms = cfg.material.m_sat(0.5);
    cfg.initial.m = [ms, 0.0];
    let traj = run_scenario(&cfg, None).unwrap();
    assert_eq!(traj.steps, 10);
    for r in &traj.series {
        assert!((r.m_x - ms).abs() < 1e-14 && r.theta_mean == 0.5, "{r:?}");
    }
    assert!(traj.audit_violation.is_none());
}

#[test]
fn duration_zero_writes_single_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = point_config(0.0, 0.1);
    let traj = run_scenario(&cfg, Some(dir.path())).unwrap();
    assert_eq!(traj.steps, 0);
    let snaps: Vec<_> = std::fs::read_dir(dir.path().join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 1);
    let rows = read_series(&dir.path().join("series.csv")).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn snapshots_come_in_consecutive_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = point_config(1.0, 0.1);
    cfg.output.every = 4;
    cfg.loads.h_ext = VectorSchedule::Linear { start: [0.0, 0.0], rate: [0.2, 0.0] };
    run_scenario(&cfg, Some(dir.path())).unwrap();
    for step in [0, 3, 4, 7, 8, 9, 10] {
        assert!(snapshot_path(dir.path(), step).exists(), "missing {step}");
    }
    assert!(!snapshot_path(dir.path(), 5).exists());
    let (h, s) = snapshot::load(&snapshot_path(dir.path(), 10)).unwrap();
    assert_eq!(h.step, 10);
    assert!((s.t - 1.0).abs() < 1e-12);
}

#[test]
fn steps_land_on_phase_boundaries() {
    let mut cfg = point_config(1.0, 0.3);
    cfg.motion = vec![
        MotionPhase { until: 0.5, motion: MotionKind::Rest },
        MotionPhase { until: 1.0, motion: MotionKind::Rotation { omega: 0.1 } },
    ];
    let traj = run_scenario(&cfg, None).unwrap();
    let times: Vec<f64> = traj.series.iter().map(|r| r.t).collect();
    assert!(times.iter().any(|t| (t - 0.5).abs() < 1e-12), "{times:?}");
    assert!((times.last().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn config_round_trips_and_rejects_unknown_fields() {
    let cfg = point_config(1.0, 0.1);
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["material"]["rhoo"] = serde_json::json!(1.0);
    let err = ScenarioConfig::from_json(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("rhoo"), "{err}");
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["material"].as_object_mut().unwrap().remove("g_e");
    assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn negative_boundary_flux_is_a_config_error() {
    let mut cfg = point_config(1.0, 0.1);
    cfg.loads.j_ext[0] = ScalarSchedule::constant(-1.0);
    let err = cfg.validate().unwrap_err();
    assert!(err.to_string().contains("j_ext must be >= 0"), "{err}");
}

#[test]
fn overrides_follow_dotted_paths() {
    let cfg = point_config(1.0, 0.1);
    let mut v = serde_json::to_value(&cfg).unwrap();
    ScenarioConfig::apply_override(&mut v, "material.h_c_high", "0.25").unwrap();
    ScenarioConfig::apply_override(&mut v, "motion.0.until", "2").unwrap();
    ScenarioConfig::apply_override(&mut v, "name", "renamed").unwrap();
    assert!(ScenarioConfig::apply_override(&mut v, "material.nope.x", "1").is_err());
    let back: ScenarioConfig = serde_json::from_value(v).unwrap();
    assert_eq!(back.material.h_c_high, 0.25);
    assert_eq!(back.motion[0].until, 2.0);
    assert_eq!(back.name, "renamed");
}

#[test]
fn subcoercive_cycling_from_zero_gives_degenerate_loop() {
    let mut cfg = point_config(1.0, 0.05);
    cfg.material.h_c_high = 0.2;
    cfg.material.tau_c = crate::constitutive::ThetaProfile::constant(0.0);
    cfg.initial.theta = 1.2;
    cfg.loads.thermostat = Some(Thermostat { target: ScalarSchedule::constant(0.5), coefficient: 1e6 });
    // Above theta_c the unmagnetized state is the stable one; at 0.5 with
    // |h| < h_c it cannot leave m = 0 either.
    let lp = irm_loop(&cfg, 0.5, 0.1, 2.0, 2).unwrap();
    assert_eq!(lp.m_max, 0.0);
    assert_eq!(lp.coercivity, 0.0);
    assert!(lp.closed);
}

#[test]
fn loop_crossings_interpolate_linearly() {
    let mut rows = Vec::new();
    for k in 0..=2000 {
        let t = k as f64 / 2000.0;
        let ph = std::f64::consts::TAU * t;
        // Square-ish loop of coercivity 0.5: m follows sin(ph - pi/6).
        rows.push(SeriesRow { t, h_x: ph.sin(), m_x: (ph - std::f64::consts::FRAC_PI_6).sin(), ..Default::default() });
    }
    let lp = extract_loop(&rows, 0.0, 1.0, 1.0);
    assert!((lp.coercivity - 0.5).abs() < 0.01, "{}", lp.coercivity);
    assert!((lp.remanence - 0.5).abs() < 0.01, "{}", lp.remanence);
    // Area of the ellipse h = sin(ph), m = sin(ph - pi/6) is pi sin(pi/6);
    // the backward sum adds (dph / 2) pi cos(pi/6).
    assert!((lp.area - std::f64::consts::PI * 0.5).abs() < 0.01, "{}", lp.area);
}

#[test]
fn rotation_phase_turns_remanence() {
    let mut cfg = point_config(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2 / 100.0);
    let ms = cfg.material.m_sat(0.5);
    cfg.initial.m = [ms, 0.0];
    cfg.motion = vec![MotionPhase { until: cfg.duration, motion: MotionKind::Rotation { omega: 1.0 } }];
    let traj = run_scenario(&cfg, None).unwrap();
    let z = traj.series.last().unwrap();
    let ang = z.m_y.atan2(z.m_x).to_degrees();
    assert!((ang - 90.0).abs() < 0.5, "{ang}");
}

use experiments::extract_loop;
