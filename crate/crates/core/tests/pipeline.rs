use nalgebra::Point3;
use proptest::prelude::*;
use tps_core::campaign::{plan, run_campaign, run_once, CampaignSpec};
use tps_core::delay::{Schedule, SearchParams};
use tps_core::kinematics::DelayedTrajectory;
use tps_core::scenario::{generate, Scenario, ScenarioConfig};
use tps_core::verify::{verify, DEFAULT_RESOLUTION};
use tps_core::Error;

/// Smallest separation seen by stepping every pair at a fixed time step.
fn stepped_min_distance(s: &Scenario, schedule: &Schedule, dt: f64) -> f64 {
    let trajs: Vec<_> = s
        .paths
        .iter()
        .zip(&schedule.delays)
        .map(|(p, &d)| DelayedTrajectory::new(*p, d))
        .collect();
    let end = trajs.iter().map(|t| t.completion_time()).fold(0.0, f64::max);
    let mut best = f64::INFINITY;
    let mut t = 0.0;
    while t <= end + dt {
        let pos: Vec<Point3<f64>> = trajs.iter().map(|tr| tr.position_at(t)).collect();
        for i in 0..pos.len() {
            for j in 0..i {
                best = best.min((pos[i] - pos[j]).norm());
            }
        }
        t += dt;
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn schedules_are_collision_free(seed in any::<u64>(), n in 2usize..16) {
        let s = generate(&ScenarioConfig { n, seed, ..Default::default() }).unwrap();
        match run_once(&s, &SearchParams::default(), DEFAULT_RESOLUTION) {
            Ok(r) => {
                prop_assert!(r.report.collision_free);
                prop_assert!(r.report.min_distance > 1.0);
                prop_assert!(r.schedule.priority.respects_hard_constraints(&r.tables));
                prop_assert!(r.schedule.delays.iter().all(|&d| d >= 0.0));
                let stepped = stepped_min_distance(&s, &r.schedule, 0.01);
                prop_assert!(stepped >= r.report.min_distance - 1e-9);
                prop_assert!(stepped > 1.0);
                prop_assert!(r.metrics.overhead_time_pct >= 100.0);
                let again = plan(&s, &SearchParams::default()).unwrap().2;
                prop_assert_eq!(&again.delays, &r.schedule.delays);
            }
            Err(Error::CycleDetected { .. } | Error::InfeasiblePair { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}

#[test]
fn undelayed_flock_is_caught_by_verifier() {
    // find a flock that needs delays, then strip them
    for seed in 0..50 {
        let s = generate(&ScenarioConfig { n: 20, seed, ..Default::default() }).unwrap();
        let Ok((_, _, mut schedule, _)) = plan(&s, &SearchParams::default()) else {
            continue;
        };
        if schedule.delays.iter().all(|&d| d == 0.0) {
            continue;
        }
        schedule.delays.iter_mut().for_each(|d| *d = 0.0);
        let report = verify(&s.paths, &schedule, 1.0, DEFAULT_RESOLUTION).unwrap();
        let stepped = stepped_min_distance(&s, &schedule, 0.005);
        assert!((report.min_distance - stepped).abs() < 0.05 || report.min_distance < stepped);
        if stepped <= 1.0 {
            assert!(!report.collision_free);
            return;
        }
    }
    panic!("no colliding undelayed flock found");
}

#[test]
fn schedule_files_round_trip() {
    let s = generate(&ScenarioConfig { n: 12, seed: 3, ..Default::default() }).unwrap();
    let r = run_once(&s, &SearchParams::default(), DEFAULT_RESOLUTION).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("schedule.json");
    r.schedule.save(&path).unwrap();
    assert_eq!(Schedule::load(&path).unwrap(), r.schedule);
    let sp = dir.path().join("scenario.json");
    s.save(&sp).unwrap();
    assert_eq!(Scenario::load(&sp).unwrap(), s);
}

#[test]
fn campaign_writes_outputs() {
    let spec = CampaignSpec {
        drone_counts: vec![5, 8],
        replications: 4,
        ..Default::default()
    };
    let report = run_campaign(&spec).unwrap();
    assert_eq!(report.records.len(), 8);
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    for f in ["runs.csv", "summary.csv", "long.csv", "timing.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.lines().count() > 1, "{f} is empty");
    }
}
