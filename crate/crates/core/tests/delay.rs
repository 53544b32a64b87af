use nalgebra::Point3;
use proptest::prelude::*;
use tps_core::delay::{assign_delay, collision_free, critical_times, forbidden_interval, ForbiddenInterval, PairSearch, SearchParams};
use tps_core::geometry::closest_approach;
use tps_core::kinematics::{DelayedTrajectory, DronePath, KinematicLimits};
use tps_core::verify::{check_pair, DEFAULT_RESOLUTION};

fn intervals() -> impl Strategy<Value = Vec<ForbiddenInterval>> {
    prop::collection::vec((-5i32..40, 1i32..15), 0..8).prop_map(|v| {
        v.into_iter()
            .map(|(a, w)| ForbiddenInterval {
                lower: a as f64 * 0.25,
                upper: (a + w) as f64 * 0.25,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn assigned_delay_is_first_free_grid_point(ivs in intervals()) {
        let d = assign_delay(&ivs);
        prop_assert!(d >= 0.0);
        prop_assert!(ivs.iter().all(|iv| !iv.contains(d)));
        // every endpoint lies on the quarter grid, so scanning it is exhaustive
        let scan = (0..)
            .map(|k| k as f64 * 0.25)
            .find(|&t| ivs.iter().all(|iv| !iv.contains(t)))
            .unwrap();
        prop_assert_eq!(d, scan);
    }

    #[test]
    fn order_of_intervals_does_not_matter(mut ivs in intervals()) {
        let d = assign_delay(&ivs);
        ivs.reverse();
        prop_assert_eq!(d, assign_delay(&ivs));
    }
}

fn crossing_pair(angle: f64, offset: f64, height: f64) -> (DronePath, DronePath) {
    let lim = KinematicLimits::default();
    let p = DronePath::new(Point3::new(0.0, 0.0, 0.0), Point3::new(120.0, 0.0, 0.0), lim);
    let c = Point3::new(60.0 + offset, 0.0, height);
    let d = nalgebra::Vector3::new(angle.cos(), angle.sin(), 0.0) * 50.0;
    let q = DronePath::new(c - d * (0.4 + offset.abs() / 100.0), c + d, lim);
    (p, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interval_brackets_collisions(angle in 0.3..2.8f64, offset in -20.0..20.0f64, height in 0.0..1.2f64) {
        let (p, q) = crossing_pair(angle, offset, height);
        let params = SearchParams::default();
        let thr = 1.5;
        let g = closest_approach(&p, &q).unwrap();
        prop_assume!(g.mu <= thr);
        let (pp, pq) = (p.profile(), q.profile());
        let pair = PairSearch {
            higher: 0,
            lower: 1,
            path_higher: &p,
            profile_higher: &pp,
            path_lower: &q,
            profile_lower: &pq,
            s_higher: g.s,
            s_lower: g.t,
            cl_entry: 0.5,
        };
        let iv = forbidden_interval(&pair, thr, &params).unwrap();
        let (_, _, t_cr) = critical_times(g.s, g.t, &pp, &pq);
        prop_assert!(iv.lower <= t_cr && t_cr <= iv.upper);
        prop_assert!(iv.upper - iv.lower < 10.0);
        // both ends are free, points just inside are not
        prop_assert!(collision_free((&p, &pp), (&q, &pq), iv.upper, thr, &params));
        prop_assert!(collision_free((&p, &pp), (&q, &pq), iv.lower, thr, &params));
        if iv.upper - iv.lower > 4.0 * params.dt_step {
            prop_assert!(!collision_free((&p, &pp), (&q, &pq), iv.upper - params.dt_step, thr, &params));
            prop_assert!(!collision_free((&p, &pp), (&q, &pq), iv.lower + params.dt_step, thr, &params));
        }
        // the independent verifier agrees beyond the interval
        for d in [iv.upper, iv.upper + 0.5, iv.lower - 0.5] {
            let a = DelayedTrajectory::with_profile(p, pp, (-d).max(0.0));
            let b = DelayedTrajectory::with_profile(q, pq, d.max(0.0));
            prop_assert!(check_pair(&a, &b, thr, DEFAULT_RESOLUTION).min_distance > thr - 1e-6);
        }
    }
}
