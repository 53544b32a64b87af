//! Straight-line motion with trapezoidal (or triangular) velocity profiles.
//!
//! A drone waits at its start for `t0` seconds, accelerates at `a_max` until
//! it reaches its peak speed, cruises, then decelerates at `d_max` to rest
//! exactly on its target. When the path is too short to reach `v_max` the
//! cruise phase vanishes and the profile is triangular.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform motion limits. All three values are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits {
    pub a_max: f64,
    pub v_max: f64,
    pub d_max: f64,
}

impl KinematicLimits {
    pub fn new(a_max: f64, v_max: f64, d_max: f64) -> Result<Self> {
        let limits = Self {
            a_max,
            v_max,
            d_max,
        };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_max", self.a_max),
            ("v_max", self.v_max),
            ("d_max", self.d_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Shortest path length on which the drone reaches `v_max`.
    pub fn cruise_threshold(&self) -> f64 {
        0.5 * self.v_max * self.v_max * (1.0 / self.a_max + 1.0 / self.d_max)
    }
}

impl Default for KinematicLimits {
    /// a = 3 m/s², v = 20 m/s, d = 3 m/s².
    fn default() -> Self {
        Self {
            a_max: 3.0,
            v_max: 20.0,
            d_max: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DronePath {
    pub start: Point3<f64>,
    pub target: Point3<f64>,
    pub limits: KinematicLimits,
}

impl DronePath {
    pub fn new(start: Point3<f64>, target: Point3<f64>, limits: KinematicLimits) -> Self {
        Self {
            start,
            target,
            limits,
        }
    }

    pub fn displacement(&self) -> Vector3<f64> {
        self.target - self.start
    }

    pub fn length(&self) -> f64 {
        self.displacement().norm()
    }

    /// Unit direction of travel, or `None` for a zero-length path.
    pub fn direction(&self) -> Option<Vector3<f64>> {
        let d = self.displacement();
        let len = d.norm();
        (len > 0.0).then(|| d / len)
    }

    pub fn profile(&self) -> VelocityProfile {
        // length is never negative, so this cannot fail
        build_profile(self.length(), self.limits).expect("non-negative path length")
    }
}

/// Phase timing of one straight-line move.
///
/// `s_a` and `s_d` are arc-length offsets from the start at which
/// acceleration ends and deceleration begins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub v_peak: f64,
    pub s_a: f64,
    pub s_d: f64,
    pub length: f64,
    pub accel: f64,
    pub decel: f64,
}

impl VelocityProfile {
    pub fn zero(limits: KinematicLimits) -> Self {
        Self {
            t1: 0.0,
            t2: 0.0,
            t3: 0.0,
            v_peak: 0.0,
            s_a: 0.0,
            s_d: 0.0,
            length: 0.0,
            accel: limits.a_max,
            decel: limits.d_max,
        }
    }

    pub fn travel_time(&self) -> f64 {
        travel_time(self)
    }

    /// Distance covered `tau` seconds after departure.
    pub fn arc_length_at(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let t12 = self.t1 + self.t2;
        if tau <= self.t1 {
            0.5 * self.accel * tau * tau
        } else if tau <= t12 {
            self.s_a + self.v_peak * (tau - self.t1)
        } else if tau < t12 + self.t3 {
            let dt = tau - t12;
            let s = self.s_d + self.v_peak * dt - 0.5 * self.decel * dt * dt;
            s.min(self.length)
        } else {
            self.length
        }
    }

    /// Speed `tau` seconds after departure.
    pub fn speed_at(&self, tau: f64) -> f64 {
        let t12 = self.t1 + self.t2;
        if tau <= 0.0 || tau >= t12 + self.t3 {
            0.0
        } else if tau <= self.t1 {
            self.accel * tau
        } else if tau <= t12 {
            self.v_peak
        } else {
            (self.v_peak - self.decel * (tau - t12)).max(0.0)
        }
    }

    /// Inverse of [`arc_length_at`](Self::arc_length_at): time after
    /// departure at which the drone first reaches arc length `s`.
    pub fn time_to_arc_length(&self, s: f64) -> f64 {
        if s <= 0.0 || self.length == 0.0 {
            return 0.0;
        }
        if s >= self.length {
            return self.travel_time();
        }
        if s <= self.s_a {
            (2.0 * s / self.accel).sqrt()
        } else if s <= self.s_d {
            self.t1 + (s - self.s_a) / self.v_peak
        } else {
            let remaining = s - self.s_d;
            let disc = (self.v_peak * self.v_peak - 2.0 * self.decel * remaining).max(0.0);
            let dt = (self.v_peak - disc.sqrt()) / self.decel;
            self.t1 + self.t2 + dt.min(self.t3)
        }
    }
}

pub fn build_profile(length: f64, limits: KinematicLimits) -> Result<VelocityProfile> {
    if !(length.is_finite() && length >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "path length must be finite and non-negative, got {length}"
        )));
    }
    limits.validate()?;
    if length == 0.0 {
        return Ok(VelocityProfile::zero(limits));
    }
    let KinematicLimits {
        a_max: a,
        v_max: v,
        d_max: d,
    } = limits;

    let profile = if length >= limits.cruise_threshold() {
        let s_a = v * v / (2.0 * a);
        let s_d = length - v * v / (2.0 * d);
        VelocityProfile {
            t1: v / a,
            t2: ((s_d - s_a) / v).max(0.0),
            t3: v / d,
            v_peak: v,
            s_a,
            s_d,
            length,
            accel: a,
            decel: d,
        }
    } else {
        let v_peak = (2.0 * length * a * d / (a + d)).sqrt();
        let s_a = v_peak * v_peak / (2.0 * a);
        VelocityProfile {
            t1: v_peak / a,
            t2: 0.0,
            t3: v_peak / d,
            v_peak,
            s_a,
            s_d: s_a,
            length,
            accel: a,
            decel: d,
        }
    };
    Ok(profile)
}

pub fn travel_time(profile: &VelocityProfile) -> f64 {
    profile.t1 + profile.t2 + profile.t3
}

/// A path, its profile, and the start delay `t0` measured from the instant
/// the first drone of the flock may move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayedTrajectory {
    pub path: DronePath,
    pub profile: VelocityProfile,
    pub t0: f64,
}

impl DelayedTrajectory {
    pub fn new(path: DronePath, t0: f64) -> Self {
        Self {
            path,
            profile: path.profile(),
            t0,
        }
    }

    pub fn with_profile(path: DronePath, profile: VelocityProfile, t0: f64) -> Self {
        Self { path, profile, t0 }
    }

    pub fn completion_time(&self) -> f64 {
        self.t0 + self.profile.travel_time()
    }

    pub fn position_at(&self, t: f64) -> Point3<f64> {
        position_at(self, t)
    }
}

pub fn position_at(traj: &DelayedTrajectory, t: f64) -> Point3<f64> {
    let tau = t - traj.t0;
    if tau <= 0.0 {
        return traj.path.start;
    }
    if tau >= traj.profile.travel_time() {
        return traj.path.target;
    }
    match traj.path.direction() {
        Some(dir) => traj.path.start + dir * traj.profile.arc_length_at(tau),
        None => traj.path.start,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-9;

    /// Integrate the speed curve with the midpoint rule.
    fn integrate_speed(profile: &VelocityProfile, until: f64, steps: usize) -> f64 {
        let h = until / steps as f64;
        (0..steps)
            .map(|i| profile.speed_at((i as f64 + 0.5) * h) * h)
            .sum()
    }

    fn default_limits() -> KinematicLimits {
        KinematicLimits::default()
    }

    #[test]
    fn zero_length_profile() {
        let p = build_profile(0.0, default_limits()).unwrap();
        assert_eq!((p.t1, p.t2, p.t3, p.v_peak), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(travel_time(&p), 0.0);
    }

    #[test]
    fn negative_length_rejected() {
        assert!(matches!(
            build_profile(-1.0, default_limits()),
            Err(Error::InvalidInput(_))
        ));
        assert!(KinematicLimits::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn trapezoid_400m() {
        let p = build_profile(400.0, default_limits()).unwrap();
        assert!((p.t1 - 20.0 / 3.0).abs() < EPS);
        assert!((p.t2 - 40.0 / 3.0).abs() < EPS);
        assert!((p.t3 - 20.0 / 3.0).abs() < EPS);
        assert!((travel_time(&p) - 80.0 / 3.0).abs() < EPS);
        // the numerically integrated speed curve covers the full path
        let covered = integrate_speed(&p, travel_time(&p), 200_000);
        assert!((covered - 400.0).abs() < 1e-6, "covered {covered}");
    }

    #[test]
    fn triangle_short_path() {
        let length = 200.0 / 3.0;
        let p = build_profile(length, default_limits()).unwrap();
        assert_eq!(p.t2, 0.0);
        assert!((p.v_peak - 200f64.sqrt()).abs() < 1e-9);
        assert!((travel_time(&p) - 2.0 * 200f64.sqrt() / 3.0).abs() < 1e-9);
        assert!((travel_time(&p) - 9.428).abs() < 1e-3);
        let covered = integrate_speed(&p, travel_time(&p), 200_000);
        assert!((covered - length).abs() < 1e-6);
    }

    #[test]
    fn asymmetric_limits_reconstruct_length() {
        let limits = KinematicLimits::new(2.0, 10.0, 5.0).unwrap();
        for length in [1.0, 20.0, 35.0, 500.0] {
            let p = build_profile(length, limits).unwrap();
            let covered = integrate_speed(&p, travel_time(&p), 100_000);
            assert!((covered - length).abs() < 1e-6 * length.max(1.0));
            assert!((p.arc_length_at(travel_time(&p)) - length).abs() < 1e-9 * length);
        }
    }

    #[test]
    fn position_before_delay_and_after_arrival() {
        let path = DronePath::new(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(400.0, 0.0, 0.0),
            default_limits(),
        );
        let traj = DelayedTrajectory::new(path, 5.0);
        assert_eq!(traj.position_at(0.0), path.start);
        assert_eq!(traj.position_at(5.0), path.start);
        assert_eq!(traj.position_at(traj.completion_time()), path.target);
        assert_eq!(traj.position_at(1e6), path.target);
    }

    #[test]
    fn position_at_end_of_acceleration() {
        let path = DronePath::new(
            Point3::new(1.0, 2.0, 3.0),
            Point3::new(1.0, 2.0, 403.0),
            default_limits(),
        );
        let traj = DelayedTrajectory::new(path, 5.0);
        let pos = traj.position_at(5.0 + traj.profile.t1);
        let expected = 0.5 * 3.0 * (20.0f64 / 3.0).powi(2);
        assert!((pos.z - 3.0 - expected).abs() < 1e-9);
        assert!((expected - 66.667).abs() < 1e-3);
        let integrated = integrate_speed(&traj.profile, traj.profile.t1, 100_000);
        assert!((integrated - expected).abs() < 1e-6);
    }

    #[test]
    fn time_to_arc_length_inverts() {
        let p = build_profile(400.0, default_limits()).unwrap();
        assert!((p.time_to_arc_length(200.0) - (20.0 / 3.0 + (200.0 - 200.0 / 3.0) / 20.0)).abs() < EPS);
        for s in [0.0, 10.0, 66.0, 200.0, 350.0, 399.0, 400.0] {
            let t = p.time_to_arc_length(s);
            assert!((p.arc_length_at(t) - s).abs() < 1e-9, "s={s}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn limits() -> impl Strategy<Value = KinematicLimits> {
            (0.5f64..6.0, 1.0f64..30.0, 0.5f64..6.0)
                .prop_map(|(a, v, d)| KinematicLimits::new(a, v, d).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn monotone_progress(length in 0.0f64..800.0, lim in limits(), t in 0.0f64..100.0, dt in 0.0f64..5.0) {
                let p = build_profile(length, lim).unwrap();
                prop_assert!(p.arc_length_at(t + dt) >= p.arc_length_at(t));
            }

            #[test]
            fn speed_bound_by_finite_difference(length in 0.1f64..800.0, lim in limits(), frac in 0.0f64..1.0) {
                let path = DronePath::new(Point3::origin(), Point3::new(length, 0.0, 0.0), lim);
                let traj = DelayedTrajectory::new(path, 0.0);
                let t = frac * traj.completion_time();
                let h = 1e-4;
                let v = (traj.position_at(t + h) - traj.position_at(t)).norm() / h;
                prop_assert!(v <= lim.v_max + 1e-6);
            }

            #[test]
            fn reaches_target(sx in -50.0f64..50.0, sy in -50.0f64..50.0, tx in -500.0f64..500.0,
                              ty in -500.0f64..500.0, tz in 0.0f64..500.0, lim in limits()) {
                let path = DronePath::new(Point3::new(sx, sy, 0.0), Point3::new(tx, ty, tz), lim);
                let traj = DelayedTrajectory::new(path, 0.0);
                let end = traj.position_at(traj.t0 + traj.profile.t1 + traj.profile.t2 + traj.profile.t3);
                prop_assert!((end - path.target).norm() < 1e-6);
                // reconstruct the length from the phases
                let p = traj.profile;
                let rebuilt = p.s_a + p.v_peak * p.t2 + (p.v_peak * p.t3 - 0.5 * p.decel * p.t3 * p.t3);
                prop_assert!((rebuilt - p.length).abs() <= 1e-9 * p.length.max(1.0));
                prop_assert!(p.v_peak <= lim.v_max + 1e-12);
                if p.t2 > 0.0 { prop_assert_eq!(p.v_peak, lim.v_max); }
            }

            #[test]
            fn delay_is_a_time_shift(length in 1.0f64..600.0, t0 in 0.0f64..20.0, t in 0.0f64..80.0) {
                let path = DronePath::new(Point3::origin(), Point3::new(0.0, length, 1.0), KinematicLimits::default());
                let delayed = DelayedTrajectory::new(path, t0);
                let undelayed = DelayedTrajectory::new(path, 0.0);
                let a = delayed.position_at(t0 + t);
                let b = undelayed.position_at(t);
                prop_assert!((a - b).norm() < 1e-9);
            }
        }
    }
}
