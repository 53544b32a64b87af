//! Independent schedule verification and run metrics.
//!
//! The verifier shares only the motion model with the scheduler. Each pair's
//! distance curve is minimised by interval branch-and-bound: the distance
//! changes no faster than the sum of the two peak speeds, so an interval can
//! be discarded once that bound shows it cannot beat the best value found.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::Schedule;
use crate::error::{Error, Result};
use crate::kinematics::{DelayedTrajectory, DronePath};

pub const DEFAULT_RESOLUTION: f64 = 1e-3;

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const PAIR_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub p: usize,
    pub q: usize,
    /// Earliest time found at which the pair is within `r_col`.
    pub time: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub collision_free: bool,
    /// Smallest pairwise distance observed; `+inf` for a single drone.
    pub min_distance: f64,
    pub closest_pair: Option<(usize, usize)>,
    pub first_violation: Option<Violation>,
}

/// Minimum distance of one pair and the earliest time it dips to `r_col`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCheck {
    pub min_distance: f64,
    pub argmin: f64,
    pub first_violation: Option<(f64, f64)>,
}

fn point_to_segment(x: &nalgebra::Point3<f64>, a: &nalgebra::Point3<f64>, b: &nalgebra::Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let u = if len2 > 0.0 {
        ((x - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x - (a + ab * u)).norm()
}

/// Lower bound on the distance between any point of `a` and any point of `b`.
///
/// The distance from a point sliding along `a` to the segment `b` is convex
/// and `|a|`-Lipschitz in the sliding fraction, so golden-section search
/// narrowed to width `w` leaves an error of at most `|a| * w`.
fn segment_gap_lower_bound(a: &DronePath, b: &DronePath) -> f64 {
    let g = |u: f64| point_to_segment(&(a.start + a.displacement() * u), &b.start, &b.target);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    while hi - lo > 1e-9 {
        if gc < gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - INV_PHI * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + INV_PHI * (hi - lo);
            gd = g(d);
        }
    }
    let found = gc.min(gd).min(g(0.0)).min(g(1.0));
    (found - a.length() * (hi - lo) - 1e-9).max(0.0)
}

/// Branch-and-bound minimum of the distance between two delayed trajectories.
pub fn check_pair(
    p: &DelayedTrajectory,
    q: &DelayedTrajectory,
    r_col: f64,
    resolution: f64,
) -> PairCheck {
    let dist = |t: f64| (p.position_at(t) - q.position_at(t)).norm();
    let t0 = p.t0.min(q.t0);
    let t1 = p.completion_time().max(q.completion_time()).max(t0);
    let speed = p.profile.v_peak + q.profile.v_peak;

    let (f0, f1) = (dist(t0), dist(t1));
    let mut best = (f0, t0);
    if f1 < best.0 {
        best = (f1, t1);
    }
    let mut first: Option<(f64, f64)> = None;
    let note = |t: f64, d: f64, first: &mut Option<(f64, f64)>| {
        if d <= r_col && first.is_none_or(|(ft, _)| t < ft) {
            *first = Some((t, d));
        }
    };
    note(t0, f0, &mut first);
    note(t1, f1, &mut first);

    // left-first depth-first traversal visits earlier times first
    let mut stack = vec![(t0, t1, f0, f1)];
    while let Some((a, b, fa, fb)) = stack.pop() {
        let bound = 0.5 * (fa + fb - speed * (b - a));
        let violation_possible = bound <= r_col && first.is_none_or(|(ft, _)| a < ft);
        if bound >= best.0 && !violation_possible {
            continue;
        }
        if b - a <= resolution {
            let (d, t) = golden(&dist, a, b, resolution * 1e-3);
            if d < best.0 {
                best = (d, t);
            }
            note(t, d, &mut first);
            continue;
        }
        let m = 0.5 * (a + b);
        let fm = dist(m);
        if fm < best.0 {
            best = (fm, m);
        }
        note(m, fm, &mut first);
        stack.push((m, b, fm, fb));
        stack.push((a, m, fa, fm));
    }
    PairCheck {
        min_distance: best.0,
        argmin: best.1,
        first_violation: first,
    }
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = if fc < fd { (fc, c) } else { (fd, d) };
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best.0 {
                best = (fc, c);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.0 {
                best = (fd, d);
            }
        }
    }
    best
}

/// Check every pair of a schedule against `r_col`.
pub fn verify(paths: &[DronePath], schedule: &Schedule, r_col: f64, resolution: f64) -> Result<VerifyReport> {
    let n = paths.len();
    if schedule.n() != n {
        return Err(Error::InvalidInput(format!(
            "schedule covers {} drones, scenario has {n}",
            schedule.n()
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidInput("resolution must be positive".into()));
    }
    let trajs: Vec<DelayedTrajectory> = paths
        .iter()
        .zip(&schedule.delays)
        .map(|(&p, &t0)| DelayedTrajectory::new(p, t0))
        .collect();

    // Pairs are visited in order of their static gap. Once that gap exceeds
    // both r_col and the best distance found, no later pair can matter.
    let mut order: Vec<(f64, usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|p| {
            (p + 1..n).map(move |q| (segment_gap_lower_bound(&paths[p], &paths[q]), p, q))
        })
        .collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut report = VerifyReport {
        collision_free: true,
        min_distance: f64::INFINITY,
        closest_pair: None,
        first_violation: None,
    };
    for chunk in order.chunks(PAIR_CHUNK) {
        if chunk[0].0 > r_col && chunk[0].0 >= report.min_distance {
            break;
        }
        let checked: Vec<(usize, usize, PairCheck)> = chunk
            .par_iter()
            .map(|&(_, p, q)| (p, q, check_pair(&trajs[p], &trajs[q], r_col, resolution)))
            .collect();
        for (p, q, c) in checked {
            if c.min_distance < report.min_distance {
                report.min_distance = c.min_distance;
                report.closest_pair = Some((p, q));
            }
            if let Some((time, distance)) = c.first_violation {
                if report.first_violation.is_none_or(|v| time < v.time) {
                    report.first_violation = Some(Violation { p, q, time, distance });
                }
            }
        }
    }
    report.collision_free = report.min_distance > r_col;
    Ok(report)
}

/// Time at which the last drone stops.
pub fn flock_time(schedule: &Schedule) -> f64 {
    schedule
        .delays
        .iter()
        .zip(&schedule.travel_times)
        .map(|(d, t)| d + t)
        .fold(0.0, f64::max)
}

/// Time overhead relative to the longest travel time, and distance overhead
/// relative to the straight-line lengths, both in percent.
pub fn overheads(paths: &[DronePath], schedule: &Schedule) -> (f64, f64) {
    let longest = schedule.travel_times.iter().copied().fold(0.0, f64::max);
    let t_oh = if longest > 0.0 {
        100.0 * (flock_time(schedule) / longest)
    } else {
        100.0
    };
    // every drone flies exactly its straight line
    let straight: f64 = paths.iter().map(DronePath::length).sum();
    let flown = straight;
    let d_oh = if straight > 0.0 { 100.0 * (flown / straight) } else { 100.0 };
    (t_oh, d_oh)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub n: usize,
    pub delta: f64,
    pub flock_time: f64,
    pub mean_delay: f64,
    pub max_delay: f64,
    pub overhead_time_pct: f64,
    pub overhead_distance_pct: f64,
    pub calc_time: f64,
    pub min_distance: f64,
    pub collision_free: bool,
}

impl RunMetrics {
    pub fn compute(
        seed: u64,
        delta: f64,
        paths: &[DronePath],
        schedule: &Schedule,
        report: &VerifyReport,
        calc_time: f64,
    ) -> Self {
        let n = schedule.n();
        let (t_oh, d_oh) = overheads(paths, schedule);
        Self {
            seed,
            n,
            delta,
            flock_time: flock_time(schedule),
            mean_delay: schedule.delays.iter().sum::<f64>() / n.max(1) as f64,
            max_delay: schedule.delays.iter().copied().fold(0.0, f64::max),
            overhead_time_pct: t_oh,
            overhead_distance_pct: d_oh,
            calc_time,
            min_distance: report.min_distance,
            collision_free: report.collision_free,
        }
    }
}
