//! Start-delay assignment in priority order.
//!
//! For a lower-priority drone `q` and an already scheduled drone `p` whose
//! paths come within the threshold, the relative delays `δ = t0_q - t0_p`
//! that cause a collision form a forbidden interval around the critical time
//! difference `T_cr`. Its ends are located by binary search on a sampled
//! collision-free predicate. Each drone then takes the smallest non-negative
//! delay outside the union of its absolute forbidden intervals.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::CollisionTables;
use crate::error::{Error, Result};
use crate::kinematics::{DelayedTrajectory, DronePath, VelocityProfile};
use crate::priority::PriorityVector;

pub const SCHEDULE_SCHEMA_VERSION: u32 = 1;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Binary-search resolution on delays (s).
    pub dt_step: f64,
    /// Sampling step of the distance predicate (s).
    pub t_sample: f64,
    /// Golden-section tolerance when refining a sampled minimum (s).
    pub refine_tol: f64,
    /// Largest factor by which the initial search bound may grow.
    pub expansion_cap: f64,
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt_step", self.dt_step),
            ("t_sample", self.t_sample),
            ("refine_tol", self.refine_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.expansion_cap >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "expansion_cap must be at least 1, got {}",
                self.expansion_cap
            )));
        }
        Ok(())
    }
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            dt_step: 1e-3,
            t_sample: 1e-2,
            refine_tol: 1e-5,
            expansion_cap: 16.0,
        }
    }
}

/// Delays in `[lower, upper)` collide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ForbiddenInterval {
    pub fn shifted(self, by: f64) -> Self {
        Self {
            lower: self.lower + by,
            upper: self.upper + by,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lower <= t && t < self.upper
    }
}

/// Minimum of `f` over `[t_start, t_end]`.
///
/// `f` is sampled every `step` seconds and each sampled local minimum is
/// refined by golden-section search over its bracketing samples. With a
/// finite `floor`, `speed` bounds how fast `f` can fall, so samples far
/// above the floor let the scan skip ahead, and the scan stops as soon as a
/// value at or below the floor is seen. The result is always an attained
/// value of `f`, so it never underestimates the true minimum.
pub(crate) fn sampled_minimum(
    f: impl Fn(f64) -> f64,
    t_start: f64,
    t_end: f64,
    step: f64,
    speed: f64,
    floor: f64,
    tol: f64,
) -> f64 {
    let t_end = t_end.max(t_start);
    let last = ((t_end - t_start) / step).ceil() as usize;
    let time = |k: usize| (t_start + k as f64 * step).min(t_end);
    let skipping = floor.is_finite() && speed > 0.0;

    let mut best = f64::INFINITY;
    // the two most recent samples, kept only while consecutive
    let mut prev: Option<(usize, f64)> = None;
    let mut prev2: Option<(usize, f64)> = None;
    let mut k = 0;
    loop {
        let t = time(k);
        let d = f(t);
        best = best.min(d);
        if best <= floor {
            return best;
        }
        if let (Some((k1, d1)), Some((k2, d2))) = (prev, prev2) {
            if k1 + 1 == k && k2 + 1 == k1 && d1 <= d2 && d1 <= d {
                best = best.min(golden_min(&f, time(k2), t, tol));
                if best <= floor {
                    return best;
                }
            }
        }
        if k >= last {
            break;
        }
        let jump = if skipping {
            (((d - floor) / (speed * step)).floor() as usize).max(1)
        } else if speed == 0.0 && floor.is_finite() {
            // nothing moves: the distance is constant
            break;
        } else {
            1
        };
        if jump > 1 {
            prev = None;
            prev2 = None;
        } else {
            prev2 = prev;
            prev = Some((k, d));
        }
        k = (k + jump).min(last);
    }
    best
}

/// Smallest value of `f` seen during a golden-section search on `[a, b]`.
pub(crate) fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = fc.min(fd);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            best = best.min(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            best = best.min(fd);
        }
    }
    best
}

fn sampled_pair_minimum(
    p: &DelayedTrajectory,
    q: &DelayedTrajectory,
    params: &SearchParams,
    floor: f64,
) -> f64 {
    let t_start = p.t0.min(q.t0);
    let t_end = p.completion_time().max(q.completion_time());
    let speed = p.profile.v_peak + q.profile.v_peak;
    sampled_minimum(
        |t| (p.position_at(t) - q.position_at(t)).norm(),
        t_start,
        t_end,
        params.t_sample,
        speed,
        floor,
        params.refine_tol,
    )
}

/// Minimum distance between two delayed trajectories over the whole time
/// both exist, parked phases included.
pub fn min_pair_distance(
    traj_p: &DelayedTrajectory,
    traj_q: &DelayedTrajectory,
    params: &SearchParams,
) -> f64 {
    sampled_pair_minimum(traj_p, traj_q, params, f64::NEG_INFINITY)
}

/// True when `q`, delayed by `delta` relative to `p`, stays farther than
/// `threshold` from `p` at all times.
pub fn collision_free(
    p: (&DronePath, &VelocityProfile),
    q: (&DronePath, &VelocityProfile),
    delta: f64,
    threshold: f64,
    params: &SearchParams,
) -> bool {
    let tp = DelayedTrajectory::with_profile(*p.0, *p.1, (-delta).max(0.0));
    let tq = DelayedTrajectory::with_profile(*q.0, *q.1, delta.max(0.0));
    sampled_pair_minimum(&tp, &tq, params, threshold) > threshold
}

/// Zero-delay times at which each drone reaches its closest-approach point,
/// and their difference `T_cr = t_cr_p - t_cr_q`.
pub fn critical_times(
    s: f64,
    t: f64,
    profile_p: &VelocityProfile,
    profile_q: &VelocityProfile,
) -> (f64, f64, f64) {
    let tp = profile_p.time_to_arc_length(s * profile_p.length);
    let tq = profile_q.time_to_arc_length(t * profile_q.length);
    (tp, tq, tp - tq)
}

/// Pair data needed to search the forbidden delays of `lower` against `higher`.
#[derive(Debug, Clone, Copy)]
pub struct PairSearch<'a> {
    pub higher: usize,
    pub lower: usize,
    pub path_higher: &'a DronePath,
    pub profile_higher: &'a VelocityProfile,
    pub path_lower: &'a DronePath,
    pub profile_lower: &'a VelocityProfile,
    /// Fraction along the higher drone's path of the closest approach.
    pub s_higher: f64,
    /// Fraction along the lower drone's path of the closest approach.
    pub s_lower: f64,
    /// CL entry of the lower drone against the higher one.
    pub cl_entry: f64,
}

/// Relative forbidden delays of the lower drone against the higher one.
pub fn forbidden_interval(
    pair: &PairSearch<'_>,
    threshold: f64,
    params: &SearchParams,
) -> Result<ForbiddenInterval> {
    let (t_hi, t_lo, t_cr) =
        critical_times(pair.s_higher, pair.s_lower, pair.profile_higher, pair.profile_lower);
    let free = |delta: f64| {
        collision_free(
            (pair.path_higher, pair.profile_higher),
            (pair.path_lower, pair.profile_lower),
            delta,
            threshold,
            params,
        )
    };
    let blocked = || Error::BlockedPair {
        higher: pair.higher,
        lower: pair.lower,
    };

    let upper = if free(t_cr) {
        t_cr
    } else {
        let reach = t_lo + pair.profile_higher.travel_time();
        let far = expand(t_cr, reach, 1.0, params, &free).ok_or_else(blocked)?;
        bisect(t_cr, far, params.dt_step, &free)
    };
    let lower = if pair.cl_entry >= 1.0 {
        f64::NEG_INFINITY
    } else if free(t_cr) {
        t_cr
    } else {
        let reach = t_hi + pair.profile_lower.travel_time();
        let far = expand(t_cr, reach, -1.0, params, &free).ok_or_else(blocked)?;
        bisect(t_cr, far, params.dt_step, &free)
    };
    Ok(ForbiddenInterval { lower, upper })
}

/// First collision-free point `origin + dir * reach * 2^k` within the expansion cap.
fn expand(
    origin: f64,
    reach: f64,
    dir: f64,
    params: &SearchParams,
    free: &impl Fn(f64) -> bool,
) -> Option<f64> {
    let reach = reach.max(params.dt_step);
    let mut factor = 1.0;
    while factor <= params.expansion_cap {
        let candidate = origin + dir * reach * factor;
        if free(candidate) {
            return Some(candidate);
        }
        factor *= 2.0;
    }
    None
}

/// Shrink `[colliding, free]` (in either orientation) below `resolution`
/// and return the free end.
fn bisect(mut colliding: f64, mut free_end: f64, resolution: f64, free: &impl Fn(f64) -> bool) -> f64 {
    while (free_end - colliding).abs() >= resolution {
        let mid = 0.5 * (colliding + free_end);
        if free(mid) {
            free_end = mid;
        } else {
            colliding = mid;
        }
    }
    free_end
}

/// Smallest `t >= 0` outside every half-open interval.
pub fn assign_delay(intervals: &[ForbiddenInterval]) -> f64 {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.lower.total_cmp(&b.lower).then(a.upper.total_cmp(&b.upper)));
    let mut delay = 0.0;
    for iv in &sorted {
        if delay < iv.lower {
            break;
        }
        if delay < iv.upper {
            delay = iv.upper;
        }
    }
    delay
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub priority: PriorityVector,
    /// Absolute start delay per drone, indexed by drone.
    pub delays: Vec<f64>,
    pub travel_times: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleEntry {
    drone_id: usize,
    delay_s: f64,
    travel_time_s: f64,
}

#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    schema_version: u32,
    priority: Vec<usize>,
    entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn n(&self) -> usize {
        self.delays.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ScheduleFile {
            schema_version: SCHEDULE_SCHEMA_VERSION,
            priority: self.priority.order.clone(),
            entries: self
                .delays
                .iter()
                .zip(&self.travel_times)
                .enumerate()
                .map(|(drone_id, (&delay_s, &travel_time_s))| ScheduleEntry {
                    drone_id,
                    delay_s,
                    travel_time_s,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScheduleFile = serde_json::from_str(text)?;
        if file.schema_version != SCHEDULE_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported schedule schema_version {}",
                file.schema_version
            )));
        }
        let n = file.entries.len();
        let mut delays = vec![f64::NAN; n];
        let mut travel_times = vec![f64::NAN; n];
        for e in &file.entries {
            if e.drone_id >= n || !delays[e.drone_id].is_nan() {
                return Err(Error::InvalidInput(format!(
                    "schedule entry for drone {} is duplicated or out of range",
                    e.drone_id
                )));
            }
            if !(e.delay_s.is_finite() && e.delay_s >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "drone {} has invalid delay {}",
                    e.drone_id, e.delay_s
                )));
            }
            delays[e.drone_id] = e.delay_s;
            travel_times[e.drone_id] = e.travel_time_s;
        }
        let priority = PriorityVector::new(file.priority)?;
        if priority.len() != n {
            return Err(Error::InvalidInput(
                "priority vector length differs from the number of entries".into(),
            ));
        }
        Ok(Self {
            priority,
            delays,
            travel_times,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Assign start delays to every drone in priority order.
pub fn schedule_all(
    paths: &[DronePath],
    tables: &CollisionTables,
    pv: &PriorityVector,
    params: &SearchParams,
) -> Result<Schedule> {
    params.validate()?;
    let n = paths.len();
    if tables.n != n || pv.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} paths but tables cover {} drones and the priority vector {}",
            tables.n,
            pv.len()
        )));
    }
    let profiles: Vec<VelocityProfile> = paths.iter().map(DronePath::profile).collect();
    let threshold = tables.params.threshold();
    let mut delays: Vec<Option<f64>> = vec![None; n];

    for (rank, &x) in pv.order.iter().enumerate() {
        let conflicts: Vec<usize> = pv.order[..rank]
            .iter()
            .copied()
            .filter(|&j| tables.pb[(x, j)] == 1)
            .collect();
        let intervals: Result<Vec<ForbiddenInterval>> = conflicts
            .par_iter()
            .map(|&j| {
                let (s_higher, s_lower) = tables.closest_fractions(j, x);
                let pair = PairSearch {
                    higher: j,
                    lower: x,
                    path_higher: &paths[j],
                    profile_higher: &profiles[j],
                    path_lower: &paths[x],
                    profile_lower: &profiles[x],
                    s_higher,
                    s_lower,
                    cl_entry: tables.cl[(x, j)],
                };
                let t0 = delays[j].expect("higher-priority drones are scheduled first");
                forbidden_interval(&pair, threshold, params).map(|iv| iv.shifted(t0))
            })
            .collect();
        match intervals {
            Ok(ivs) => delays[x] = Some(assign_delay(&ivs)),
            Err(e) => {
                return Err(Error::Scheduling {
                    source: Box::new(e),
                    partial_delays: delays,
                })
            }
        }
    }

    Ok(Schedule {
        priority: pv.clone(),
        delays: delays.into_iter().map(|d| d.unwrap_or(0.0)).collect(),
        travel_times: profiles.iter().map(VelocityProfile::travel_time).collect(),
    })
}
