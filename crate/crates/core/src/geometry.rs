//! Closest approach between two straight path segments.
//!
//! Segments are parameterised as `start + s * (target - start)` with
//! `s in [0, 1]`. The unconstrained minimiser of the squared distance is
//! clamped into the unit square, re-projecting the other parameter onto its
//! segment whenever one clamps, so the result is the true segment-segment
//! minimum rather than the distance between independently clamped points.

use std::cmp::Ordering;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::DronePath;

/// Relative tolerance on `a*c - b^2` below which two segments are treated as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    /// Fraction of path `p` at its closest point to path `q`.
    pub s: f64,
    /// Fraction of path `q` at its closest point to path `p`.
    pub t: f64,
    pub point_p: Point3<f64>,
    pub point_q: Point3<f64>,
    pub mu: f64,
    /// Set when the segments are parallel. `s` and `t` then mark the middle
    /// of the overlapping extent (or the nearest endpoints when the
    /// projections do not overlap).
    pub parallel: bool,
}

impl PairGeometry {
    /// The same geometry seen from the other segment.
    pub fn swapped(&self) -> Self {
        Self {
            s: self.t,
            t: self.s,
            point_p: self.point_q,
            point_q: self.point_p,
            mu: self.mu,
            parallel: self.parallel,
        }
    }
}

pub fn closest_approach(path_p: &DronePath, path_q: &DronePath) -> Result<PairGeometry> {
    segment_closest_approach(path_p.start, path_p.target, path_q.start, path_q.target)
}

/// Closest approach between segments `p0 -> p1` and `q0 -> q1`.
///
/// The pair is evaluated in a canonical order so that swapping the
/// arguments yields bitwise-mirrored results.
pub fn segment_closest_approach(
    p0: Point3<f64>,
    p1: Point3<f64>,
    q0: Point3<f64>,
    q1: Point3<f64>,
) -> Result<PairGeometry> {
    if p0 == p1 {
        return Err(Error::DegeneratePath { drone: 0 });
    }
    if q0 == q1 {
        return Err(Error::DegeneratePath { drone: 1 });
    }
    if lex_cmp(&[p0, p1], &[q0, q1]) == Ordering::Greater {
        Ok(ordered_closest_approach(q0, q1, p0, p1).swapped())
    } else {
        Ok(ordered_closest_approach(p0, p1, q0, q1))
    }
}

fn lex_cmp(a: &[Point3<f64>; 2], b: &[Point3<f64>; 2]) -> Ordering {
    a.iter()
        .flat_map(|p| p.coords.iter())
        .zip(b.iter().flat_map(|p| p.coords.iter()))
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn ordered_closest_approach(
    p0: Point3<f64>,
    p1: Point3<f64>,
    q0: Point3<f64>,
    q1: Point3<f64>,
) -> PairGeometry {
    let b1 = p1 - p0;
    let b2 = q1 - q0;
    let w = p0 - q0;
    let a = b1.dot(&b1);
    let b = b1.dot(&b2);
    let c = b2.dot(&b2);
    let d = b1.dot(&w);
    let e = b2.dot(&w);

    let denom = a * c - b * b;
    let parallel = denom.abs() <= PARALLEL_TOLERANCE * a * c;

    let (s, t) = if parallel {
        parallel_parameters(a, b, c, d, e)
    } else {
        let mut s = ((b * e - c * d) / denom).clamp(0.0, 1.0);
        let mut t = (b * s + e) / c;
        if t < 0.0 {
            t = 0.0;
            s = (-d / a).clamp(0.0, 1.0);
        } else if t > 1.0 {
            t = 1.0;
            s = ((b - d) / a).clamp(0.0, 1.0);
        }
        (s, t)
    };

    let point_p = p0 + b1 * s;
    let point_q = q0 + b2 * t;
    PairGeometry {
        s,
        t,
        point_p,
        point_q,
        mu: (point_p - point_q).norm(),
        parallel,
    }
}

fn parallel_parameters(a: f64, b: f64, c: f64, d: f64, e: f64) -> (f64, f64) {
    // q's endpoints projected onto p's parameter line
    let sq0 = -d / a;
    let sq1 = (b - d) / a;
    let lo = sq0.min(sq1).max(0.0);
    let hi = sq0.max(sq1).min(1.0);
    let s = if lo <= hi {
        0.5 * (lo + hi)
    } else if sq0.max(sq1) < 0.0 {
        0.0
    } else {
        1.0
    };
    let t = ((b * s + e) / c).clamp(0.0, 1.0);
    (s, t)
}

/// Euclidean distance from `point` to the segment `a -> b`.
pub fn point_segment_distance(point: Point3<f64>, a: Point3<f64>, b: Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (point - a).norm();
    }
    let u = ((point - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (point - (a + ab * u)).norm()
}
