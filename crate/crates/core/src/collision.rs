//! All-pairs collision tables.
//!
//! For every ordered pair `(p, q)` the tables hold the minimum path distance
//! `mu`, the collision-possibility flag `pb` (`mu <= SF * R_col`), the closest
//! position fraction `r = s_{p,q}`, its masked copy `s = r * pb`, and the
//! comprehensive entry `cl`:
//!
//! * `1` when `p`'s target or `q`'s start lies inside the threshold of the
//!   other path, so `q` must precede `p` (hard constraint),
//! * `lambda` when `p`'s start lies inside the threshold and `s = 0`,
//! * `s` otherwise (soft constraint when strictly between 0 and 1).

use std::fmt;
use std::io::Write;
use std::ops::{Index, IndexMut};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closest_approach, point_segment_distance, PairGeometry};
use crate::kinematics::DronePath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyParams {
    pub r_col: f64,
    pub sf: f64,
    pub lambda: f64,
}

impl SafetyParams {
    pub fn new(r_col: f64, sf: f64, lambda: f64) -> Result<Self> {
        let params = Self { r_col, sf, lambda };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_col.is_finite() && self.r_col > 0.0) {
            return Err(Error::InvalidInput(format!(
                "r_col must be positive, got {}",
                self.r_col
            )));
        }
        if !(self.sf.is_finite() && self.sf > 1.0) {
            return Err(Error::InvalidInput(format!(
                "safety factor must exceed 1, got {}",
                self.sf
            )));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// `SF * R_col`.
    pub fn threshold(&self) -> f64 {
        self.sf * self.r_col
    }
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self {
            r_col: 1.0,
            sf: 1.5,
            lambda: 0.5,
        }
    }
}

/// Relationship of two paths as seen from drone `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Configuration {
    /// Parallel and farther apart than the threshold.
    ParallelClear = 1,
    /// The whole of `p`'s path is inside the threshold of `q`'s path.
    Enclosed = 2,
    /// Non-parallel and farther apart than the threshold.
    Clear = 3,
    /// Paths come close only between their endpoints.
    CollisionRange = 4,
    /// `p`'s target is the closest point and lies inside the threshold.
    TargetAtClosest = 5,
    /// `p`'s target lies inside the threshold though the closest point is interior.
    TargetInCorridor = 6,
    /// `p`'s start is the closest point and lies inside the threshold.
    StartAtClosest = 7,
    /// `p`'s start lies inside the threshold though the closest point is interior.
    StartInCorridor = 8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    None,
    Soft,
    Hard,
    Infeasible,
}

impl Configuration {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        use Configuration::*;
        Some(match id {
            1 => ParallelClear,
            2 => Enclosed,
            3 => Clear,
            4 => CollisionRange,
            5 => TargetAtClosest,
            6 => TargetInCorridor,
            7 => StartAtClosest,
            8 => StartInCorridor,
            _ => return None,
        })
    }

    pub fn constraint(self) -> ConstraintKind {
        use Configuration::*;
        match self {
            ParallelClear | Clear => ConstraintKind::None,
            Enclosed => ConstraintKind::Infeasible,
            CollisionRange => ConstraintKind::Soft,
            TargetAtClosest | TargetInCorridor | StartAtClosest | StartInCorridor => {
                ConstraintKind::Hard
            }
        }
    }
}

/// Endpoint-to-segment distances for an ordered pair `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointDistances {
    pub p_start_to_q: f64,
    pub p_target_to_q: f64,
    pub q_start_to_p: f64,
}

impl EndpointDistances {
    pub fn between(p: &DronePath, q: &DronePath) -> Self {
        Self {
            p_start_to_q: point_segment_distance(p.start, q.start, q.target),
            p_target_to_q: point_segment_distance(p.target, q.start, q.target),
            q_start_to_p: point_segment_distance(q.start, p.start, p.target),
        }
    }
}

pub fn classify_pair(
    pg: &PairGeometry,
    endpoints: &EndpointDistances,
    params: &SafetyParams,
) -> Configuration {
    let thr = params.threshold();
    if pg.mu > thr {
        return if pg.parallel {
            Configuration::ParallelClear
        } else {
            Configuration::Clear
        };
    }
    let start_inside = endpoints.p_start_to_q <= thr;
    let target_inside = endpoints.p_target_to_q <= thr;
    match (start_inside, target_inside) {
        (true, true) => Configuration::Enclosed,
        (_, true) if pg.s >= 1.0 => Configuration::TargetAtClosest,
        (_, true) => Configuration::TargetInCorridor,
        (true, _) if pg.s <= 0.0 => Configuration::StartAtClosest,
        (true, _) => Configuration::StartInCorridor,
        _ => Configuration::CollisionRange,
    }
}

/// Dense row-major `n x n` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Clone> SquareMatrix<T> {
    pub fn filled(n: usize, value: T) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }
}

impl<T> SquareMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows must all have length n".into()));
        }
        Ok(Self {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }
}

impl<T> Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SquareMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionTables {
    pub n: usize,
    pub params: SafetyParams,
    pub mu: SquareMatrix<f64>,
    pub pb: SquareMatrix<u8>,
    pub r: SquareMatrix<f64>,
    pub s_mat: SquareMatrix<f64>,
    pub cl: SquareMatrix<f64>,
    pub config: SquareMatrix<u8>,
    /// Pairs whose geometry was computed in the parallel branch.
    pub parallel: SquareMatrix<bool>,
}

impl CollisionTables {
    /// Tables holding only a CL matrix; the geometric matrices are zero.
    /// Useful for exercising the priority stage in isolation.
    pub fn from_cl(cl: SquareMatrix<f64>, params: SafetyParams) -> Self {
        let n = cl.n();
        let pb = SquareMatrix {
            n,
            data: cl.data.iter().map(|&v| u8::from(v > 0.0)).collect(),
        };
        Self {
            n,
            params,
            mu: SquareMatrix::filled(n, 0.0),
            pb,
            r: cl.clone(),
            s_mat: cl.clone(),
            config: SquareMatrix::filled(n, 0),
            parallel: SquareMatrix::filled(n, false),
            cl,
        }
    }

    pub fn is_hard(&self, p: usize, q: usize) -> bool {
        self.cl[(p, q)] >= 1.0
    }

    /// Pair geometry for `(p, q)` reconstructed from the tables.
    pub fn closest_fractions(&self, p: usize, q: usize) -> (f64, f64) {
        (self.r[(p, q)], self.r[(q, p)])
    }

    /// Write `mu`, `pb`, `r`, `s`, `cl` and `config` as CSV files into `dir`.
    /// Diagonal cells are left empty.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_one(dir, "mu.csv", |p, q| self.mu[(p, q)].to_string())?;
        self.write_one(dir, "pb.csv", |p, q| self.pb[(p, q)].to_string())?;
        self.write_one(dir, "r.csv", |p, q| self.r[(p, q)].to_string())?;
        self.write_one(dir, "s.csv", |p, q| self.s_mat[(p, q)].to_string())?;
        self.write_one(dir, "cl.csv", |p, q| self.cl[(p, q)].to_string())?;
        self.write_one(dir, "config.csv", |p, q| self.config[(p, q)].to_string())?;
        Ok(())
    }

    fn write_one(
        &self,
        dir: &Path,
        name: &str,
        cell: impl Fn(usize, usize) -> String,
    ) -> Result<()> {
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        for p in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|q| if p == q { String::new() } else { cell(p, q) })
                .collect();
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

impl fmt::Display for CollisionTables {
    /// CL matrix, one row per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in 0..self.n {
            let cells: Vec<String> = (0..self.n)
                .map(|q| {
                    if p == q {
                        "-".to_string()
                    } else {
                        format!("{:.3}", self.cl[(p, q)])
                    }
                })
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

struct Cell {
    mu: f64,
    pb: u8,
    r: f64,
    s: f64,
    cl: f64,
    config: Configuration,
    parallel: bool,
}

fn evaluate_cell(p: &DronePath, q: &DronePath, params: &SafetyParams) -> Result<Cell> {
    let pg = closest_approach(p, q)?;
    let ends = EndpointDistances::between(p, q);
    let thr = params.threshold();
    let config = classify_pair(&pg, &ends, params);
    let pb = u8::from(pg.mu <= thr);
    let s = pg.s * f64::from(pb);
    let cl = if pb == 0 {
        0.0
    } else if ends.p_target_to_q <= thr || ends.q_start_to_p <= thr {
        1.0
    } else if ends.p_start_to_q <= thr && s == 0.0 {
        params.lambda
    } else {
        s
    };
    Ok(Cell {
        mu: pg.mu,
        pb,
        r: pg.s,
        s,
        cl,
        config,
        parallel: pg.parallel,
    })
}

fn check_endpoint_separation(paths: &[DronePath], min_sep: f64) -> Result<()> {
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            let ds = (paths[i].start - paths[j].start).norm();
            let dt = (paths[i].target - paths[j].target).norm();
            if ds <= min_sep || dt <= min_sep {
                return Err(Error::InvalidInput(format!(
                    "drones {i} and {j} are within {min_sep} m of each other at their start or target"
                )));
            }
        }
    }
    Ok(())
}

pub fn build_tables(paths: &[DronePath], params: SafetyParams) -> Result<CollisionTables> {
    params.validate()?;
    let n = paths.len();
    if n == 0 {
        return Err(Error::InvalidInput("at least one drone is required".into()));
    }
    if let Some(i) = paths.iter().position(|p| p.start == p.target) {
        return Err(Error::DegeneratePath { drone: i });
    }
    check_endpoint_separation(paths, params.r_col)?;

    let rows: Vec<Vec<Option<Cell>>> = (0..n)
        .into_par_iter()
        .map(|p| {
            (0..n)
                .map(|q| {
                    if p == q {
                        Ok(None)
                    } else {
                        evaluate_cell(&paths[p], &paths[q], &params).map(Some)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tables = CollisionTables {
        n,
        params,
        mu: SquareMatrix::filled(n, 0.0),
        pb: SquareMatrix::filled(n, 0),
        r: SquareMatrix::filled(n, 0.0),
        s_mat: SquareMatrix::filled(n, 0.0),
        cl: SquareMatrix::filled(n, 0.0),
        config: SquareMatrix::filled(n, 0),
        parallel: SquareMatrix::filled(n, false),
    };
    for (p, row) in rows.into_iter().enumerate() {
        for (q, cell) in row.into_iter().enumerate() {
            let Some(cell) = cell else { continue };
            if cell.config == Configuration::Enclosed {
                return Err(Error::InfeasiblePair { p, q });
            }
            tables.mu[(p, q)] = cell.mu;
            tables.pb[(p, q)] = cell.pb;
            tables.r[(p, q)] = cell.r;
            tables.s_mat[(p, q)] = cell.s;
            tables.cl[(p, q)] = cell.cl;
            tables.config[(p, q)] = cell.config.id();
            tables.parallel[(p, q)] = cell.parallel;
        }
    }
    Ok(tables)
}

/// Write the CL matrix as whitespace-separated rows (debug helper).
pub fn dump_cl(tables: &CollisionTables, mut out: impl Write) -> std::io::Result<()> {
    write!(out, "{tables}")
}
