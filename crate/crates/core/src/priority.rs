//! Cycle detection over hard constraints and the priority vector.
//!
//! A hard constraint `cl[p][q] = 1` means drone `q` must depart before `p`.
//! The priority vector is built greedily, one drone per round, from an
//! extended copy of CL that tracks per-row soft counts, row maxima and hard
//! counts.

use serde::{Deserialize, Serialize};

use crate::collision::CollisionTables;
use crate::error::{Error, Result};

/// Value written over a hard entry once its blocking drone has been placed.
pub const GAMMA: f64 = 0.5;

/// Elementary cycles are enumerated only up to this many drones.
pub const CYCLE_ENUMERATION_LIMIT: usize = 50;
const MAX_REPORTED_CYCLES: usize = 1000;
const MAX_ENUMERATION_STEPS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityVector {
    /// `order[i]` is the drone with the `i`-th highest priority.
    pub order: Vec<usize>,
}

impl PriorityVector {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &d in &order {
            if d >= n || std::mem::replace(&mut seen[d], true) {
                return Err(Error::InvalidInput(format!(
                    "priority vector is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Self { order })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `rank[d]` is the position of drone `d` in the order.
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.order.len()];
        for (i, &d) in self.order.iter().enumerate() {
            rank[d] = i;
        }
        rank
    }

    /// True when every hard constraint of `cl` is honoured.
    pub fn respects_hard_constraints(&self, tables: &CollisionTables) -> bool {
        let rank = self.ranks();
        (0..tables.n).all(|p| {
            (0..tables.n).all(|q| p == q || !tables.is_hard(p, q) || rank[q] < rank[p])
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionReason {
    ZeroConstraint,
    MaxCount,
    SmallestMax,
    SmallestIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub selected: usize,
    pub reason: SelectionReason,
    pub count: usize,
    pub max: f64,
    pub blocks: usize,
}

/// CL with per-row bookkeeping columns.
#[derive(Debug, Clone)]
pub struct ExtendedCollision {
    n: usize,
    base: Vec<f64>,
    count_col: Vec<usize>,
    max_col: Vec<f64>,
    blocks_col: Vec<usize>,
    processed: Vec<bool>,
}

impl ExtendedCollision {
    pub fn new(tables: &CollisionTables) -> Self {
        let n = tables.n;
        let mut base = vec![0.0; n * n];
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    base[p * n + q] = tables.cl[(p, q)];
                }
            }
        }
        let mut ecl = Self {
            n,
            base,
            count_col: vec![0; n],
            max_col: vec![0.0; n],
            blocks_col: vec![0; n],
            processed: vec![false; n],
        };
        for j in 0..n {
            let (c, m, b) = ecl.recompute_row(j);
            ecl.count_col[j] = c;
            ecl.max_col[j] = m;
            ecl.blocks_col[j] = b;
        }
        ecl
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.base[j * self.n + k]
    }

    pub fn count(&self, j: usize) -> usize {
        self.count_col[j]
    }

    pub fn max(&self, j: usize) -> f64 {
        self.max_col[j]
    }

    pub fn blocks(&self, j: usize) -> usize {
        self.blocks_col[j]
    }

    pub fn is_processed(&self, j: usize) -> bool {
        self.processed[j]
    }

    /// Soft count, row maximum below 1, and hard count of row `j` computed from scratch.
    pub fn recompute_row(&self, j: usize) -> (usize, f64, usize) {
        let row = &self.base[j * self.n..(j + 1) * self.n];
        let count = row.iter().filter(|&&v| v > 0.0 && v < 1.0).count();
        let blocks = row.iter().filter(|&&v| v >= 1.0).count();
        let max = row
            .iter()
            .copied()
            .filter(|&v| v < 1.0)
            .fold(0.0, f64::max);
        (count, max, blocks)
    }

    /// Choose the next drone without modifying any state.
    pub fn select(&self) -> Option<(usize, SelectionReason)> {
        let open = || (0..self.n).filter(|&j| !self.processed[j]);
        if let Some(j) = open().find(|&j| self.count_col[j] == 0 && self.blocks_col[j] == 0) {
            return Some((j, SelectionReason::ZeroConstraint));
        }
        let eligible: Vec<usize> = open().filter(|&j| self.blocks_col[j] == 0).collect();
        let best_count = eligible.iter().map(|&j| self.count_col[j]).max()?;
        let by_count: Vec<usize> = eligible
            .into_iter()
            .filter(|&j| self.count_col[j] == best_count)
            .collect();
        if by_count.len() == 1 {
            return Some((by_count[0], SelectionReason::MaxCount));
        }
        let best_max = by_count
            .iter()
            .map(|&j| self.max_col[j])
            .fold(f64::INFINITY, f64::min);
        let by_max: Vec<usize> = by_count
            .into_iter()
            .filter(|&j| self.max_col[j] == best_max)
            .collect();
        let reason = if by_max.len() == 1 {
            SelectionReason::SmallestMax
        } else {
            SelectionReason::SmallestIndex
        };
        Some((by_max[0], reason))
    }

    /// Mark `y` as placed: zero its row and relax the hard entries pointing at it.
    pub fn commit(&mut self, y: usize) {
        let n = self.n;
        self.processed[y] = true;
        self.base[y * n..(y + 1) * n].fill(0.0);
        self.count_col[y] = 0;
        self.max_col[y] = 0.0;
        self.blocks_col[y] = 0;
        for j in 0..n {
            if j != y && self.base[j * n + y] == 1.0 {
                self.base[j * n + y] = GAMMA;
                self.count_col[j] += 1;
                self.blocks_col[j] -= 1;
                self.max_col[j] = self.max_col[j].max(GAMMA);
            }
        }
    }

    /// One round of the selection loop.
    pub fn step(&mut self) -> Result<(usize, SelectionReason)> {
        let (y, reason) = self.select().ok_or_else(|| {
            let stuck: Vec<usize> = (0..self.n).filter(|&j| !self.processed[j]).collect();
            Error::Inconsistent(format!(
                "every remaining drone is blocked by a hard constraint: {stuck:?}"
            ))
        })?;
        self.commit(y);
        Ok((y, reason))
    }
}

pub fn compute_priority(tables: &CollisionTables) -> Result<PriorityVector> {
    compute_priority_traced(tables).map(|(pv, _)| pv)
}

pub fn compute_priority_traced(
    tables: &CollisionTables,
) -> Result<(PriorityVector, Vec<RoundTrace>)> {
    let mut ecl = ExtendedCollision::new(tables);
    let mut order = Vec::with_capacity(tables.n);
    let mut trace = Vec::with_capacity(tables.n);
    for round in 0..tables.n {
        let (y, reason) = ecl
            .select()
            .ok_or_else(|| Error::Inconsistent("no eligible drone remains".into()))?;
        trace.push(RoundTrace {
            round,
            selected: y,
            reason,
            count: ecl.count(y),
            max: ecl.max(y),
            blocks: ecl.blocks(y),
        });
        ecl.commit(y);
        order.push(y);
    }
    Ok((PriorityVector { order }, trace))
}

/// Successor lists of the precedence graph: `q -> p` whenever `cl[p][q] = 1`.
fn precedence_graph(tables: &CollisionTables) -> Vec<Vec<usize>> {
    let n = tables.n;
    let mut succ = vec![Vec::new(); n];
    for p in 0..n {
        for q in 0..n {
            if p != q && tables.is_hard(p, q) {
                succ[q].push(p);
            }
        }
    }
    succ
}

/// Cycles among hard constraints, each listed in precedence order starting
/// from its smallest drone. Empty when the constraints are satisfiable.
pub fn detect_cycle(tables: &CollisionTables) -> Vec<Vec<usize>> {
    let succ = precedence_graph(tables);
    let Some(first) = find_cycle(&succ) else {
        return Vec::new();
    };
    if succ.len() <= CYCLE_ENUMERATION_LIMIT {
        let all = enumerate_cycles(&succ);
        if !all.is_empty() {
            return all;
        }
    }
    vec![rotate_to_min(first)]
}

/// Iterative depth-first search returning the first cycle closed by a back edge.
fn find_cycle(succ: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = succ.len();
    let mut mark = vec![Mark::New; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Active;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&w) = succ[v].get(*next) {
                *next += 1;
                match mark[w] {
                    Mark::New => {
                        mark[w] = Mark::Active;
                        stack.push((w, 0));
                    }
                    Mark::Active => {
                        let from = stack.iter().position(|&(u, _)| u == w).unwrap_or(0);
                        return Some(stack[from..].iter().map(|&(u, _)| u).collect());
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

/// Elementary cycles, each rooted at its smallest vertex. Stops after
/// `MAX_REPORTED_CYCLES` cycles or a fixed exploration budget.
fn enumerate_cycles(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    let mut cycles = Vec::new();
    let mut budget = MAX_ENUMERATION_STEPS;
    let mut on_path = vec![false; n];
    for s in 0..n {
        let mut path = vec![s];
        let mut cursor = vec![0usize];
        on_path[s] = true;
        while let Some(&v) = path.last() {
            if budget == 0 || cycles.len() >= MAX_REPORTED_CYCLES {
                return cycles;
            }
            budget -= 1;
            let i = cursor.last_mut().expect("cursor tracks path");
            if let Some(&w) = succ[v].get(*i) {
                *i += 1;
                if w == s {
                    cycles.push(path.clone());
                } else if w > s && !on_path[w] {
                    on_path[w] = true;
                    path.push(w);
                    cursor.push(0);
                }
            } else {
                on_path[v] = false;
                path.pop();
                cursor.pop();
            }
        }
    }
    cycles
}

fn rotate_to_min(mut cycle: Vec<usize>) -> Vec<usize> {
    if let Some(i) = cycle.iter().enumerate().min_by_key(|(_, &d)| d).map(|(i, _)| i) {
        cycle.rotate_left(i);
    }
    cycle
}
