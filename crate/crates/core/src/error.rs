use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("drone {drone} has a zero-length path")]
    DegeneratePath { drone: usize },

    /// One drone's whole path lies inside the other's collision corridor.
    #[error("drones {p} and {q} cannot be separated by start delays (path of {p} lies entirely within the collision threshold of {q})")]
    InfeasiblePair { p: usize, q: usize },

    #[error("circular hard-constraint dependency: {}", format_cycles(.cycles))]
    CycleDetected { cycles: Vec<Vec<usize>> },

    #[error("no collision-free start delay found for drone {lower} against drone {higher} within the expanded search bound")]
    BlockedPair { higher: usize, lower: usize },

    /// A delay computation failed part-way; `partial_delays` holds the drones already scheduled.
    #[error("scheduling stopped after {} drones: {source}", .partial_delays.iter().filter(|d| d.is_some()).count())]
    Scheduling {
        #[source]
        source: Box<Error>,
        partial_delays: Vec<Option<f64>>,
    },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("placed {placed} of {requested} positions before giving up (grid fill ratio {fill_ratio:.3})")]
    Generation {
        placed: usize,
        requested: usize,
        fill_ratio: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_cycles(cycles: &[Vec<usize>]) -> String {
    cycles
        .iter()
        .map(|c| {
            let mut s: Vec<String> = c.iter().map(|d| d.to_string()).collect();
            if let Some(first) = c.first() {
                s.push(first.to_string());
            }
            s.join(" -> ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}
