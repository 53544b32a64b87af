//! Prioritised start-delay scheduling for drone flock formation.
//!
//! Every drone flies a fixed straight line from its start to its target.
//! Collisions are avoided only by choosing the order in which drones depart
//! and how long each waits before departing:
//!
//! 1. [`collision`] classifies every pair of paths and builds the CL matrix.
//! 2. [`priority`] orders the drones so every hard constraint is respected.
//! 3. [`delay`] assigns each drone, in priority order, the smallest start
//!    delay that keeps it clear of all drones already scheduled.
//! 4. [`verify`] independently re-checks the schedule and measures it.
//!
//! [`scenario`] generates random flocks and [`campaign`] runs Monte Carlo
//! batches over them.

pub mod campaign;
pub mod collision;
pub mod delay;
pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod priority;
pub mod scenario;
pub mod verify;

pub use collision::{build_tables, CollisionTables, Configuration, SafetyParams};
pub use delay::{schedule_all, Schedule, SearchParams};
pub use error::{Error, Result};
pub use geometry::{closest_approach, PairGeometry};
pub use kinematics::{DelayedTrajectory, DronePath, KinematicLimits, VelocityProfile};
pub use priority::{compute_priority, detect_cycle, PriorityVector};
pub use scenario::{generate, Scenario, ScenarioConfig};
pub use verify::{verify, RunMetrics, VerifyReport};
