//! Layout adaptation that infers objective priorities from a user's manual
//! widget moves and searches a priority-level Pareto front for the layout
//! closest to what the user demonstrated.
//!
//! The pipeline per iteration:
//!
//! 1. [`preference`] turns moves into per-objective deltas, smooths them with
//!    a triangular moving average and thresholds them into H/M/L groups.
//! 2. [`solver`] runs the priority-level NSGA-II over all widget positions.
//! 3. [`select`] picks the archive member nearest the user's reference point.
//!
//! [`session`] wires these together for the three study conditions and
//! [`harness`] drives sessions with simulated users.

pub mod error;
pub mod fixtures;
pub mod harness;
pub mod moo;
pub mod objectives;
pub mod preference;
pub mod priority;
pub mod scene;
pub mod seed;
pub mod select;
pub mod session;
pub mod solver;

pub use error::{Error, Result};
pub use objectives::{ObjectiveId, ObjectiveVector, K};
pub use priority::{PriorityAssignment, PriorityLevel};
pub use scene::{Layout, LayoutMap, Scene, Vec3};
pub use session::{Mode, Session};
pub use solver::{ParetoArchive, SolverConfig};
