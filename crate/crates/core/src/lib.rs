//! Model predictive trees: receding-horizon UCT search that carries the
//! chosen subtree from one step to the next, tracked by a Riccati-based
//! contracting feedback controller.
//!
//! The crate also ships the planar push-car task used to evaluate it and the
//! baseline planners it is compared against.

pub mod baselines;
pub mod control;
pub mod disturbance;
pub mod mdp;
pub mod planner;
pub mod pushcar;
pub mod runner;
pub mod tree;

pub use mdp::{Action, MdpError, MdpSpec, State};
pub use planner::{Plan, PlanError, Planner, SimRng};
pub use runner::{realized_value, run_episode, EpisodeRecord, EpisodeSettings, Environment};
pub use tree::{SearchParams, SearchTree, TreeError};
