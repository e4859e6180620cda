//! Depth-first task execution with multi-level backtracking.
//!
//! A task is modeled as a walk over a search tree of environment states.
//! A planner proposes subtasks, an executor grounds them into actions, and a
//! tracker marks progress and decides when the current branch is dead. When
//! it is, the agent climbs back to the nearest ancestor that still has an
//! untried action, records the abandoned branch, and replans.
//!
//! The environments are deterministic synthetic page graphs ([`sim_env`]);
//! [`harness`] runs suites of them and computes backtracking metrics.

pub mod dfs;
pub mod harness;
pub mod orchestrator;
pub mod plan;
pub mod policy;
pub mod sim_env;
pub mod state_space;
pub mod status;
