//! Permissive multi-strategy synthesis for MDPs under interval preference
//! weights.
//!
//! The crate covers explicit MDP models, preference elicitation and
//! aggregation, multi-objective value computation, a small MILP solver, the
//! synthesis encoding itself, and a gridworld front end.

pub mod analysis;
pub mod error;
pub mod fixtures;
pub mod gridworld;
pub mod io;
pub mod mdp;
pub mod milp;
pub mod preferences;
pub mod synthesis;

pub use error::{Error, Result};
