//! Meta coordination graphs for cooperative multi-agent Q-learning.
//!
//! Typed interaction graphs are softly selected, composed into multi-hop
//! meta-paths and convolved into node representations, which feed a
//! coordination-graph factorization of the joint action value. Greedy joint
//! actions come from anytime max-sum message passing.

pub mod config;
pub mod coordination;
pub mod envs;
pub mod error;
pub mod graph;
pub mod mcg;
pub mod numerics;
pub mod runner;
pub mod training;
pub mod verify;

pub use error::{McgError, Result};
