//! Near-optimal grid topology alternatives with ranking feedback.
//!
//! A mixed-integer DC-OPF with line switching and busbar splitting is solved
//! for its least-cost point, then re-solved under a cost budget with random
//! diversity weights to produce alternative topologies. A ranking of those
//! alternatives (from an operator or from an evaluation function) is encoded
//! into feedback weights that steer the next round.

pub mod cases;
pub mod dcpf;
pub mod error;
pub mod experiment;
pub mod evaluation;
pub mod hitl;
pub mod mga;
pub mod network;
pub mod reconfig;
pub mod solver;

pub use error::{Error, Result};
pub use network::{Network, Topology};
pub use reconfig::{Alternative, ReconfigModel, Solver, SwitchingOptions};
