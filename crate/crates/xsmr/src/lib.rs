//! Simulator, property checkers and file formats for cross-chain state
//! machine replication.
//!
//! [`config`] reads scenario files, [`sim`] runs them deterministically over
//! a synchronous [`net`]work and writes a [`trace`], and [`check`] decides
//! the protocol's properties from a run or a trace. [`suite`] holds the
//! shipped scenarios.

pub mod check;
pub mod config;
pub mod net;
pub mod sim;
pub mod suite;
pub mod trace;

pub use config::{ConfigError, ScenarioConfig};
pub use sim::{run_scenario, RunResult};
