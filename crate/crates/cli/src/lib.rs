//! Run orchestration for the surfactant free-surface solver: configuration,
//! the simulation loop, output files and the verification suites.

pub mod config;
pub mod dump;
pub mod run;
pub mod theta;
pub mod verify;

pub use config::{ConfigError, RunConfig};
pub use dump::StateDump;
pub use run::{simulate, RunError, RunOutput, Summary};
pub use verify::{Row, Suite};
