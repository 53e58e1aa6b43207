//! Command-line front end for the `homext` library.

pub mod config;
pub mod run;

pub use config::{Cli, Command, RunConfig, ValidatedConfig};
pub use run::{run, Outcome};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const RUNTIME_ERROR: i32 = 1;
    pub const VALIDATION_ERROR: i32 = 2;
    pub const PROPERTY_FAILURE: i32 = 3;
}
