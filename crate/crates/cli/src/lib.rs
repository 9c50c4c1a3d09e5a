//! Config-driven experiment runner around the `dsgm` library.

pub mod commands;
pub mod config;

pub use commands::{cmd_audit, cmd_montecarlo_rho, cmd_run, list_problems, Status};
pub use config::RunConfig;
