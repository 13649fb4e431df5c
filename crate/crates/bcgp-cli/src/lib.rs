//! Library surface of the command-line front end, exposed so integration
//! tests can drive the full workflows in-process.

pub mod config;
pub mod error;
pub mod init;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
