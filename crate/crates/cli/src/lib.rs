pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Args, RunConfig};
pub use error::CliError;
