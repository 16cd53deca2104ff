//! Command-line front end: configuration loading, dispatch to the numerical
//! library, result records and sweep tables.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod record;
pub mod sweep;

pub use cli::{execute, main_with_args, Cli};
pub use error::RunError;
pub use record::ResultRecord;
