//! Command-line front end: configuration parsing, execution and result records.

pub mod config;
pub mod record;
pub mod run;
