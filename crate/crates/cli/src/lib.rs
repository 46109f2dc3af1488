//! The `safer` command-line tool.

pub mod cli;
pub mod config;
pub mod run;
