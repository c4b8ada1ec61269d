//! Configuration and orchestration behind the `seqemp` binary.

pub mod config;
pub mod run;

pub use run::{config_hash, run, RunOptions, SUBCOMMANDS};
