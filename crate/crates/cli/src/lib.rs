//! Command-line pipeline: CSV ingestion, run configuration, artifact
//! writing and the `sqrl` subcommands.

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod synth;
pub mod task;
