//! Command-line driver for `arcutoff-core`: configuration files, the
//! subcommands and their CSV, JSON and SVG outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;
