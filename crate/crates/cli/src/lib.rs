//! Command implementations, run configurations and the benchmark harness behind the
//! `stabsel` binary.

pub mod benchmark;
pub mod commands;
pub mod config;
pub mod method;
