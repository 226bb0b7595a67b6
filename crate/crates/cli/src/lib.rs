//! Experiment-runner library behind the `heavyball` binary: run
//! configuration, check orchestration, and the benchmark reproduction
//! pipelines.

pub mod config;
pub mod repro;
pub mod runner;
