//! Benchmark harness: multi-trial planner comparisons, convergence studies
//! and single solves driven by JSON configs.

pub mod bench;
pub mod config;
pub mod converge;
pub mod error;
pub mod run;
pub mod solve;
pub mod stats;

pub use error::{BenchError, Result};
