//! Experiment harness for the optimizers in `came_core`: seeded training
//! runs, multi-seed comparisons, gradient checks and memory reports.

pub mod checks;
pub mod compare;
pub mod config;
pub mod error;
pub mod runner;

pub use checks::{grad_check, memory};
pub use compare::{compare, Comparison};
pub use config::{parse_seeds, ProblemKind, ProblemSpec, RunConfig};
pub use error::{BenchError, Result};
pub use runner::{run, train, write_outputs, RunOutput, RunSummary, TrainTrace};
