//! Experiment harness for the `exprb` integrators: fixed-step convergence
//! tables, adaptive tolerance sweeps, step-size traces, reference caching and
//! self-tests.

pub mod cache;
pub mod compare;
pub mod experiment;
pub mod report;
pub mod selftest;

use std::path::PathBuf;

use exprb::problems::ProblemId;
use thiserror::Error;

pub use cache::{ReferenceCache, ReferenceFile};
pub use experiment::{
    build_reference, run_adaptive_sweep, run_convergence, run_trace, ConvergenceRow, ConvergenceTable, ExperimentSpec,
    Mode, SweepRow, SweepTable,
};
pub use selftest::{run_selftests, SelfTestReport};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(
        "no cached reference for {problem} in {dir}; build one first with \
         `exprb-bench build-reference --problem {problem} --cache-dir {dir}`",
        dir = .dir.display()
    )]
    MissingReference { problem: ProblemId, dir: PathBuf },
    #[error("corrupt reference file {path}: {reason}", path = .path.display())]
    CorruptReference { path: PathBuf, reason: String },
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    NoSuccessfulRun(String),
    #[error(transparent)]
    Integration(#[from] exprb::stepcontrol::IntegrationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
