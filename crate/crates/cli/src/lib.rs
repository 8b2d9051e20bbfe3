//! Reproduction harness around the `ratedist` solvers: problem files,
//! curve sweeps, solver comparisons and residual traces, written as CSV or
//! JSON.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{
    benchmark_cases, cmd_compare, cmd_curve, cmd_residuals, cmd_solve, CompareCase, CompareConfig,
    CompareRow, CurveConfig, CurveRow, ResidualRow, SolveConfig, SolveReport, SolveRow,
    SolverSettings, Sweep,
};
pub use config::{fixtures, Grid, ProblemFile, SolverChoice, SourceParams, SourceSpec};
pub use error::{exit, CliError, Result};
pub use output::Format;
