//! Rate-distortion functions of discrete memoryless sources.
//!
//! The main solver ([`solve_as`]) treats the test channel as an entropic
//! transport plan between the source distribution and a free output
//! marginal and alternates Sinkhorn scaling with scalar Newton solves for the
//! distortion slope and the output normalization. It takes the distortion
//! target directly. A Blahut-Arimoto baseline ([`ba_fixed_slope`],
//! [`ba_search_slope`]) and closed-form oracles for the binary, Gaussian and
//! Laplacian benchmarks are included for comparison.

pub mod alternating;
pub mod blahut;
pub mod diagnostics;
pub mod error;
pub mod problem;
mod root;
pub mod sources;

pub use alternating::{solve_as, AsOptions, SolverState};
pub use blahut::{ba_fixed_slope, ba_search_slope, BaOptions, BaSearch, BaSolution};
pub use diagnostics::{detect_linear_segment, kkt_residuals, CurvePoint, RdCurve, ResidualRecord};
pub use error::{RdError, Result};
pub use problem::{ConditionalLaw, RdProblem, RdSolution};
