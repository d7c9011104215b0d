//! Configuration and experiment drivers behind the `elastobem` binary.

pub mod config;
pub mod runs;

pub use config::{ConfigError, FmmMode, Geometry, Levels, Method, RawConfig, RunConfig, Split};
pub use runs::{
    run_converge, run_fmm_compare, run_halfspace, run_mesh, solve_level, CompareRow, ConvergenceReport,
    HalfspaceProfile, LevelResult, COMPARE_HEADER, CONVERGE_HEADER, HALFSPACE_HEADER,
};
