//! Experiment driver for the primal-dual Newton CG solver: configuration,
//! PGM images and the `solve`, `spectrum`, `sweep` and `ablation` studies.

pub mod config;
pub mod experiment;
pub mod pgm;

pub use config::{ConfigError, ExperimentConfig, ProblemKind};
pub use experiment::{run_ablation, run_solve, run_spectrum, run_sweep, SolveSummary};
