//! Benchmark cases, convergence studies and audits.

pub mod cases;
pub mod config;
pub mod convergence;
pub mod run;

pub use config::{CaseConfig, CaseId, ThetaChoice};
pub use convergence::{run_convergence, ConvergenceRow};
pub use run::{check_audit, run_case, RunOptions, RunOutcome};
