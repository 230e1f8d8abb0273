//! Config-driven studies over the reference scenarios and their reports.

mod config;
mod report;
mod studies;

pub use config::{
    ConvergeSettings, OracleSettings, PrecondSettings, PreconditionerSettings, SolverSettings,
    StabilizationSettings, Study, StudyConfig, SweepSettings,
};
pub use report::{emit_report, render, ExperimentReport, Format, RunRecord, RunStatus, Value};
pub use studies::{
    fit_order, run_convergence, run_fracture, run_oracle, run_preconditioner_study, run_stability_sweep,
    run_study, solve_scenario, Method,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("configuration error in {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}
