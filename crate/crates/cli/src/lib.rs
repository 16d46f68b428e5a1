//! Experiment driver for the `qsprox` library: proximal-map timing,
//! least-squares problems with known solutions, a conditioning study and
//! sparse logistic regression. Results are written as CSV.

pub mod config;
pub mod logreg;
pub mod output;
pub mod regression;
pub mod timing;

use qsprox::linops::LinopsError;
use qsprox::pqn::PqnError;
use qsprox::problems::ProblemError;
use qsprox::proxeval::ProxError;
use qsprox::qscalc::QsError;
use thiserror::Error;

pub use config::{Args, Experiment, ExperimentConfig};
pub use output::{ProxTimingRow, RunSummary, SolverRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("csv schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] PqnError),
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error(transparent)]
    Qs(#[from] QsError),
    #[error(transparent)]
    Linops(#[from] LinopsError),
}

impl CliError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Schema(_) => "schema",
            CliError::Io(_) => "io",
            CliError::Csv(_) => "csv",
            CliError::Problem(_) => "problem",
            CliError::Solver(_) => "solver",
            CliError::Prox(_) => "prox",
            CliError::Qs(_) => "qs",
            CliError::Linops(_) => "linops",
        }
    }
}

/// Runs the configured experiment, writing `cfg.out` (and, for solver
/// experiments, the summary next to it). Returns the run summaries.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>, CliError> {
    match cfg.experiment {
        Experiment::ProxTiming => {
            let mut sink = output::CsvSink::create(&cfg.out)?;
            timing::run_prox_timing(cfg, &mut sink)?;
            Ok(Vec::new())
        }
        exp => {
            let mut sink = output::CsvSink::create(&cfg.out)?;
            let runs = if exp == Experiment::Logreg {
                logreg::run_logreg(cfg, &mut sink)?
            } else {
                regression::run_regression_suite(cfg, &mut sink)?
            };
            output::write_csv(&cfg.summary_path(), &runs)?;
            if exp == Experiment::LsqL1 {
                for (setting, memory) in regression::ordering_violations(&runs) {
                    log::warn!("p = {setting}: memory {memory} needed more iterations than memory 0");
                }
            }
            Ok(runs)
        }
    }
}
