//! CSV records and their frozen schemas.
//!
//! Timing columns (`seconds`) are the only ones allowed to differ between
//! two runs with the same configuration.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One proximal evaluation of the timing study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxTimingRow {
    pub n: usize,
    pub k: usize,
    pub rep: usize,
    pub seconds: f64,
    pub inner_iters: usize,
    pub residual: f64,
    pub status: String,
}

/// One accepted iteration of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRow {
    pub experiment: String,
    /// Bandwidth, block count, size or conditioning ratio of the instance.
    pub setting: f64,
    pub memory: usize,
    pub iter: usize,
    pub seconds: f64,
    pub objective: f64,
    /// `‖x − x*‖∞` for known-solution problems, the optimality residual for
    /// logistic regression.
    pub error_or_residual: f64,
    pub inner_iters: usize,
    pub shift: f64,
}

/// One solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub setting: f64,
    pub memory: usize,
    pub status: String,
    pub iterations: usize,
    /// First iteration whose error (or residual) is at most the target.
    pub first_below_target: Option<usize>,
    pub final_value: f64,
    /// Observed convergence; conditioning runs only.
    pub oc: Option<f64>,
    pub rejected: usize,
    pub seconds: f64,
}

pub const PROX_TIMING_SCHEMA: &[&str] = &["n", "k", "rep", "seconds", "inner_iters", "residual", "status"];
pub const SOLVER_SCHEMA: &[&str] = &[
    "experiment",
    "setting",
    "memory",
    "iter",
    "seconds",
    "objective",
    "error_or_residual",
    "inner_iters",
    "shift",
];
pub const SUMMARY_SCHEMA: &[&str] = &[
    "experiment",
    "setting",
    "memory",
    "status",
    "iterations",
    "first_below_target",
    "final_value",
    "oc",
    "rejected",
    "seconds",
];

/// Destination for rows as they are produced.
pub trait Sink<R> {
    fn push(&mut self, row: R) -> Result<(), CliError>;
}

impl<R> Sink<R> for Vec<R> {
    fn push(&mut self, row: R) -> Result<(), CliError> {
        Vec::push(self, row);
        Ok(())
    }
}

/// Streams rows into a CSV writer, one flush per row.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl CsvSink<File> {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self::new(File::create(path)?))
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W) -> Self {
        Self {
            writer: csv::Writer::from_writer(w),
        }
    }

    pub fn into_inner(self) -> Result<W, CliError> {
        self.writer
            .into_inner()
            .map_err(|e| CliError::Io(e.into_error()))
    }
}

impl<W: Write, R: Serialize> Sink<R> for CsvSink<W> {
    fn push(&mut self, row: R) -> Result<(), CliError> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Writes `rows` to `path` with a header.
pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let mut sink = CsvSink::create(path)?;
    for r in rows {
        sink.push(r)?;
    }
    Ok(())
}

/// Checks that the header equals `schema` and every row parses as `R`.
/// Returns the rows.
pub fn read_validated<R: DeserializeOwned>(
    reader: impl std::io::Read,
    schema: &[&str],
) -> Result<Vec<R>, CliError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != schema {
        return Err(CliError::Schema(format!(
            "header {header:?} does not match {schema:?}"
        )));
    }
    rdr.deserialize()
        .map(|r| r.map_err(CliError::from))
        .collect()
}

/// [`read_validated`] on a file.
pub fn validate_file<R: DeserializeOwned>(path: &Path, schema: &[&str]) -> Result<Vec<R>, CliError> {
    read_validated(File::open(path)?, schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_of<R: Serialize>(row: R) -> Vec<String> {
        let mut sink = CsvSink::new(Vec::new());
        sink.push(row).unwrap();
        let text = String::from_utf8(sink.into_inner().unwrap()).unwrap();
        text.lines().next().unwrap().split(',').map(str::to_string).collect()
    }

    #[test]
    fn schemas_match_serialized_headers() {
        let t = ProxTimingRow {
            n: 1,
            k: 1,
            rep: 0,
            seconds: 0.0,
            inner_iters: 0,
            residual: 0.0,
            status: "Optimal".into(),
        };
        assert_eq!(header_of(t), PROX_TIMING_SCHEMA);
        let s = SolverRow {
            experiment: "lsq-l1".into(),
            setting: 1.0,
            memory: 0,
            iter: 0,
            seconds: 0.0,
            objective: 0.0,
            error_or_residual: 0.0,
            inner_iters: 0,
            shift: 0.0,
        };
        assert_eq!(header_of(s), SOLVER_SCHEMA);
        let r = RunSummary {
            experiment: "lsq-l1".into(),
            setting: 1.0,
            memory: 0,
            status: "Optimal".into(),
            iterations: 3,
            first_below_target: None,
            final_value: 0.0,
            oc: Some(1.5),
            rejected: 0,
            seconds: 0.0,
        };
        assert_eq!(header_of(r), SUMMARY_SCHEMA);
    }

    #[test]
    fn round_trip_and_header_mismatch() {
        let rows = vec![
            RunSummary {
                experiment: "conditioning".into(),
                setting: 10.0,
                memory: 10,
                status: "Stopped".into(),
                iterations: 12,
                first_below_target: Some(11),
                final_value: 1e-9,
                oc: Some(7.25),
                rejected: 1,
                seconds: 0.5,
            },
            RunSummary {
                experiment: "conditioning".into(),
                setting: 10.0,
                memory: 0,
                status: "IterationLimit".into(),
                iterations: 1000,
                first_below_target: None,
                final_value: 1e-3,
                oc: None,
                rejected: 0,
                seconds: 0.1,
            },
        ];
        let mut sink = CsvSink::new(Vec::new());
        for r in &rows {
            sink.push(r).unwrap();
        }
        let bytes = sink.into_inner().unwrap();
        let back: Vec<RunSummary> = read_validated(bytes.as_slice(), SUMMARY_SCHEMA).unwrap();
        assert_eq!(back, rows);
        let err = read_validated::<RunSummary>(bytes.as_slice(), SOLVER_SCHEMA);
        assert!(matches!(err, Err(CliError::Schema(_))));
    }
}
