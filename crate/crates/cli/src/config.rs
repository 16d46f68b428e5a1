use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Time the proximal map of the 1-norm under `H = I + UUᵀ`.
    ProxTiming,
    /// 1-norm least squares with banded matrices of varying coherence.
    LsqL1,
    /// Group-lasso least squares with equal blocks.
    LsqGroup,
    /// Anisotropic 1-D total-variation least squares.
    LsqTv,
    /// 1-norm least squares over a range of condition numbers.
    Conditioning,
    /// Sparse logistic regression.
    Logreg,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ProxTiming => "prox-timing",
            Experiment::LsqL1 => "lsq-l1",
            Experiment::LsqGroup => "lsq-group",
            Experiment::LsqTv => "lsq-tv",
            Experiment::Conditioning => "conditioning",
            Experiment::Logreg => "logreg",
        }
    }
}

/// Command-line arguments. Unset options take per-experiment defaults.
#[derive(Debug, Parser)]
#[command(name = "qsprox", version, about = "Experiments for scaled proximal operators and proximal L-BFGS")]
pub struct Args {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// Problem sizes (comma-separated). prox-timing sweeps all of them; the
    /// other experiments use the first.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// lsq-l1: bandwidths. lsq-group: number of blocks. logreg: support of
    /// the planted weights.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<usize>,
    /// L-BFGS memories; for prox-timing, the ranks k of U.
    #[arg(long, value_delimiter = ',')]
    pub mem: Vec<usize>,
    /// conditioning: the ratios α_L/α_μ.
    #[arg(long, value_delimiter = ',')]
    pub ratio: Vec<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub reps: Option<usize>,
    /// logreg: number of synthetic observations.
    #[arg(long)]
    pub obs: Option<usize>,
    /// logreg: whitespace-separated matrix of label-folded rows instead of
    /// synthetic data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Per-iteration CSV; solver experiments also write `<stem>.summary.csv`.
    /// Defaults to `<experiment>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the full-scale sizes (n = 2000, 100 repetitions).
    #[arg(long)]
    pub full_scale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub memory: Vec<usize>,
    pub ratios: Vec<f64>,
    pub kappa: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub lambda: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub obs: usize,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Desk-scale (or full-scale) defaults for `experiment`.
    pub fn defaults(experiment: Experiment, full_scale: bool) -> Self {
        let n = if full_scale { 2000 } else { 500 };
        let mut cfg = Self {
            experiment,
            n: vec![n],
            p: Vec::new(),
            memory: vec![0, 10],
            ratios: Vec::new(),
            kappa: 0.1,
            tol: 1e-8,
            max_iter: 1000,
            lambda: 1.0,
            seed: 0,
            repetitions: if full_scale { 100 } else { 10 },
            obs: 1000,
            data: None,
            out: PathBuf::from(format!("{}.csv", experiment.name())),
        };
        match experiment {
            Experiment::ProxTiming => {
                cfg.n = (10..=16).map(|e| 1usize << e).collect();
                cfg.memory = vec![1, 10];
                cfg.tol = 1e-7;
            }
            Experiment::LsqL1 => cfg.p = vec![n / 4, n / 2, n],
            Experiment::LsqGroup => cfg.p = vec![5],
            Experiment::LsqTv => {
                cfg.n = vec![if full_scale { 2000 } else { 200 }];
                cfg.memory = vec![0, 1, 10];
            }
            Experiment::Conditioning => {
                cfg.ratios = vec![0.0, 1.0, 10.0, 100.0];
                cfg.memory = vec![0, 1, 10, 100];
            }
            Experiment::Logreg => {
                cfg.n = vec![50];
                cfg.p = vec![5];
                cfg.tol = 1e-6;
                cfg.max_iter = 500;
                cfg.lambda = 0.01;
            }
        }
        cfg
    }

    pub fn from_args(args: Args) -> Result<Self, CliError> {
        let mut cfg = Self::defaults(args.experiment, args.full_scale);
        if !args.n.is_empty() {
            cfg.n = args.n;
            if args.experiment == Experiment::LsqL1 && args.p.is_empty() {
                let n = cfg.n[0];
                cfg.p = vec![n / 4, n / 2, n];
            }
        }
        if !args.p.is_empty() {
            cfg.p = args.p;
        }
        if !args.mem.is_empty() {
            cfg.memory = args.mem;
        }
        if !args.ratio.is_empty() {
            cfg.ratios = args.ratio;
        }
        cfg.kappa = args.kappa.unwrap_or(cfg.kappa);
        cfg.tol = args.tol.unwrap_or(cfg.tol);
        cfg.max_iter = args.max_iter.unwrap_or(cfg.max_iter);
        cfg.lambda = args.lambda.unwrap_or(cfg.lambda);
        cfg.seed = args.seed;
        cfg.repetitions = args.reps.unwrap_or(cfg.repetitions);
        cfg.obs = args.obs.unwrap_or(cfg.obs);
        cfg.data = args.data;
        if let Some(out) = args.out {
            cfg.out = out;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n.is_empty() || self.n.contains(&0) {
            return bad(format!("sizes {:?} must be positive", self.n));
        }
        if self.memory.is_empty() {
            return bad("at least one memory is required".into());
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa = {} must lie in (0, 1)", self.kappa));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be positive", self.lambda));
        }
        if self.repetitions == 0 {
            return bad("reps must be positive".into());
        }
        match self.experiment {
            Experiment::ProxTiming if self.memory.contains(&0) => {
                bad("prox-timing ranks must be positive".into())
            }
            Experiment::LsqL1 => match self.p.iter().find(|&&p| p == 0 || p > self.n[0]) {
                Some(p) => bad(format!("bandwidth {p} must lie in [1, {}]", self.n[0])),
                None => Ok(()),
            },
            Experiment::LsqGroup if self.p.len() != 1 || self.p[0] == 0 || self.p[0] > self.n[0] => {
                bad(format!("block count {:?} must be one value in [1, n]", self.p))
            }
            Experiment::LsqTv if self.n[0] < 2 => bad("lsq-tv needs n ≥ 2".into()),
            Experiment::Conditioning => {
                if self.n[0] % 2 != 0 {
                    return bad(format!("conditioning needs even n, got {}", self.n[0]));
                }
                match self.ratios.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
                    Some(r) => bad(format!("ratio {r} must be finite and nonnegative")),
                    None if self.ratios.is_empty() => bad("no ratios given".into()),
                    None => Ok(()),
                }
            }
            Experiment::Logreg if self.p.len() != 1 || self.p[0] > self.n[0] => {
                bad(format!("support {:?} must be one value ≤ n", self.p))
            }
            _ => Ok(()),
        }
    }

    /// Path of the per-run summary written next to `out`.
    pub fn summary_path(&self) -> PathBuf {
        let stem = self
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.experiment.name().to_string());
        self.out.with_file_name(format!("{stem}.summary.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<ExperimentConfig, CliError> {
        let mut full = vec!["qsprox"];
        full.extend_from_slice(args);
        ExperimentConfig::from_args(Args::try_parse_from(full).map_err(|e| CliError::Config(e.to_string()))?)
    }

    #[test]
    fn defaults_follow_experiment() {
        let c = parse(&["lsq-l1"]).unwrap();
        assert_eq!(c.n, vec![500]);
        assert_eq!(c.p, vec![125, 250, 500]);
        assert_eq!(c.memory, vec![0, 10]);
        let c = parse(&["lsq-l1", "--full-scale"]).unwrap();
        assert_eq!(c.p, vec![500, 1000, 2000]);
        let c = parse(&["prox-timing"]).unwrap();
        assert_eq!(c.n.len(), 7);
        assert_eq!(c.repetitions, 10);
        let c = parse(&["logreg"]).unwrap();
        assert_eq!(c.lambda, 0.01);
    }

    #[test]
    fn overrides_and_lists() {
        let c = parse(&["lsq-l1", "--n", "200", "--mem", "0,1,10", "--kappa", "0.5", "--out", "x/y.csv"]).unwrap();
        assert_eq!(c.p, vec![50, 100, 200]);
        assert_eq!(c.memory, vec![0, 1, 10]);
        assert_eq!(c.kappa, 0.5);
        assert_eq!(c.summary_path(), PathBuf::from("x/y.summary.csv"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse(&["lsq-l1", "--kappa", "1.5"]).is_err());
        assert!(parse(&["lsq-l1", "--n", "100", "--p", "200"]).is_err());
        assert!(parse(&["conditioning", "--n", "101"]).is_err());
        assert!(parse(&["prox-timing", "--mem", "0"]).is_err());
        assert!(parse(&["nonsense"]).is_err());
    }
}
