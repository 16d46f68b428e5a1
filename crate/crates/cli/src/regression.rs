//! Least-squares experiments with planted solutions: 1-norm over banded
//! matrices, group lasso, total variation, and the conditioning study.

use std::ops::ControlFlow;
use std::time::Instant;

use qsprox::linops::StructuredMatrix;
use qsprox::pqn::{solve_with_callback, PqnConfig, PqnStatus};
use qsprox::problems::{gen_banded, gen_conditioned, observed_convergence, KnownSolution, RegKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{RunSummary, Sink, SolverRow};
use crate::CliError;

/// Error level reported as `first_below_target` for least-squares runs.
pub const TARGET_ERROR: f64 = 1e-6;
/// Error at which a conditioning run stops.
pub const CONDITIONING_STOP: f64 = 1e-8;
/// Residual tolerance of conditioning runs; low enough that the error test
/// stops them first.
const CONDITIONING_TOL: f64 = 1e-14;
/// Scale of the conditioning study's planted solutions, which keeps
/// `‖x₀ − x*‖∞ < 1` so every logged error has a negative logarithm.
const CONDITIONING_SCALE: f64 = 0.5;

/// One instance of the suite together with the label of its setting.
pub struct Setting {
    pub value: f64,
    pub instance: KnownSolution,
}

/// The instances `cfg` describes, in the order they are run.
pub fn settings(cfg: &ExperimentConfig) -> Result<Vec<Setting>, CliError> {
    let n = cfg.n[0];
    let lower = || -> Result<StructuredMatrix, CliError> { Ok(StructuredMatrix::Sparse(gen_banded(n, n)?)) };
    let planted = |kind: &RegKind| kind.planted_solution(n, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut out = Vec::new();
    match cfg.experiment {
        Experiment::LsqL1 => {
            for &p in &cfg.p {
                let a = StructuredMatrix::Sparse(gen_banded(n, p)?);
                let x = planted(&RegKind::L1);
                out.push(Setting {
                    value: p as f64,
                    instance: KnownSolution::new(a, RegKind::L1, cfg.lambda, x)?,
                });
            }
        }
        Experiment::LsqGroup => {
            let blocks = cfg.p[0];
            let sizes: Vec<usize> = (0..blocks).map(|b| n / blocks + usize::from(b < n % blocks)).collect();
            let kind = RegKind::GroupL2 { sizes };
            let x = planted(&kind);
            out.push(Setting {
                value: blocks as f64,
                instance: KnownSolution::new(lower()?, kind, cfg.lambda, x)?,
            });
        }
        Experiment::LsqTv => {
            let x = planted(&RegKind::Tv1d);
            out.push(Setting {
                value: n as f64,
                instance: KnownSolution::new(lower()?, RegKind::Tv1d, cfg.lambda, x)?,
            });
        }
        Experiment::Conditioning => {
            for &ratio in &cfg.ratios {
                let a = StructuredMatrix::Sparse(gen_conditioned(n, ratio, 1.0)?);
                let x = planted(&RegKind::L1).iter().map(|v| CONDITIONING_SCALE * v).collect();
                out.push(Setting {
                    value: ratio,
                    instance: KnownSolution::new(a, RegKind::L1, cfg.lambda, x)?,
                });
            }
        }
        Experiment::ProxTiming | Experiment::Logreg => {
            return Err(CliError::Config(format!(
                "{} is not a least-squares experiment",
                cfg.experiment.name()
            )))
        }
    }
    Ok(out)
}

/// Runs every memory on every setting from `x = 0`, streaming per-iteration
/// rows. A solver error ends that run only and is recorded in its summary.
pub fn run_regression_suite(
    cfg: &ExperimentConfig,
    sink: &mut dyn Sink<SolverRow>,
) -> Result<Vec<RunSummary>, CliError> {
    let conditioning = cfg.experiment == Experiment::Conditioning;
    let mut summaries = Vec::new();
    for setting in settings(cfg)? {
        let ks = &setting.instance;
        let n = ks.x_star.len();
        for &memory in &cfg.memory {
            let pqn = PqnConfig {
                memory,
                kappa: cfg.kappa,
                tol: if conditioning { CONDITIONING_TOL } else { cfg.tol },
                max_iter: cfg.max_iter,
                ..PqnConfig::default()
            };
            let mut errors = Vec::new();
            let mut sink_err = None;
            let start = Instant::now();
            let res = solve_with_callback(&ks.problem, &ks.g, &vec![0.0; n], &pqn, &mut |rec, x| {
                let e = ks.error(x);
                errors.push(e);
                let row = SolverRow {
                    experiment: cfg.experiment.name().into(),
                    setting: setting.value,
                    memory,
                    iter: rec.k,
                    seconds: rec.elapsed,
                    objective: rec.objective,
                    error_or_residual: e,
                    inner_iters: rec.inner_iterations,
                    shift: rec.shift,
                };
                if let Err(err) = sink.push(row) {
                    sink_err = Some(err);
                    return ControlFlow::Break(());
                }
                if conditioning && e <= CONDITIONING_STOP {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            if let Some(e) = sink_err {
                return Err(e);
            }
            let seconds = start.elapsed().as_secs_f64();
            let target = if conditioning { CONDITIONING_STOP } else { TARGET_ERROR };
            let summary = match res {
                Ok(r) => RunSummary {
                    experiment: cfg.experiment.name().into(),
                    setting: setting.value,
                    memory,
                    status: status_name(r.status).into(),
                    iterations: r.log.records.len() - 1,
                    first_below_target: errors.iter().position(|&e| e <= target),
                    final_value: ks.error(&r.x),
                    oc: if conditioning { observed_convergence(&errors).ok() } else { None },
                    rejected: r.log.rejected,
                    seconds,
                },
                Err(e) => {
                    log::warn!("{} setting {} memory {memory}: {e}", cfg.experiment.name(), setting.value);
                    RunSummary {
                        experiment: cfg.experiment.name().into(),
                        setting: setting.value,
                        memory,
                        status: format!("error: {e}"),
                        iterations: errors.len().saturating_sub(1),
                        first_below_target: errors.iter().position(|&e| e <= target),
                        final_value: errors.last().copied().unwrap_or(f64::NAN),
                        oc: None,
                        rejected: 0,
                        seconds,
                    }
                }
            };
            summaries.push(summary);
        }
    }
    Ok(summaries)
}

pub fn status_name(s: PqnStatus) -> &'static str {
    match s {
        PqnStatus::Optimal => "Optimal",
        PqnStatus::IterationLimit => "IterationLimit",
        PqnStatus::StepFailure => "StepFailure",
        PqnStatus::Stopped => "Stopped",
    }
}

/// Iterations a run needed to reach its target; runs that never did count
/// as one more than their length.
pub fn iterations_to_target(run: &RunSummary) -> usize {
    run.first_below_target.unwrap_or(run.iterations + 1)
}

/// Settings on which some positive memory needed more iterations than
/// memory 0. Settings without a memory-0 run are skipped.
pub fn ordering_violations(runs: &[RunSummary]) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for base in runs.iter().filter(|r| r.memory == 0) {
        for r in runs.iter().filter(|r| r.setting == base.setting && r.memory > 0) {
            if iterations_to_target(r) > iterations_to_target(base) {
                out.push((r.setting, r.memory));
            }
        }
    }
    out
}

/// `OC(mem)/OC(0)` for every setting with both runs.
pub fn oc_ratios(runs: &[RunSummary], memory: usize) -> Vec<(f64, Option<f64>)> {
    runs.iter()
        .filter(|r| r.memory == 0)
        .filter_map(|base| {
            let r = runs.iter().find(|r| r.setting == base.setting && r.memory == memory)?;
            Some((base.setting, r.oc.zip(base.oc).map(|(a, b)| a / b)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(setting: f64, memory: usize, first: Option<usize>, iterations: usize) -> RunSummary {
        RunSummary {
            experiment: "lsq-l1".into(),
            setting,
            memory,
            status: "Optimal".into(),
            iterations,
            first_below_target: first,
            final_value: 0.0,
            oc: None,
            rejected: 0,
            seconds: 0.0,
        }
    }

    #[test]
    fn ordering_uses_first_hit_and_penalizes_misses() {
        let runs = vec![
            summary(1.0, 0, None, 100),
            summary(1.0, 10, Some(50), 60),
            summary(2.0, 0, Some(30), 40),
            summary(2.0, 10, Some(31), 35),
            summary(3.0, 10, None, 10),
        ];
        assert_eq!(ordering_violations(&runs), vec![(2.0, 10)]);
        assert_eq!(iterations_to_target(&runs[0]), 101);
    }

    #[test]
    fn settings_follow_config() {
        let mut cfg = ExperimentConfig::defaults(Experiment::LsqGroup, false);
        cfg.n = vec![12];
        let s = settings(&cfg).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].instance.kind, RegKind::GroupL2 { sizes: vec![3, 3, 2, 2, 2] });
        let mut cfg = ExperimentConfig::defaults(Experiment::Conditioning, false);
        cfg.n = vec![10];
        let s = settings(&cfg).unwrap();
        assert_eq!(s.iter().map(|s| s.value).collect::<Vec<_>>(), vec![0.0, 1.0, 10.0, 100.0]);
        assert!(s.iter().all(|s| s.instance.x_star.iter().all(|v| v.abs() < 1.0)));
    }

    #[test]
    fn identity_conditioning_converges_immediately() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Conditioning, false);
        cfg.n = vec![100];
        cfg.ratios = vec![0.0];
        let mut rows = Vec::new();
        let runs = run_regression_suite(&cfg, &mut rows).unwrap();
        assert_eq!(runs.len(), 4);
        for r in &runs {
            assert!(r.iterations <= 3, "memory {} took {}", r.memory, r.iterations);
        }
    }
}
