//! Sparse logistic regression, `(1/N) Σ log(1 + exp(a_iᵀx)) + λ‖x‖₁`.

use std::fs::File;
use std::io::BufReader;
use std::ops::ControlFlow;
use std::time::Instant;

use qsprox::pqn::{solve_with_callback, PqnConfig};
use qsprox::problems::{read_dense_matrix, synthetic_logistic, LogisticLoss};
use qsprox::qscalc::build_l1;

use crate::config::ExperimentConfig;
use crate::output::{RunSummary, Sink, SolverRow};
use crate::regression::status_name;
use crate::CliError;

/// The loss from `cfg.data`, or synthetic data with `cfg.obs` rows,
/// `cfg.n[0]` features and a planted support of `cfg.p[0]`.
pub fn load_problem(cfg: &ExperimentConfig) -> Result<LogisticLoss, CliError> {
    match &cfg.data {
        Some(path) => {
            let rows = read_dense_matrix(BufReader::new(File::open(path)?))?;
            Ok(LogisticLoss::new(rows)?)
        }
        None => Ok(synthetic_logistic(cfg.obs, cfg.n[0], cfg.p[0], cfg.seed)?),
    }
}

/// Runs every memory from `x = 0`. The logged value is the optimality
/// residual `‖x − prox_g(x − ∇f(x))‖∞`.
pub fn run_logreg(cfg: &ExperimentConfig, sink: &mut dyn Sink<SolverRow>) -> Result<Vec<RunSummary>, CliError> {
    let f = load_problem(cfg)?;
    let n = f.rows().ncols();
    let g = build_l1(n)?.scaled(cfg.lambda)?;
    let mut summaries = Vec::new();
    for &memory in &cfg.memory {
        let pqn = PqnConfig {
            memory,
            kappa: cfg.kappa,
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            ..PqnConfig::default()
        };
        let mut sink_err = None;
        let start = Instant::now();
        let res = solve_with_callback(&f, &g, &vec![0.0; n], &pqn, &mut |rec, _| {
            let row = SolverRow {
                experiment: cfg.experiment.name().into(),
                setting: f.observations() as f64,
                memory,
                iter: rec.k,
                seconds: rec.elapsed,
                objective: rec.objective,
                error_or_residual: rec.residual,
                inner_iters: rec.inner_iterations,
                shift: rec.shift,
            };
            match sink.push(row) {
                Ok(()) => ControlFlow::Continue(()),
                Err(e) => {
                    sink_err = Some(e);
                    ControlFlow::Break(())
                }
            }
        });
        if let Some(e) = sink_err {
            return Err(e);
        }
        let r = res?;
        let residuals: Vec<f64> = r.log.records.iter().map(|rec| rec.residual).collect();
        summaries.push(RunSummary {
            experiment: cfg.experiment.name().into(),
            setting: f.observations() as f64,
            memory,
            status: status_name(r.status).into(),
            iterations: r.log.records.len() - 1,
            first_below_target: residuals.iter().position(|&v| v <= cfg.tol),
            final_value: *residuals.last().expect("iteration 0 is always logged"),
            oc: None,
            rejected: r.log.rejected,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;
    use std::io::Write;

    #[test]
    fn data_file_is_used() {
        let dir = std::env::temp_dir().join(format!("qsprox-logreg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rows.txt");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "# two features").unwrap();
        writeln!(f, "1 0.5\n-0.5 1\n0.25 -1").unwrap();
        let mut cfg = ExperimentConfig::defaults(Experiment::Logreg, false);
        cfg.data = Some(path.clone());
        let p = load_problem(&cfg).unwrap();
        assert_eq!((p.observations(), p.rows().ncols()), (3, 2));
        std::fs::write(&path, "1 2\n3\n").unwrap();
        assert!(matches!(load_problem(&cfg), Err(CliError::Problem(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn large_lambda_stops_at_zero() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Logreg, false);
        cfg.obs = 200;
        cfg.n = vec![10];
        cfg.p = vec![3];
        let f = load_problem(&cfg).unwrap();
        let g0 = qsprox::problems::SmoothProblem::gradient(&f, &[0.0; 10]);
        cfg.lambda = 1.01 * g0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut rows = Vec::new();
        let runs = run_logreg(&cfg, &mut rows).unwrap();
        for r in &runs {
            assert!(r.iterations <= 1, "memory {}: {} iterations", r.memory, r.iterations);
            assert_eq!(r.status, "Optimal");
        }
    }
}
