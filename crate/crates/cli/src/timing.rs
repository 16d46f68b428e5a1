//! Time to evaluate `prox_H ‖·‖₁(z)` with `H = I + UUᵀ`, `U` of rank `k`.

use std::time::Instant;

use nalgebra::DMatrix;
use qsprox::linops::{Dplr, Metric};
use qsprox::proxeval::{prox_with, ProxOptions, ProxResult};
use qsprox::qscalc::{build_l1, SolveStrategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ExperimentConfig;
use crate::output::{ProxTimingRow, Sink};
use crate::CliError;

/// A random instance: the metric `I + UUᵀ` and the point `z`, both drawn
/// standard normal.
pub fn draw_instance(n: usize, k: usize, rng: &mut impl Rng) -> Result<(Metric, Vec<f64>), CliError> {
    let u = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let z = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let h = Metric::from_direct(Dplr::new(vec![1.0; n], u, DMatrix::identity(k, k))?)?;
    Ok((h, z))
}

/// Evaluates the prox on one instance with an optional strategy override.
pub fn prox_l1(h: &Metric, z: &[f64], tol: f64, strategy: Option<SolveStrategy>) -> Result<ProxResult, CliError> {
    let g = build_l1(z.len())?;
    let opts = ProxOptions {
        tol,
        strategy,
        ..ProxOptions::default()
    };
    Ok(prox_with(&g, h, z, &opts)?)
}

/// Runs every `(n, k, rep)` cell. A failed evaluation becomes a row with its
/// status; the study continues.
pub fn run_prox_timing(cfg: &ExperimentConfig, sink: &mut dyn Sink<ProxTimingRow>) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for &n in &cfg.n {
        for &k in &cfg.memory {
            for rep in 0..cfg.repetitions {
                let (h, z) = draw_instance(n, k, &mut rng)?;
                let start = Instant::now();
                let res = prox_l1(&h, &z, cfg.tol, None);
                let seconds = start.elapsed().as_secs_f64();
                let row = match res {
                    Ok(r) => ProxTimingRow {
                        n,
                        k,
                        rep,
                        seconds,
                        inner_iters: r.inner_iterations,
                        residual: r.residual,
                        status: format!("{:?}", r.status),
                    },
                    Err(e) => {
                        log::warn!("n={n} k={k} rep={rep}: {e}");
                        ProxTimingRow {
                            n,
                            k,
                            rep,
                            seconds,
                            inner_iters: 0,
                            residual: f64::NAN,
                            status: format!("error: {e}"),
                        }
                    }
                };
                sink.push(row)?;
            }
        }
    }
    Ok(())
}

/// Median of the `seconds` column over the rows with the given `n` and `k`.
pub fn median_seconds(rows: &[ProxTimingRow], n: usize, k: usize) -> Option<f64> {
    let mut t: Vec<f64> = rows
        .iter()
        .filter(|r| r.n == n && r.k == k)
        .map(|r| r.seconds)
        .collect();
    if t.is_empty() {
        return None;
    }
    t.sort_by(f64::total_cmp);
    let m = t.len() / 2;
    Some(if t.len() % 2 == 1 { t[m] } else { 0.5 * (t[m - 1] + t[m]) })
}
