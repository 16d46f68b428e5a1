//! Proximal L-BFGS for `min f(x) + g(x)` with smooth `f` and a QS function
//! `g`, without a linesearch.
//!
//! Each step minimizes the model `∇fᵀ(x⁺ − x) + ½‖x⁺ − x‖²_H + g(x⁺)`, i.e.
//! `x⁺ = prox_H g(x − H⁻¹∇f(x))`, with `H⁻¹` the compact L-BFGS inverse
//! Hessian. The interior solve for the proximal map is stopped at a
//! tolerance proportional to the current optimality residual. A step that
//! fails the sufficient-decrease test is first retried with a tighter
//! interior tolerance, then with `H + ρI` for growing `ρ`.

use std::collections::VecDeque;
use std::ops::ControlFlow;
use std::time::Instant;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linops::{Dplr, LinopsError, Metric};
use crate::problems::SmoothProblem;
use crate::proxeval::{has_unscaled_prox, prox_with, unscaled_prox, ProxError, ProxOptions};
use crate::qscalc::{QsError, QsFunction};
use crate::vecops::{dot, norm2};

/// Curvature threshold `sᵀy > ε‖s‖‖y‖` for storing a pair.
pub const CURVATURE_EPS: f64 = 1e-8;
/// Smallest interior tolerance requested from the proximal solve.
pub const INNER_TOL_FLOOR: f64 = 1e-10;
/// Largest interior tolerance requested from the proximal solve.
pub const INNER_TOL_CAP: f64 = 1e-4;
/// Interior tolerance of the first step when `g` has no closed-form prox.
pub const INNER_TOL_FALLBACK: f64 = 1e-8;
/// Largest identity shift before giving up.
pub const MAX_SHIFT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PqnError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error(transparent)]
    Qs(#[from] QsError),
    #[error(transparent)]
    Linops(#[from] LinopsError),
}

/// Limited-memory BFGS pairs and the initial scaling `H₀⁻¹ = σI`.
#[derive(Debug, Clone)]
pub struct LbfgsMemory {
    m: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
    sigma: f64,
    adaptive_sigma: bool,
    skipped: usize,
}

impl LbfgsMemory {
    pub fn new(m: usize, sigma: f64) -> Self {
        assert!(sigma > 0.0 && sigma.is_finite(), "σ must be positive");
        Self {
            m,
            pairs: VecDeque::new(),
            sigma,
            adaptive_sigma: true,
            skipped: 0,
        }
    }

    /// Keeps `σ` fixed instead of the `sᵀy/yᵀy` update.
    pub fn with_fixed_sigma(mut self) -> Self {
        self.adaptive_sigma = false;
        self
    }

    pub fn capacity(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of pairs rejected by the curvature test.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.pairs.iter().map(|(s, y)| (s.as_slice(), y.as_slice()))
    }

    /// Stores `(s, y)` when `sᵀy > ε‖s‖‖y‖`, evicting the oldest pair beyond
    /// the memory limit. Returns whether the pair passed the test.
    pub fn update(&mut self, s: &[f64], y: &[f64]) -> bool {
        let sy = dot(s, y);
        if !(sy > CURVATURE_EPS * norm2(s) * norm2(y)) || !sy.is_finite() {
            self.skipped += 1;
            return false;
        }
        if self.adaptive_sigma {
            self.sigma = sy / dot(y, y);
        }
        if self.m > 0 {
            self.pairs.push_back((s.to_vec(), y.to_vec()));
            while self.pairs.len() > self.m {
                self.pairs.pop_front();
            }
        }
        true
    }

    fn drop_oldest(&mut self) {
        self.pairs.pop_front();
    }

    /// Compact inverse Hessian `σI + U M Uᵀ` with `U = [S, σY]`.
    pub fn inverse_dplr(&self, n: usize) -> Dplr {
        let k = self.pairs.len();
        let sigma = self.sigma;
        if k == 0 {
            return Dplr::diagonal(vec![sigma; n]);
        }
        let s = DMatrix::from_fn(n, k, |i, j| self.pairs[j].0[i]);
        let y = DMatrix::from_fn(n, k, |i, j| self.pairs[j].1[i]);
        let sty = s.tr_mul(&y);
        let r = DMatrix::from_fn(k, k, |i, j| if i <= j { sty[(i, j)] } else { 0.0 });
        let dyy = DMatrix::from_fn(k, k, |i, j| if i == j { sty[(i, i)] } else { 0.0 })
            + y.tr_mul(&y) * sigma;
        let rinv = r
            .clone()
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("curvature test keeps the diagonal of R positive");
        let mut m = DMatrix::zeros(2 * k, 2 * k);
        m.view_mut((0, 0), (k, k))
            .copy_from(&(rinv.transpose() * &dyy * &rinv));
        m.view_mut((0, k), (k, k)).copy_from(&(-rinv.transpose()));
        m.view_mut((k, 0), (k, k)).copy_from(&(-&rinv));
        let mut m_inv = DMatrix::zeros(2 * k, 2 * k);
        m_inv.view_mut((0, k), (k, k)).copy_from(&(-&r));
        m_inv.view_mut((k, 0), (k, k)).copy_from(&(-r.transpose()));
        m_inv.view_mut((k, k), (k, k)).copy_from(&(-dyy));
        let mut u = DMatrix::zeros(n, 2 * k);
        u.view_mut((0, 0), (n, k)).copy_from(&s);
        u.view_mut((0, k), (n, k)).copy_from(&(y * sigma));
        Dplr {
            d: vec![sigma; n],
            u,
            m,
            m_inv: Some(m_inv),
        }
    }
}

/// The prox metric `H = B + ρI`, where `B` is the L-BFGS Hessian whose
/// inverse is [`LbfgsMemory::inverse_dplr`]. Pairs whose capacitance matrix
/// is singular are dropped, oldest first.
pub fn inverse_hessian(mem: &mut LbfgsMemory, n: usize, shift: f64) -> Result<Metric, PqnError> {
    if !(shift >= 0.0 && shift.is_finite()) {
        return Err(PqnError::Config(format!(
            "shift {shift} must be nonnegative"
        )));
    }
    loop {
        if mem.is_empty() {
            return Ok(Metric::scaled_identity(n, 1.0 / mem.sigma + shift)?);
        }
        let w = mem.inverse_dplr(n);
        let built = if shift == 0.0 {
            Metric::from_inverse(w)
        } else {
            w.inverse().and_then(|mut direct| {
                for d in &mut direct.d {
                    *d += shift;
                }
                Metric::from_direct(direct)
            })
        };
        match built {
            Ok(metric) => return Ok(metric),
            Err(e) => {
                log::debug!("dropping oldest pair: {e}");
                mem.drop_oldest();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqnConfig {
    /// Memory size `m`; 0 gives a proximal-gradient method.
    pub memory: usize,
    /// Inexactness constant `κ ∈ (0, 1)`.
    pub kappa: f64,
    /// Tolerance on `‖x − prox_g(x − ∇f(x))‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial `σ` of `H₀⁻¹ = σI`.
    pub sigma0: f64,
    /// Keep `σ` fixed at `sigma0`.
    pub fixed_sigma: bool,
    /// Sufficient-decrease constant `c` in `F(x⁺) ≤ F(x) − c‖x⁺ − x‖²`.
    pub decrease: f64,
    /// Factor by which a rejected step grows the shift.
    pub shift_growth: f64,
    /// First nonzero shift, relative to `1/σ`.
    pub shift_init: f64,
    /// Iteration cap of each interior solve.
    pub inner_max_iter: usize,
}

impl Default for PqnConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            kappa: 0.1,
            tol: 1e-6,
            max_iter: 500,
            sigma0: 1.0,
            fixed_sigma: false,
            decrease: 1e-4,
            shift_growth: 10.0,
            shift_init: 1e-3,
            inner_max_iter: 100,
        }
    }
}

impl PqnConfig {
    fn validate(&self) -> Result<(), PqnError> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(PqnError::Config(format!(
                "kappa = {} must lie in (0, 1)",
                self.kappa
            )));
        }
        if !(self.tol > 0.0) {
            return Err(PqnError::Config(format!(
                "tol = {} must be positive",
                self.tol
            )));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(PqnError::Config(format!(
                "sigma0 = {} must be positive",
                self.sigma0
            )));
        }
        if !(self.shift_growth > 1.0) {
            return Err(PqnError::Config("shift growth must exceed 1".into()));
        }
        Ok(())
    }
}

/// One accepted iteration (iteration 0 is the starting point).
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub objective: f64,
    /// `‖x − prox_g(x − ∇f(x))‖∞` at the iterate.
    pub residual: f64,
    /// Interior iterations spent on the accepted step (retries included).
    pub inner_iterations: usize,
    pub inner_tol: f64,
    pub elapsed: f64,
    pub shift: f64,
    pub sigma: f64,
    pub memory: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateLog {
    pub records: Vec<IterRecord>,
    /// Steps rejected by the decrease test.
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PqnStatus {
    Optimal,
    IterationLimit,
    StepFailure,
    /// The callback asked to stop.
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqnResult {
    pub x: Vec<f64>,
    pub status: PqnStatus,
    pub log: IterateLog,
}

/// `f(x) + g(x)`
pub fn objective(f: &dyn SmoothProblem, g: &QsFunction, x: &[f64]) -> Result<f64, PqnError> {
    Ok(f.value(x) + g.value(x)?)
}

/// `prox_g(z)` in the Euclidean metric, in closed form when available.
pub fn unit_prox(g: &QsFunction, z: &[f64]) -> Result<Vec<f64>, PqnError> {
    if let Some(cf) = g.closed_form() {
        match unscaled_prox(&cf.kind, z, cf.weight) {
            Ok(x) => return Ok(x),
            Err(ProxError::Unsupported(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(prox_with(
        g,
        &Metric::identity(z.len()),
        z,
        &ProxOptions {
            tol: INNER_TOL_FLOOR,
            ..ProxOptions::default()
        },
    )?
    .x)
}

fn has_closed_prox(g: &QsFunction) -> bool {
    g.closed_form().is_some_and(|cf| has_unscaled_prox(&cf.kind))
}

/// `‖x − prox_g(x − ∇f(x))‖∞`
pub fn optimality_residual(g: &QsFunction, x: &[f64], grad: &[f64]) -> Result<f64, PqnError> {
    let z: Vec<f64> = x.iter().zip(grad).map(|(a, b)| a - b).collect();
    let p = unit_prox(g, &z)?;
    Ok(x.iter()
        .zip(&p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Result of one proximal quasi-Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub x: Vec<f64>,
    /// The prox center `x − H⁻¹∇f(x)`.
    pub z: Vec<f64>,
    pub inner_iterations: usize,
    pub inner_tol: f64,
    /// Whether the proximal map was taken in closed form.
    pub exact: bool,
}

/// `x⁺ = prox_H g(x − H⁻¹∇f(x))` with interior tolerance `inner_tol`.
///
/// When `H` is a multiple of the identity and `g` has a closed-form prox,
/// the map is evaluated exactly.
pub fn step(
    g: &QsFunction,
    x: &[f64],
    grad: &[f64],
    metric: &Metric,
    inner_tol: f64,
    inner_max_iter: usize,
) -> Result<Step, PqnError> {
    if x.len() != g.n() || grad.len() != g.n() || metric.dim() != g.n() {
        return Err(PqnError::Dimension(format!(
            "x has {} entries, gradient {}, metric order {}, n = {}",
            x.len(),
            grad.len(),
            metric.dim(),
            g.n()
        )));
    }
    let hg = metric.apply_hinv(grad);
    let z: Vec<f64> = x.iter().zip(&hg).map(|(a, b)| a - b).collect();
    if let (Metric::ScaledIdentity { sigma: h, .. }, Some(cf)) = (metric, g.closed_form()) {
        if let Ok(xp) = unscaled_prox(&cf.kind, &z, cf.weight / h) {
            return Ok(Step {
                x: xp,
                z,
                inner_iterations: 0,
                inner_tol,
                exact: true,
            });
        }
    }
    let opts = ProxOptions {
        tol: inner_tol,
        max_iter: inner_max_iter,
        strategy: None,
    };
    let r = prox_with(g, metric, &z, &opts)?;
    Ok(Step {
        x: r.x,
        z,
        inner_iterations: r.inner_iterations,
        inner_tol,
        exact: false,
    })
}

/// Runs the method from `x0`.
pub fn solve(
    f: &dyn SmoothProblem,
    g: &QsFunction,
    x0: &[f64],
    cfg: &PqnConfig,
) -> Result<PqnResult, PqnError> {
    solve_with_callback(f, g, x0, cfg, &mut |_, _| ControlFlow::Continue(()))
}

/// Like [`solve`], calling `callback` with each accepted record and iterate.
/// Returning `Break` ends the run with status `Stopped`.
pub fn solve_with_callback(
    f: &dyn SmoothProblem,
    g: &QsFunction,
    x0: &[f64],
    cfg: &PqnConfig,
    callback: &mut dyn FnMut(&IterRecord, &[f64]) -> ControlFlow<()>,
) -> Result<PqnResult, PqnError> {
    cfg.validate()?;
    let n = f.dim();
    if x0.len() != n || g.n() != n {
        return Err(PqnError::Dimension(format!(
            "x0 has {} entries, f acts on R^{n}, g on R^{}",
            x0.len(),
            g.n()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(PqnError::Dimension("x0 must be finite".into()));
    }
    let closed = has_closed_prox(g);
    let start = Instant::now();
    let mut mem = LbfgsMemory::new(cfg.memory, cfg.sigma0);
    if cfg.fixed_sigma {
        mem = mem.with_fixed_sigma();
    }
    let mut x = x0.to_vec();
    let (mut fx, mut grad) = f.value_grad(&x);
    let mut obj = fx + g.value(&x)?;
    let mut residual = optimality_residual(g, &x, &grad)?;
    let mut prev_residual: Option<f64> = None;
    let mut shift = 0.0;
    // Multiplies κ; lowered when an inexact step is rejected and relaxed
    // again after each acceptance.
    let mut tol_scale = 1.0f64;
    let mut log = IterateLog::default();
    let first = IterRecord {
        k: 0,
        objective: obj,
        residual,
        inner_iterations: 0,
        inner_tol: 0.0,
        elapsed: start.elapsed().as_secs_f64(),
        shift,
        sigma: mem.sigma(),
        memory: 0,
    };
    let stop = callback(&first, &x).is_break();
    log.records.push(first);
    if stop {
        return Ok(PqnResult {
            x,
            status: PqnStatus::Stopped,
            log,
        });
    }

    for k in 1..=cfg.max_iter {
        if residual <= cfg.tol {
            return Ok(PqnResult {
                x,
                status: PqnStatus::Optimal,
                log,
            });
        }
        let r_ref = if closed {
            Some(residual)
        } else {
            prev_residual
        };
        let mut inner_tol = r_ref
            .map_or(INNER_TOL_FALLBACK, |r| cfg.kappa * r * tol_scale)
            .clamp(INNER_TOL_FLOOR, INNER_TOL_CAP);
        let mut inner_total = 0;
        let accepted = loop {
            let metric = inverse_hessian(&mut mem, n, shift)?;
            let attempt = step(g, &x, &grad, &metric, inner_tol, cfg.inner_max_iter);
            let candidate = match attempt {
                Ok(st) => {
                    inner_total += st.inner_iterations;
                    let obj_new = f.value(&st.x) + g.value(&st.x)?;
                    let dx2: f64 = st.x.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                    // Near the solution the required decrease falls below the
                    // rounding error of F itself.
                    let slack = 16.0 * f64::EPSILON * (1.0 + obj.abs());
                    let ok = obj_new.is_finite() && obj_new <= obj - cfg.decrease * dx2 + slack;
                    ok.then_some((st.x, obj_new))
                }
                Err(PqnError::Prox(e)) => {
                    log::debug!("iteration {k}: proximal solve failed ({e})");
                    None
                }
                Err(e) => return Err(e),
            };
            match candidate {
                Some(c) => break Some(c),
                None => {
                    log.rejected += 1;
                    let exact = matches!(&metric, Metric::ScaledIdentity { .. }) && closed;
                    if !exact && inner_tol > INNER_TOL_FLOOR {
                        // The interior gap is in objective units and must
                        // drop below the decrease the step can deliver.
                        tol_scale *= 0.01;
                        inner_tol = (0.01 * inner_tol).max(INNER_TOL_FLOOR);
                        continue;
                    }
                    shift = if shift == 0.0 {
                        cfg.shift_init / mem.sigma()
                    } else {
                        shift * cfg.shift_growth
                    };
                    if shift > MAX_SHIFT {
                        break None;
                    }
                }
            }
        };
        let Some((x_new, obj_new)) = accepted else {
            return Ok(PqnResult {
                x,
                status: PqnStatus::StepFailure,
                log,
            });
        };
        let used_shift = shift;
        tol_scale = (tol_scale * 2.0).min(1.0);
        shift *= 0.5;
        if shift < 1e-3 * cfg.shift_init / mem.sigma() {
            shift = 0.0;
        }
        let (f_new, grad_new) = f.value_grad(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        mem.update(&s, &y);
        x = x_new;
        fx = f_new;
        grad = grad_new;
        obj = obj_new;
        debug_assert!(obj.is_finite() && fx.is_finite());
        prev_residual = Some(residual);
        residual = optimality_residual(g, &x, &grad)?;
        let rec = IterRecord {
            k,
            objective: obj,
            residual,
            inner_iterations: inner_total,
            inner_tol,
            elapsed: start.elapsed().as_secs_f64(),
            shift: used_shift,
            sigma: mem.sigma(),
            memory: mem.len(),
        };
        let stop = callback(&rec, &x).is_break();
        log.records.push(rec);
        if stop {
            return Ok(PqnResult {
                x,
                status: PqnStatus::Stopped,
                log,
            });
        }
    }
    let status = if residual <= cfg.tol {
        PqnStatus::Optimal
    } else {
        PqnStatus::IterationLimit
    };
    Ok(PqnResult { x, status, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::StructuredMatrix;
    use crate::problems::LeastSquares;
    use crate::qscalc::{build_l1, build_quadratic};
    use crate::vecops::{max_abs_diff, norm_inf};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn memory_examples() {
        let mut mem = LbfgsMemory::new(0, 1.0);
        assert!(mem.update(&[1.0, 0.0], &[2.0, 0.0]));
        assert!(mem.is_empty());
        assert_eq!(mem.sigma(), 0.5);
        let mut mem = LbfgsMemory::new(2, 1.0);
        assert!(mem.update(&[1.0, 0.0], &[2.0, 0.0]));
        assert_eq!((mem.len(), mem.sigma()), (1, 0.5));
        assert!(!mem.update(&[1.0, 0.0], &[0.0, 1.0]));
        assert_eq!(mem.skipped(), 1);
        mem.update(&[0.0, 1.0], &[0.0, 3.0]);
        mem.update(&[1.0, 1.0], &[1.0, 2.0]);
        assert_eq!(mem.len(), 2);
    }

    #[test]
    fn empty_memory_gives_scaled_identity() {
        let mut mem = LbfgsMemory::new(5, 1.0);
        let h = inverse_hessian(&mut mem, 3, 0.0).unwrap();
        assert_eq!(h.to_dense(), DMatrix::identity(3, 3));
    }

    #[test]
    fn secant_holds_for_newest_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = &q * q.transpose() + DMatrix::identity(n, n);
        let mut mem = LbfgsMemory::new(4, 1.0);
        for _ in 0..6 {
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (&q * nalgebra::DVector::from_vec(s.clone()))
                .iter()
                .copied()
                .collect();
            assert!(mem.update(&s, &y));
            let h = inverse_hessian(&mut mem, n, 0.0).unwrap();
            let wy = h.apply_hinv(&y);
            assert!(max_abs_diff(&wy, &s) <= 1e-8 * norm_inf(&s));
            // The direct and inverse sides agree.
            let back = h.apply_h(&wy);
            assert!(max_abs_diff(&back, &y) <= 1e-8 * norm_inf(&y));
        }
    }

    #[test]
    fn single_pair_inverse_formula() {
        let mut mem = LbfgsMemory::new(1, 1.0).with_fixed_sigma();
        mem.update(&[1.0, 0.0], &[1.0, 0.0]);
        let w = mem.inverse_dplr(2).to_dense();
        assert!((w.clone() - DMatrix::identity(2, 2)).amax() < 1e-15);
        let mut mem = LbfgsMemory::new(1, 1.0).with_fixed_sigma();
        mem.update(&[1.0, 0.0], &[2.0, 1.0]);
        // Textbook BFGS inverse update of H₀ = I.
        let s = nalgebra::DVector::from_vec(vec![1.0, 0.0]);
        let y = nalgebra::DVector::from_vec(vec![2.0, 1.0]);
        let rho = 1.0 / s.dot(&y);
        let i = DMatrix::identity(2, 2);
        let v = &i - &y * s.transpose() * rho;
        let expect = v.transpose() * v + &s * s.transpose() * rho;
        assert!((mem.inverse_dplr(2).to_dense() - expect).amax() < 1e-14);
    }

    #[test]
    fn bfgs_recovers_quadratic_hessian() {
        let n = 5;
        let d = [1.0, 2.0, 3.0, 5.0, 8.0];
        let mut mem = LbfgsMemory::new(n, 1.0);
        // Hereditary exactness needs D-conjugate steps, as exact linesearch
        // steps on a quadratic are.
        for i in 0..n {
            let mut s = vec![0.0; n];
            s[i] = 1.0 + 0.1 * i as f64;
            let y: Vec<f64> = s.iter().zip(&d).map(|(a, b)| a * b).collect();
            mem.update(&s, &y);
        }
        let w = inverse_hessian(&mut mem, n, 0.0)
            .unwrap()
            .to_dense_inverse();
        let prod = w * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
        assert!((prod - DMatrix::identity(n, n)).amax() < 1e-6);
    }

    #[test]
    fn shift_is_applied_on_the_hessian_side() {
        let mut mem = LbfgsMemory::new(2, 0.5);
        mem.update(&[1.0, 0.0, 0.0], &[2.0, 0.5, 0.0]);
        let plain = inverse_hessian(&mut mem, 3, 0.0).unwrap().to_dense();
        let shifted = inverse_hessian(&mut mem, 3, 0.3).unwrap();
        let expect = plain + DMatrix::identity(3, 3) * 0.3;
        assert!((shifted.to_dense() - &expect).amax() < 1e-12);
        let inv = shifted.to_dense_inverse();
        assert!((inv * expect - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn one_dimensional_step() {
        // f = ½(x − 3)², g = |x|, x = 0: z = 3 and x⁺ = 2.
        let f = LeastSquares::new(StructuredMatrix::identity(1), vec![3.0]).unwrap();
        let g = build_l1(1).unwrap();
        let grad = f.gradient(&[0.0]);
        let st = step(&g, &[0.0], &grad, &Metric::identity(1), 1e-8, 100).unwrap();
        assert_eq!(st.z, vec![3.0]);
        assert_eq!(st.x, vec![2.0]);
        assert!(st.exact);
    }

    #[test]
    fn quadratic_without_regularizer_terminates() {
        // g = ε·½‖x‖² is the closest QS stand-in for g ≡ 0 with an exact prox.
        let n = 6;
        let d: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let a = StructuredMatrix::Dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            d.clone(),
        )));
        let f = LeastSquares::new(a, vec![1.0; n]).unwrap();
        let g = build_quadratic(n).unwrap().scaled(1e-12).unwrap();
        let cfg = PqnConfig {
            memory: n,
            tol: 1e-10,
            ..PqnConfig::default()
        };
        let r = solve(&f, &g, &vec![0.0; n], &cfg).unwrap();
        assert_eq!(r.status, PqnStatus::Optimal);
        let expect: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
        assert!(max_abs_diff(&r.x, &expect) < 1e-8);
    }

    #[test]
    fn starting_at_the_solution_stops_immediately() {
        let f = LeastSquares::new(StructuredMatrix::identity(2), vec![3.0, 0.5]).unwrap();
        let g = build_l1(2).unwrap();
        let r = solve(&f, &g, &[2.0, 0.0], &PqnConfig::default()).unwrap();
        assert_eq!(r.status, PqnStatus::Optimal);
        assert_eq!(r.log.records.len(), 1);
        assert!(r.log.records[0].residual <= 1e-12);
    }

    #[test]
    fn config_validation() {
        let f = LeastSquares::new(StructuredMatrix::identity(1), vec![1.0]).unwrap();
        let g = build_l1(1).unwrap();
        let bad = PqnConfig {
            kappa: 1.5,
            ..PqnConfig::default()
        };
        assert!(matches!(
            solve(&f, &g, &[0.0], &bad),
            Err(PqnError::Config(_))
        ));
        assert!(matches!(
            solve(&f, &g, &[0.0, 1.0], &PqnConfig::default()),
            Err(PqnError::Dimension(_))
        ));
    }
}
