//! Scaled proximal maps `prox_H g(z) = argmin_x ½‖z − x‖²_H + g(x)` of QS
//! functions through the dual conic QP
//!
//! ```text
//! minimize ½yᵀ(BH⁻¹Bᵀ)y − (d + Bz)ᵀy   subject to   Ay ⪰_K b,
//! ```
//!
//! with the primal point recovered from `Hx + Bᵀy = Hz`. Closed-form maps of
//! the catalog functions are provided by [`unscaled_prox`].

use thiserror::Error;

use crate::cones::ConeProduct;
use crate::ipm::{self, ConicQp, IpmConfig, IpmStatus};
use crate::linops::{build_l_with, LinopsError, Metric, SolveOp};
use crate::qscalc::{ClosedKind, QsFunction, SolveStrategy};
use crate::vecops::dot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("interior method stopped with {status:?} after {iterations} iterations (residual {residual:e})")]
    Solver {
        status: IpmStatus,
        iterations: usize,
        residual: f64,
    },
    #[error("no closed-form proximal map for {0}")]
    Unsupported(String),
}

/// The dual QP of a proximal map.
pub struct ProxQp<'a> {
    g: &'a QsFunction,
    h: &'a Metric,
    c: Vec<f64>,
    strategy: SolveStrategy,
}

impl<'a> ProxQp<'a> {
    pub fn new(g: &'a QsFunction, h: &'a Metric, z: &[f64]) -> Result<Self, ProxError> {
        if h.dim() != g.n() || z.len() != g.n() {
            return Err(ProxError::Dimension(format!(
                "g acts on R^{}, H has order {}, z has {} entries",
                g.n(),
                h.dim(),
                z.len()
            )));
        }
        Ok(Self {
            g,
            h,
            c: g.linear_term(z),
            strategy: g.strategy().clone(),
        })
    }

    /// Overrides the solve strategy for `L(u)`.
    pub fn with_strategy(mut self, strategy: SolveStrategy) -> Self {
        self.strategy = strategy;
        self
    }
}

impl ConicQp for ProxQp<'_> {
    fn dim(&self) -> usize {
        self.g.ell()
    }

    fn cone(&self) -> &ConeProduct {
        self.g.cone()
    }

    fn c(&self) -> &[f64] {
        &self.c
    }

    fn b(&self) -> &[f64] {
        self.g.b()
    }

    fn apply_q(&self, y: &[f64]) -> Vec<f64> {
        self.g
            .bmat()
            .apply(&self.h.apply_hinv(&self.g.bmat_t().apply(y)))
    }

    fn apply_a(&self, y: &[f64]) -> Vec<f64> {
        self.g.a().apply(y)
    }

    fn apply_at(&self, v: &[f64]) -> Vec<f64> {
        self.g.a().apply_t(v)
    }

    fn factor(&self, u: &[f64]) -> Result<Box<dyn SolveOp + '_>, LinopsError> {
        Ok(Box::new(build_l_with(
            self.g,
            self.h,
            u,
            self.strategy.clone(),
        )?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxOptions {
    /// Interior-method tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Strategy override; `None` uses the function's own.
    pub strategy: Option<SolveStrategy>,
}

impl Default for ProxOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            strategy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub inner_iterations: usize,
    /// Final interior residual (largest of the normalized primal and dual
    /// residuals and the gap).
    pub residual: f64,
    /// `½‖z − x‖²_H + g(x)`, with `g(x)` taken as `yᵀ(Bx + d)`.
    pub envelope: f64,
    pub status: IpmStatus,
}

/// `prox_H g(z)` with interior tolerance `tol`.
pub fn prox(g: &QsFunction, h: &Metric, z: &[f64], tol: f64) -> Result<ProxResult, ProxError> {
    prox_with(
        g,
        h,
        z,
        &ProxOptions {
            tol,
            ..ProxOptions::default()
        },
    )
}

pub fn prox_with(
    g: &QsFunction,
    h: &Metric,
    z: &[f64],
    opts: &ProxOptions,
) -> Result<ProxResult, ProxError> {
    let mut qp = ProxQp::new(g, h, z)?;
    if let Some(s) = &opts.strategy {
        qp = qp.with_strategy(s.clone());
    }
    let cfg = IpmConfig {
        tol: opts.tol,
        max_iter: opts.max_iter,
        ..IpmConfig::default()
    };
    let res = ipm::solve(&qp, &cfg);
    let usable = match res.status {
        IpmStatus::Optimal => true,
        IpmStatus::IterationLimit | IpmStatus::NumericalBreakdown => {
            res.residual <= 10.0 * opts.tol
        }
        IpmStatus::Unbounded | IpmStatus::Infeasible => false,
    };
    if !usable {
        return Err(ProxError::Solver {
            status: res.status,
            iterations: res.iterations,
            residual: res.residual,
        });
    }
    let step = h.apply_hinv(&g.bmat_t().apply(&res.y));
    let x: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a - b).collect();
    let dz: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
    let envelope = 0.5 * h.norm_sq(&dz) + dot(&res.y, &g.linear_term(&x));
    Ok(ProxResult {
        x,
        y: res.y,
        inner_iterations: res.iterations,
        residual: res.residual,
        envelope,
        status: res.status,
    })
}

/// Moreau–Yosida envelope `min_x ½‖z − x‖²_H + g(x)`.
pub fn envelope(g: &QsFunction, h: &Metric, z: &[f64], tol: f64) -> Result<f64, ProxError> {
    Ok(prox(g, h, z, tol)?.envelope)
}

/// Whether [`unscaled_prox`] has a formula for `kind`.
pub fn has_unscaled_prox(kind: &ClosedKind) -> bool {
    matches!(
        kind,
        ClosedKind::L1
            | ClosedKind::GroupL2 { .. }
            | ClosedKind::L1Ball
            | ClosedKind::OrthantDistance
            | ClosedKind::Tv1d
            | ClosedKind::Quadratic
    )
}

/// Closed-form `prox_{λ·base}(z)` in the Euclidean metric.
pub fn unscaled_prox(kind: &ClosedKind, z: &[f64], lambda: f64) -> Result<Vec<f64>, ProxError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ProxError::Dimension(format!(
            "weight {lambda} must be nonnegative"
        )));
    }
    Ok(match kind {
        ClosedKind::L1 => z.iter().map(|&v| soft_threshold(v, lambda)).collect(),
        ClosedKind::GroupL2 { groups } => {
            if groups.iter().flatten().any(|&i| i >= z.len()) {
                return Err(ProxError::Dimension(format!(
                    "group index out of range for a point of length {}",
                    z.len()
                )));
            }
            let mut x = z.to_vec();
            for g in groups {
                let norm = g.iter().map(|&i| z[i] * z[i]).sum::<f64>().sqrt();
                let f = if norm > lambda {
                    1.0 - lambda / norm
                } else {
                    0.0
                };
                for &i in g {
                    x[i] = f * z[i];
                }
            }
            x
        }
        ClosedKind::L1Ball => project_l1_ball(z, 1.0),
        ClosedKind::OrthantDistance => {
            let norm = z.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
            let f = if norm > lambda { lambda / norm } else { 1.0 };
            z.iter().map(|&v| v - f * v.max(0.0)).collect()
        }
        ClosedKind::Tv1d => tv1d_denoise(z, lambda),
        ClosedKind::Quadratic => z.iter().map(|v| v / (1.0 + lambda)).collect(),
        other => return Err(ProxError::Unsupported(format!("{other:?}"))),
    })
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Euclidean projection onto `{x : ‖x‖₁ ≤ radius}` by sorting.
pub fn project_l1_ball(z: &[f64], radius: f64) -> Vec<f64> {
    if z.iter().map(|v| v.abs()).sum::<f64>() <= radius {
        return z.to_vec();
    }
    let mut a: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    a.sort_unstable_by(|x, y| y.total_cmp(x));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &aj) in a.iter().enumerate() {
        cum += aj;
        let t = (cum - radius) / (j + 1) as f64;
        if aj > t {
            theta = t;
        } else {
            break;
        }
    }
    z.iter().map(|&v| soft_threshold(v, theta)).collect()
}

/// `argmin_x ½‖x − z‖² + λ Σ |x_{i+1} − x_i|` by Condat's direct algorithm.
pub fn tv1d_denoise(z: &[f64], lambda: f64) -> Vec<f64> {
    let n = z.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if lambda == 0.0 {
        return z.to_vec();
    }
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let mut umin = lambda;
    let mut umax = -lambda;
    let mut vmin = z[0] - lambda;
    let mut vmax = z[0] + lambda;
    let twolambda = 2.0 * lambda;
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                loop {
                    out[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = z[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                loop {
                    out[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = z[k0];
                umax = -lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    out[k0] = vmin;
                    k0 += 1;
                }
                return out;
            }
        }
        umin += z[k + 1] - vmin;
        if umin < -lambda {
            loop {
                out[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmin = z[k0];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        umax += z[k + 1] - vmax;
        if umax > lambda {
            loop {
                out[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmax = z[k0];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= -lambda {
            kplus = k;
            vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
            umax = -lambda;
        }
    }
}
