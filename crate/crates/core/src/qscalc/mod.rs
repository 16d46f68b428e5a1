//! Quadratic-support functions `g(x) = sup{ yᵀ(Bx + d) : Ay ⪰_K b }`.
//!
//! A [`QsFunction`] stores the conic data `(A, b, d, B, K)` together with a
//! [`SolveStrategy`] telling the linear-algebra layer how to solve with
//! `L(u) = B H⁻¹ Bᵀ + Aᵀ block(u)⁻¹ A`, and optionally a [`ClosedForm`] used
//! for fast values and as a reference proximal map.
//!
//! The constraint convention is `Ay − b ∈ K`.

mod calculus;
mod catalog;
mod spec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cones::{ConeError, ConeProduct};
use crate::ipm::{self, DenseQp, IpmConfig, IpmStatus};
use crate::linops::{pattern, Csr, LinopsError, MAX_BORDER};
use crate::vecops::{dot, norm2};

pub use calculus::{add, affine_compose, concat, lift_quadratic, moreau_yosida, pivoted_cholesky};
pub use catalog::{
    build_cone_indicator, build_graph_l1, build_group_l2, build_isotropic_tv, build_l1,
    build_l1_ball, build_l2, build_linf, build_orthant_distance, build_polyhedral_norm,
    build_quadratic, build_separable, build_sum_of_norms, build_tv_1d, path_incidence, Group,
    NormKind,
};
pub use spec::QsSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("strategy {strategy} does not match the function's structure: {reason}")]
    Strategy { strategy: String, reason: String },
    #[error("separable building block must be a scalar function with orthant cones")]
    NonOrthantGamma,
    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),
    #[error("the dual feasible set is empty")]
    Infeasible,
    #[error("interior method failed: {0}")]
    Solver(String),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Linops(#[from] LinopsError),
}

/// Which structured solve to use for `L(u)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum SolveStrategy {
    /// `L(u)` is diagonal plus the low-rank part of `H⁻¹`.
    L1Diag,
    /// `L(u)` is banded (half-bandwidth `bandwidth`) plus low rank; covers
    /// path-graph total variation.
    GraphTridiag {
        bandwidth: usize,
    },
    /// Diagonal plus one rank-1 term per second-order block.
    SocBlocks,
    /// Banded core bordered by a few dense rows/columns (`border`), solved by
    /// pivoting on the core.
    BallPivot {
        border: Vec<usize>,
        bandwidth: usize,
    },
    /// Concatenation of a scalar function with `block` dual variables per
    /// coordinate.
    Separable {
        block: usize,
    },
    DenseFallback,
}

impl std::fmt::Display for SolveStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Functions whose value (and, for most, proximal map) have closed forms.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedKind {
    /// `‖x‖₁`
    L1,
    /// `Σ ‖x_G‖₂` over disjoint groups.
    GroupL2 { groups: Vec<Vec<usize>> },
    /// Indicator of the unit 1-norm ball.
    L1Ball,
    /// `‖max(0, x)‖₂`
    OrthantDistance,
    /// `Σ |x_{i+1} − x_i|`
    Tv1d,
    /// `½‖x‖²`
    Quadratic,
    /// `‖N x‖₁`
    GraphL1 { incidence: Csr },
    /// Indicator of `{x : N x ≤ 0}`.
    ConeIndicator { normals: Csr },
    /// `Σ ‖x_G‖` with per-group norms (groups may overlap).
    SumOfNorms {
        groups: Vec<Vec<usize>>,
        norms: Vec<NormKind>,
    },
}

/// `weight · base(x)` for a [`ClosedKind`] base function.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub kind: ClosedKind,
    pub weight: f64,
}

/// Slack allowed when evaluating indicator functions at numerically
/// computed points.
pub const INDICATOR_TOL: f64 = 1e-6;

impl ClosedForm {
    pub fn new(kind: ClosedKind) -> Self {
        Self { kind, weight: 1.0 }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let base = match &self.kind {
            ClosedKind::L1 => x.iter().map(|v| v.abs()).sum(),
            ClosedKind::GroupL2 { groups } => groups
                .iter()
                .map(|g| g.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt())
                .sum(),
            ClosedKind::L1Ball => {
                let s: f64 = x.iter().map(|v| v.abs()).sum();
                return if s <= 1.0 + INDICATOR_TOL {
                    0.0
                } else {
                    f64::INFINITY
                };
            }
            ClosedKind::OrthantDistance => x.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt(),
            ClosedKind::Tv1d => x.windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
            ClosedKind::Quadratic => 0.5 * dot(x, x),
            ClosedKind::GraphL1 { incidence } => incidence.apply(x).iter().map(|v| v.abs()).sum(),
            ClosedKind::ConeIndicator { normals } => {
                let tol = INDICATOR_TOL * (1.0 + norm2(x));
                return if normals.apply(x).iter().all(|v| *v <= tol) {
                    0.0
                } else {
                    f64::INFINITY
                };
            }
            ClosedKind::SumOfNorms { groups, norms } => groups
                .iter()
                .zip(norms)
                .map(|(g, k)| {
                    let xs: Vec<f64> = g.iter().map(|&i| x[i]).collect();
                    k.value(&xs)
                })
                .sum(),
        };
        self.weight * base
    }
}

/// A quadratic-support function.
#[derive(Debug, Clone)]
pub struct QsFunction {
    a: Csr,
    b: Vec<f64>,
    d: Vec<f64>,
    bmat: Csr,
    bmat_t: Csr,
    cone: ConeProduct,
    strategy: SolveStrategy,
    closed_form: Option<ClosedForm>,
}

impl QsFunction {
    /// Builds `g` from its conic data; the solve strategy is detected from
    /// the sparsity structure.
    pub fn new(
        a: Csr,
        b: Vec<f64>,
        d: Vec<f64>,
        bmat: Csr,
        cone: ConeProduct,
    ) -> Result<Self, QsError> {
        let m = cone.dim();
        if m == 0 {
            return Err(QsError::Dimension(
                "the cone must have at least one block".into(),
            ));
        }
        if a.rows() != m || b.len() != m {
            return Err(QsError::Dimension(format!(
                "A has {} rows and b has {} entries, cone dimension is {m}",
                a.rows(),
                b.len()
            )));
        }
        if bmat.rows() != a.cols() || d.len() != a.cols() {
            return Err(QsError::Dimension(format!(
                "A has {} columns, B has {} rows, d has {} entries",
                a.cols(),
                bmat.rows(),
                d.len()
            )));
        }
        let bmat_t = bmat.transpose();
        let strategy = detect_strategy(&a, &cone, &bmat_t);
        Ok(Self {
            a,
            b,
            d,
            bmat,
            bmat_t,
            cone,
            strategy,
            closed_form: None,
        })
    }

    /// Replaces the detected strategy after checking it fits the structure.
    pub fn with_strategy(mut self, strategy: SolveStrategy) -> Result<Self, QsError> {
        validate_strategy(&self, &strategy)?;
        self.strategy = strategy;
        Ok(self)
    }

    pub fn with_closed_form(mut self, closed: Option<ClosedForm>) -> Self {
        self.closed_form = closed;
        self
    }

    pub fn a(&self) -> &Csr {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn bmat(&self) -> &Csr {
        &self.bmat
    }

    pub fn bmat_t(&self) -> &Csr {
        &self.bmat_t
    }

    pub fn cone(&self) -> &ConeProduct {
        &self.cone
    }

    pub fn strategy(&self) -> &SolveStrategy {
        &self.strategy
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed_form.as_ref()
    }

    /// Ambient dimension `n`.
    pub fn n(&self) -> usize {
        self.bmat.cols()
    }

    /// Number of dual variables `ℓ`.
    pub fn ell(&self) -> usize {
        self.a.cols()
    }

    /// `λ·g` for `λ > 0`, obtained by scaling `B` and `d`.
    pub fn scaled(&self, lambda: f64) -> Result<Self, QsError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(QsError::Dimension(format!(
                "scale factor {lambda} must be positive"
            )));
        }
        let mut out = self.clone();
        out.bmat = self.bmat.scaled(lambda);
        out.bmat_t = self.bmat_t.scaled(lambda);
        out.d = self.d.iter().map(|v| v * lambda).collect();
        if let Some(cf) = &mut out.closed_form {
            cf.weight *= lambda;
        }
        Ok(out)
    }

    /// `Bx + d`
    pub fn linear_term(&self, x: &[f64]) -> Vec<f64> {
        let mut c = self.bmat.apply(x);
        for (ci, di) in c.iter_mut().zip(&self.d) {
            *ci += di;
        }
        c
    }

    /// `g(x)`, from the closed form when one is attached, otherwise from
    /// [`evaluate`].
    pub fn value(&self, x: &[f64]) -> Result<f64, QsError> {
        match &self.closed_form {
            Some(cf) => Ok(cf.value(x)),
            None => evaluate(self, x),
        }
    }
}

fn detect_strategy(a: &Csr, cone: &ConeProduct, bt: &Csr) -> SolveStrategy {
    if pattern::soc_blocks_ok(a, cone, bt) {
        return SolveStrategy::SocBlocks;
    }
    if let Some(w) = pattern::core_bandwidth(a, cone, bt, &[]) {
        return if w == 0 {
            SolveStrategy::L1Diag
        } else {
            SolveStrategy::GraphTridiag { bandwidth: w }
        };
    }
    if let Some(border) = pattern::high_degree_vars(a, cone, bt) {
        if !border.is_empty() && border.len() <= MAX_BORDER {
            if let Some(w) = pattern::core_bandwidth(a, cone, bt, &border) {
                return SolveStrategy::BallPivot {
                    border,
                    bandwidth: w,
                };
            }
        }
    }
    SolveStrategy::DenseFallback
}

fn validate_strategy(g: &QsFunction, s: &SolveStrategy) -> Result<(), QsError> {
    let fail = |reason: &str| QsError::Strategy {
        strategy: s.to_string(),
        reason: reason.to_string(),
    };
    let (a, cone, bt) = (&g.a, &g.cone, &g.bmat_t);
    match s {
        SolveStrategy::DenseFallback => Ok(()),
        SolveStrategy::L1Diag => match pattern::core_bandwidth(a, cone, bt, &[]) {
            Some(0) => Ok(()),
            _ => Err(fail("L(u) is not diagonal plus low rank")),
        },
        SolveStrategy::GraphTridiag { bandwidth } => {
            match pattern::core_bandwidth(a, cone, bt, &[]) {
                Some(w) if w <= *bandwidth => Ok(()),
                _ => Err(fail("L(u) is not banded within the declared bandwidth")),
            }
        }
        SolveStrategy::BallPivot { border, bandwidth } => {
            let mut sorted = border.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != border.len() || border.iter().any(|&i| i >= g.ell()) {
                return Err(fail("border indices must be distinct dual variables"));
            }
            if border.is_empty() || border.len() > MAX_BORDER {
                return Err(fail("border size out of range"));
            }
            match pattern::core_bandwidth(a, cone, bt, border) {
                Some(w) if w <= *bandwidth => Ok(()),
                _ => Err(fail("core is not banded within the declared bandwidth")),
            }
        }
        SolveStrategy::SocBlocks => {
            if pattern::soc_blocks_ok(a, cone, bt) {
                Ok(())
            } else {
                Err(fail("needs disjoint second-order blocks over single-entry rows and selection-like B"))
            }
        }
        SolveStrategy::Separable { block } => {
            if pattern::separable_ok(a, cone, &g.bmat, *block) {
                Ok(())
            } else {
                Err(fail(
                    "A and B are not coordinate-wise block diagonal with full-rank blocks",
                ))
            }
        }
    }
}

/// `g(x)` by solving the linear conic program `max cᵀy s.t. Ay ⪰_K b` with
/// `c = Bx + d` by the interior method. Returns `+∞` when the supremum is
/// unbounded and [`QsError::Infeasible`] when the dual set is empty. A solve
/// that stalls with residual below `1e-7` is accepted.
pub fn evaluate(g: &QsFunction, x: &[f64]) -> Result<f64, QsError> {
    if x.len() != g.n() {
        return Err(QsError::Dimension(format!(
            "x has {} entries, n = {}",
            x.len(),
            g.n()
        )));
    }
    let c = g.linear_term(x);
    let qp = DenseQp::linear(c.clone(), g.a.clone(), g.b.clone(), g.cone.clone())?;
    let cfg = IpmConfig {
        tol: 1e-10,
        max_iter: 200,
        ..IpmConfig::default()
    };
    let res = ipm::solve(&qp, &cfg);
    match res.status {
        IpmStatus::Optimal => Ok(dot(&c, &res.y)),
        IpmStatus::Unbounded => Ok(f64::INFINITY),
        IpmStatus::Infeasible => Err(QsError::Infeasible),
        IpmStatus::IterationLimit | IpmStatus::NumericalBreakdown if res.residual < 1e-7 => {
            Ok(dot(&c, &res.y))
        }
        other => Err(QsError::Solver(format!(
            "{other:?} after {} iterations",
            res.iterations
        ))),
    }
}
