//! Builders for the standard QS functions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::calculus::{concat, lift_quadratic};
use super::{ClosedForm, ClosedKind, QsError, QsFunction, SolveStrategy};
use crate::cones::{Cone, ConeProduct};
use crate::linops::Csr;

/// Norm applied to one group in [`build_sum_of_norms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
    #[serde(rename = "linf")]
    LInf,
}

impl NormKind {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            NormKind::L1 => x.iter().map(|v| v.abs()).sum(),
            NormKind::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::LInf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// A subset of coordinates and the norm applied to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub indices: Vec<usize>,
    pub norm: NormKind,
}

fn closed(g: QsFunction, kind: ClosedKind) -> QsFunction {
    g.with_closed_form(Some(ClosedForm::new(kind)))
}

fn orthant(m: usize) -> Result<ConeProduct, QsError> {
    Ok(ConeProduct::orthant(m)?)
}

fn check_n(n: usize) -> Result<(), QsError> {
    if n == 0 {
        return Err(QsError::Dimension("n must be positive".into()));
    }
    Ok(())
}

/// `‖x‖₁`: `A = [I; −I]`, `b = −1`, `B = I`, `K = ℝ₊²ⁿ`.
pub fn build_l1(n: usize) -> Result<QsFunction, QsError> {
    check_n(n)?;
    let mut trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
    trip.extend((0..n).map(|i| (n + i, i, -1.0)));
    let a = Csr::from_triplets(2 * n, n, &trip)?;
    let g = QsFunction::new(
        a,
        vec![-1.0; 2 * n],
        vec![0.0; n],
        Csr::identity(n),
        orthant(2 * n)?,
    )?;
    Ok(closed(g, ClosedKind::L1))
}

/// `‖x‖₂`: `A = [0; I]`, `b = (−1, 0)`, `K = ℚⁿ⁺¹`.
pub fn build_l2(n: usize) -> Result<QsFunction, QsError> {
    check_n(n)?;
    build_group_l2(&[n])
}

/// `‖x‖_∞` as the support function of the 1-norm ball, with `y = p − q`,
/// `p, q ≥ 0` and `1ᵀ(p + q) ≤ 1`.
pub fn build_linf(n: usize) -> Result<QsFunction, QsError> {
    check_n(n)?;
    build_sum_of_norms(
        n,
        &[Group {
            indices: (0..n).collect(),
            norm: NormKind::LInf,
        }],
    )
}

/// `sup{ yᵀBx : Ay ≥ b }` with an orthant cone.
pub fn build_polyhedral_norm(a: Csr, b: Vec<f64>, bmat: Csr) -> Result<QsFunction, QsError> {
    let m = a.rows();
    let ell = a.cols();
    QsFunction::new(a, b, vec![0.0; ell], bmat, orthant(m)?)
}

/// `½‖x‖²`, lifted into a second-order cone of order `n + 2`.
pub fn build_quadratic(n: usize) -> Result<QsFunction, QsError> {
    check_n(n)?;
    let g = lift_quadratic(
        &Csr::zeros(0, n),
        &[],
        &vec![0.0; n],
        &Csr::identity(n),
        &ConeProduct::default(),
        &DMatrix::identity(n, n),
    )?;
    Ok(closed(g, ClosedKind::Quadratic))
}

/// Indicator of the unit 1-norm ball as the conjugate of `‖·‖_∞`:
/// `sup{ yᵀx − τ : −τ1 ≤ y ≤ τ1 }` with `τ` the last dual variable.
pub fn build_l1_ball(n: usize) -> Result<QsFunction, QsError> {
    check_n(n)?;
    let mut trip = Vec::with_capacity(4 * n);
    for i in 0..n {
        trip.push((i, i, -1.0));
        trip.push((i, n, 1.0));
        trip.push((n + i, i, 1.0));
        trip.push((n + i, n, 1.0));
    }
    let a = Csr::from_triplets(2 * n, n + 1, &trip)?;
    let bmat = Csr::identity(n).vstack(&Csr::zeros(1, n))?;
    let mut d = vec![0.0; n + 1];
    d[n] = -1.0;
    let g = QsFunction::new(a, vec![0.0; 2 * n], d, bmat, orthant(2 * n)?)?.with_strategy(
        SolveStrategy::BallPivot {
            border: vec![n],
            bandwidth: 0,
        },
    )?;
    Ok(closed(g, ClosedKind::L1Ball))
}

/// Indicator of the polyhedral cone `{x : Nx ≤ 0}` written as
/// `sup{ yᵀNx : y ≥ 0 }`.
pub fn build_cone_indicator(normals: &Csr) -> Result<QsFunction, QsError> {
    let m = normals.rows();
    let g = QsFunction::new(
        Csr::identity(m),
        vec![0.0; m],
        vec![0.0; m],
        normals.clone(),
        orthant(m)?,
    )?;
    Ok(closed(
        g,
        ClosedKind::ConeIndicator {
            normals: normals.clone(),
        },
    ))
}

/// Distance to the nonpositive orthant, `‖max{0, x}‖₂`, as the support
/// function of `𝔹₂ ∩ ℝ₊ⁿ`.
pub fn build_orthant_distance(n: usize) -> Result<QsFunction, QsError> {
    check_n(n)?;
    let mut trip: Vec<_> = (0..n).map(|i| (1 + i, i, 1.0)).collect();
    trip.extend((0..n).map(|i| (n + 1 + i, i, 1.0)));
    let a = Csr::from_triplets(2 * n + 1, n, &trip)?;
    let mut b = vec![0.0; 2 * n + 1];
    b[0] = -1.0;
    let cone = ConeProduct::new(vec![Cone::SecondOrder(n + 1), Cone::Orthant(n)])?;
    let g = QsFunction::new(a, b, vec![0.0; n], Csr::identity(n), cone)?;
    Ok(closed(g, ClosedKind::OrthantDistance))
}

/// `Σ_G ‖x_G‖` over (possibly overlapping) groups, each with its own norm.
pub fn build_sum_of_norms(n: usize, groups: &[Group]) -> Result<QsFunction, QsError> {
    check_n(n)?;
    if groups.is_empty() {
        return Err(QsError::Partition("at least one group is required".into()));
    }
    let mut a_trip = Vec::new();
    let mut b_trip = Vec::new();
    let mut b = Vec::new();
    let mut blocks = Vec::new();
    let mut row = 0;
    let mut col = 0;
    for (gi, g) in groups.iter().enumerate() {
        let k = g.indices.len();
        if k == 0 {
            return Err(QsError::Partition(format!("group {gi} is empty")));
        }
        if let Some(&i) = g.indices.iter().find(|&&i| i >= n) {
            return Err(QsError::Partition(format!(
                "group {gi} has index {i} ≥ n = {n}"
            )));
        }
        let mut sorted = g.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k {
            return Err(QsError::Partition(format!("group {gi} repeats an index")));
        }
        match g.norm {
            NormKind::L1 => {
                for (j, &i) in g.indices.iter().enumerate() {
                    a_trip.push((row + j, col + j, 1.0));
                    a_trip.push((row + k + j, col + j, -1.0));
                    b_trip.push((col + j, i, 1.0));
                }
                b.extend(std::iter::repeat_n(-1.0, 2 * k));
                blocks.push(Cone::Orthant(2 * k));
                row += 2 * k;
                col += k;
            }
            NormKind::L2 => {
                for (j, &i) in g.indices.iter().enumerate() {
                    a_trip.push((row + 1 + j, col + j, 1.0));
                    b_trip.push((col + j, i, 1.0));
                }
                b.push(-1.0);
                b.extend(std::iter::repeat_n(0.0, k));
                blocks.push(Cone::SecondOrder(k + 1));
                row += k + 1;
                col += k;
            }
            NormKind::LInf => {
                for (j, &i) in g.indices.iter().enumerate() {
                    a_trip.push((row + j, col + j, 1.0));
                    a_trip.push((row + k + j, col + k + j, 1.0));
                    a_trip.push((row + 2 * k, col + j, -1.0));
                    a_trip.push((row + 2 * k, col + k + j, -1.0));
                    b_trip.push((col + j, i, 1.0));
                    b_trip.push((col + k + j, i, -1.0));
                }
                b.extend(std::iter::repeat_n(0.0, 2 * k));
                b.push(-1.0);
                blocks.push(Cone::Orthant(2 * k + 1));
                row += 2 * k + 1;
                col += 2 * k;
            }
        }
    }
    let a = Csr::from_triplets(row, col, &a_trip)?;
    let bmat = Csr::from_triplets(col, n, &b_trip)?;
    let g = QsFunction::new(a, b, vec![0.0; col], bmat, ConeProduct::new(blocks)?)?;
    Ok(closed(
        g,
        ClosedKind::SumOfNorms {
            groups: groups.iter().map(|g| g.indices.clone()).collect(),
            norms: groups.iter().map(|g| g.norm).collect(),
        },
    ))
}

/// Group lasso penalty `Σ ‖x_G‖₂` over consecutive groups of the given
/// sizes.
pub fn build_group_l2(sizes: &[usize]) -> Result<QsFunction, QsError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(QsError::Partition("group sizes must be positive".into()));
    }
    let mut start = 0;
    let groups: Vec<Group> = sizes
        .iter()
        .map(|&s| {
            start += s;
            Group {
                indices: (start - s..start).collect(),
                norm: NormKind::L2,
            }
        })
        .collect();
    let g = build_sum_of_norms(start, &groups)?;
    Ok(closed(
        g,
        ClosedKind::GroupL2 {
            groups: groups.into_iter().map(|g| g.indices).collect(),
        },
    ))
}

/// `‖Nx‖₁`: `A = I_m ⊗ (1, −1)ᵀ`, `b = −1`, `B = N`, `K = ℝ₊²ᵐ`.
pub fn build_graph_l1(incidence: &Csr) -> Result<QsFunction, QsError> {
    let m = incidence.rows();
    if m == 0 {
        return Err(QsError::Dimension("the graph has no edges".into()));
    }
    let trip: Vec<_> = (0..m)
        .flat_map(|i| [(2 * i, i, 1.0), (2 * i + 1, i, -1.0)])
        .collect();
    let a = Csr::from_triplets(2 * m, m, &trip)?;
    let g = QsFunction::new(
        a,
        vec![-1.0; 2 * m],
        vec![0.0; m],
        incidence.clone(),
        orthant(2 * m)?,
    )?;
    Ok(closed(
        g,
        ClosedKind::GraphL1 {
            incidence: incidence.clone(),
        },
    ))
}

/// Forward-difference matrix of the path graph on `n` nodes; row `i` is
/// `x_{i+1} − x_i`.
pub fn path_incidence(n: usize) -> Csr {
    let trip: Vec<_> = (0..n.saturating_sub(1))
        .flat_map(|i| [(i, i, -1.0), (i, i + 1, 1.0)])
        .collect();
    Csr::from_triplets(n.saturating_sub(1), n, &trip).expect("indices in range")
}

/// Anisotropic 1-D total variation `Σ |x_{i+1} − x_i|`.
pub fn build_tv_1d(n: usize) -> Result<QsFunction, QsError> {
    if n < 2 {
        return Err(QsError::Dimension("total variation needs n ≥ 2".into()));
    }
    let g = build_graph_l1(&path_incidence(n))?;
    Ok(closed(g, ClosedKind::Tv1d))
}

/// `Σ_G ‖(Nx)_G‖₂` where the groups partition the rows of `N` (pairs of
/// differences for isotropic total variation).
pub fn build_isotropic_tv(incidence: &Csr, groups: &[Vec<usize>]) -> Result<QsFunction, QsError> {
    let m = incidence.rows();
    let mut seen = vec![false; m];
    for (gi, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(QsError::Partition(format!("group {gi} is empty")));
        }
        for &r in g {
            if r >= m || seen[r] {
                return Err(QsError::Partition(format!(
                    "row {r} is out of range or repeated"
                )));
            }
            seen[r] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(QsError::Partition(
            "groups must cover every row of N".into(),
        ));
    }
    let mut a_trip = Vec::new();
    let mut b = Vec::new();
    let mut blocks = Vec::new();
    let mut row = 0;
    for g in groups {
        for (j, &r) in g.iter().enumerate() {
            a_trip.push((row + 1 + j, r, 1.0));
        }
        b.push(-1.0);
        b.extend(std::iter::repeat_n(0.0, g.len()));
        blocks.push(Cone::SecondOrder(g.len() + 1));
        row += g.len() + 1;
    }
    let a = Csr::from_triplets(row, m, &a_trip)?;
    QsFunction::new(
        a,
        b,
        vec![0.0; m],
        incidence.clone(),
        ConeProduct::new(blocks)?,
    )
}

/// `x ↦ Σᵢ γ(xᵢ)` for a scalar QS function `γ` with an orthant cone,
/// tagged for the separable solve.
pub fn build_separable(gamma: &QsFunction, n: usize) -> Result<QsFunction, QsError> {
    check_n(n)?;
    if gamma.n() != 1 || !gamma.cone().is_orthant_only() {
        return Err(QsError::NonOrthantGamma);
    }
    let g = concat(gamma, n)?;
    g.with_strategy(SolveStrategy::Separable { block: gamma.ell() })
}
