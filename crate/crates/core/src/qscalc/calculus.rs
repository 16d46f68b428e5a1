//! Addition, concatenation, affine composition, Moreau–Yosida envelopes and
//! the lifting of quadratic terms into a second-order cone.

use nalgebra::{DMatrix, DVector};

use super::{ClosedForm, ClosedKind, QsError, QsFunction, SolveStrategy};
use crate::cones::{Cone, ConeProduct};
use crate::linops::{Csr, Metric, StructuredMatrix};

/// `g₁ + g₂`
pub fn add(g1: &QsFunction, g2: &QsFunction) -> Result<QsFunction, QsError> {
    if g1.n() != g2.n() {
        return Err(QsError::Dimension(format!(
            "adding functions on R^{} and R^{}",
            g1.n(),
            g2.n()
        )));
    }
    let a = g1.a().block_diag(g2.a());
    let b = [g1.b(), g2.b()].concat();
    let d = [g1.d(), g2.d()].concat();
    let bmat = g1.bmat().vstack(g2.bmat())?;
    let cone = g1.cone().product(g2.cone());
    QsFunction::new(a, b, d, bmat, cone)
}

/// `x ↦ Σᵢ g₀(xⁱ)` over `k` consecutive partitions of size `n₀`.
pub fn concat(g0: &QsFunction, k: usize) -> Result<QsFunction, QsError> {
    if k == 0 {
        return Err(QsError::Dimension("concatenation needs k ≥ 1".into()));
    }
    if k == 1 {
        return Ok(g0.clone());
    }
    let a = g0.a().kron_identity(k);
    let bmat = g0.bmat().kron_identity(k);
    let b = g0.b().repeat(k);
    let d = g0.d().repeat(k);
    let cone = g0.cone().repeat(k);
    let mut g = QsFunction::new(a, b, d, bmat, cone)?;
    if let SolveStrategy::Separable { .. } = g0.strategy() {
        g = g.with_strategy(g0.strategy().clone())?;
    }
    let n0 = g0.n();
    let closed = g0.closed_form().and_then(|cf| {
        let kind = match &cf.kind {
            ClosedKind::L1 => ClosedKind::L1,
            ClosedKind::Quadratic => ClosedKind::Quadratic,
            ClosedKind::GroupL2 { groups } => ClosedKind::GroupL2 {
                groups: (0..k)
                    .flat_map(|i| {
                        groups
                            .iter()
                            .map(move |g| g.iter().map(|j| j + i * n0).collect())
                    })
                    .collect(),
            },
            _ => return None,
        };
        Some(ClosedForm {
            kind,
            weight: cf.weight,
        })
    });
    Ok(g.with_closed_form(closed))
}

/// `x ↦ g₀(Px − p)`
pub fn affine_compose(
    g0: &QsFunction,
    p_mat: &StructuredMatrix,
    p: &[f64],
) -> Result<QsFunction, QsError> {
    if p_mat.rows() != g0.n() || p.len() != g0.n() {
        return Err(QsError::Dimension(format!(
            "P is {}x{} and p has {} entries, g has n = {}",
            p_mat.rows(),
            p_mat.cols(),
            p.len(),
            g0.n()
        )));
    }
    let bp = g0.bmat().apply(p);
    let d: Vec<f64> = g0.d().iter().zip(&bp).map(|(a, b)| a - b).collect();
    let bmat = g0.bmat().matmul(&p_mat.to_csr())?;
    QsFunction::new(g0.a().clone(), g0.b().to_vec(), d, bmat, g0.cone().clone())
}

/// Pivoted Cholesky factor of a positive semidefinite `Q`: returns `R` with
/// `rank(Q)` rows and `RᵀR = Q`. Pivots below `1e-12·max diag(Q)` end the
/// factorization; a significantly negative remainder is an error.
pub fn pivoted_cholesky(q: &DMatrix<f64>) -> Result<DMatrix<f64>, QsError> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(QsError::Dimension(format!("Q is {}x{}", n, q.ncols())));
    }
    let asym = (q - q.transpose()).amax();
    let scale = q
        .diagonal()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(q.amax());
    if asym > 1e-10 * scale.max(1.0) {
        return Err(QsError::NotPsd(format!("asymmetry {asym:e}")));
    }
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut work = q.clone();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    loop {
        let (piv, dmax) =
            (0..n)
                .map(|i| (i, work[(i, i)]))
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
        if n == 0 || dmax <= tol {
            break;
        }
        let col = work.column(piv) / dmax.sqrt();
        work -= &col * col.transpose();
        rows.push(col);
    }
    let min_diag = (0..n).map(|i| work[(i, i)]).fold(0.0_f64, f64::min);
    if min_diag < -1e-8 * scale.max(1.0) {
        return Err(QsError::NotPsd(format!("negative pivot {min_diag:e}")));
    }
    let mut r = DMatrix::zeros(rows.len(), n);
    for (i, row) in rows.iter().enumerate() {
        r.set_row(i, &row.transpose());
    }
    Ok(r)
}

/// Lifts `sup{ yᵀ(B₀x + d₀) − ½yᵀQy : A₀y ⪰_{K₀} b₀ }` into QS form with an
/// epigraph variable `t ≥ ‖Ry‖²` appended to `y` and the second-order block
/// `((t+1)/2, (t−1)/2, Ry)` placed ahead of `K₀`.
pub fn lift_quadratic(
    a0: &Csr,
    b0: &[f64],
    d0: &[f64],
    b0mat: &Csr,
    k0: &ConeProduct,
    q: &DMatrix<f64>,
) -> Result<QsFunction, QsError> {
    let ell0 = b0mat.rows();
    if a0.cols() != ell0
        || d0.len() != ell0
        || q.nrows() != ell0
        || a0.rows() != k0.dim()
        || b0.len() != k0.dim()
    {
        return Err(QsError::Dimension(
            "inconsistent data for quadratic lifting".into(),
        ));
    }
    let r = pivoted_cholesky(q)?;
    let rank = r.nrows();
    let t = ell0;
    let mut trip = vec![(0, t, 0.5), (1, t, 0.5)];
    for i in 0..rank {
        for j in 0..ell0 {
            if r[(i, j)] != 0.0 {
                trip.push((2 + i, j, r[(i, j)]));
            }
        }
    }
    let off = rank + 2;
    trip.extend(a0.triplets().into_iter().map(|(i, j, v)| (i + off, j, v)));
    let a = Csr::from_triplets(off + a0.rows(), ell0 + 1, &trip)?;
    let mut b = vec![-0.5, 0.5];
    b.extend(std::iter::repeat_n(0.0, rank));
    b.extend_from_slice(b0);
    let mut d = d0.to_vec();
    d.push(-0.5);
    let bmat = b0mat.vstack(&Csr::zeros(1, b0mat.cols()))?;
    let soc = ConeProduct::new(vec![Cone::SecondOrder(rank + 2)])?;
    let cone = if k0.is_empty() { soc } else { soc.product(k0) };
    QsFunction::new(a, b, d, bmat, cone)
}

/// The Moreau–Yosida envelope `z ↦ min_x ½‖z − x‖²_H + g₀(x)` as a QS
/// function, using `Q = B₀H⁻¹B₀ᵀ`.
pub fn moreau_yosida(g0: &QsFunction, h: &Metric) -> Result<QsFunction, QsError> {
    if h.dim() != g0.n() {
        return Err(QsError::Dimension(format!(
            "metric order {} vs n = {}",
            h.dim(),
            g0.n()
        )));
    }
    let ell0 = g0.ell();
    // Q = B₀ (H⁻¹ B₀ᵀ), one column per dual variable.
    let mut hinv_bt = DMatrix::zeros(g0.n(), ell0);
    let bt = g0.bmat_t();
    for j in 0..ell0 {
        let mut row = vec![0.0; g0.n()];
        for (c, v) in g0.bmat().row(j) {
            row[c] = v;
        }
        hinv_bt.set_column(j, &DVector::from_vec(h.apply_hinv(&row)));
    }
    let q = bt.transpose().mul_dense(&hinv_bt);
    let q = (&q + q.transpose()) * 0.5;
    lift_quadratic(g0.a(), g0.b(), g0.d(), g0.bmat(), g0.cone(), &q)
}
