use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut, LU};

use super::{LinopsError, SolveOp};

/// How the middle factor of `D + U M Uᵀ` is supplied.
#[derive(Debug, Clone, Copy)]
pub enum Middle<'a> {
    Matrix(&'a DMatrix<f64>),
    /// `M⁻¹` given directly (avoids forming and re-inverting `M`).
    Inverse(&'a DMatrix<f64>),
}

/// LU of a small dense matrix, rejecting numerically singular input.
pub(crate) fn small_lu(
    m: DMatrix<f64>,
    what: &str,
) -> Result<LU<f64, nalgebra::Dyn, nalgebra::Dyn>, LinopsError> {
    let scale = m.amax();
    let lu = m.lu();
    let u = lu.u();
    let tiny = u
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if u.nrows() > 0 && !(tiny > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
        return Err(LinopsError::Singular(what.to_string()));
    }
    Ok(lu)
}

/// `(D + U M Uᵀ)⁻¹ = D₁ + U₁ M₁ U₁ᵀ`, with `D₁` kept as a solve with `D`,
/// `U₁ = D⁻¹U` and `M₁ = −(M⁻¹ + UᵀU₁)⁻¹` held through the LU of the
/// capacitance matrix `M⁻¹ + UᵀU₁`.
#[derive(Debug, Clone)]
pub struct SwTriple<S> {
    pub d1: S,
    pub u1: DMatrix<f64>,
    capacitance: DMatrix<f64>,
    cap_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Sherman–Woodbury inversion of `D + U M Uᵀ` for symmetric `D` and `M`.
pub fn swinv<S: SolveOp>(
    d: S,
    u: &DMatrix<f64>,
    mid: Middle<'_>,
) -> Result<SwTriple<S>, LinopsError> {
    let n = d.dim();
    let k = u.ncols();
    if u.nrows() != n {
        return Err(LinopsError::Dimension(format!(
            "U has {} rows, D has order {n}",
            u.nrows()
        )));
    }
    let m_inv = match mid {
        Middle::Inverse(mi) => mi.clone(),
        Middle::Matrix(m) => {
            if m.nrows() != k || m.ncols() != k {
                return Err(LinopsError::Dimension(format!(
                    "M is {}x{}, expected {k}x{k}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if k == 0 {
                DMatrix::zeros(0, 0)
            } else {
                small_lu(m.clone(), "middle matrix M")?
                    .try_inverse()
                    .ok_or_else(|| LinopsError::Singular("middle matrix M".into()))?
            }
        }
    };
    if m_inv.nrows() != k || m_inv.ncols() != k {
        return Err(LinopsError::Dimension(format!(
            "M⁻¹ is {}x{}, expected {k}x{k}",
            m_inv.nrows(),
            m_inv.ncols()
        )));
    }
    let mut u1 = DMatrix::zeros(n, k);
    for j in 0..k {
        let col: Vec<f64> = u.column(j).iter().copied().collect();
        u1.set_column(j, &DVector::from_vec(d.solve(&col)));
    }
    let mut capacitance = m_inv + u.transpose() * &u1;
    capacitance = (&capacitance + capacitance.transpose()) * 0.5;
    let cap_lu = small_lu(capacitance.clone(), "capacitance matrix M⁻¹ + UᵀD⁻¹U")?;
    Ok(SwTriple {
        d1: d,
        u1,
        capacitance,
        cap_lu,
    })
}

impl<S: SolveOp> SwTriple<S> {
    pub fn dim(&self) -> usize {
        self.u1.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u1.ncols()
    }

    /// Applies `(D + U M Uᵀ)⁻¹`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.d1.solve(x);
        if self.rank() > 0 {
            let t = self.u1.tr_mul(&DVectorView::from_slice(x, x.len()));
            let w = self.cap_lu.solve(&t).expect("capacitance factored");
            let n = out.len();
            DVectorViewMut::from_slice(&mut out, n).gemv(-1.0, &self.u1, &w, 1.0);
        }
        out
    }

    /// Explicit `M₁ = −(M⁻¹ + UᵀU₁)⁻¹`.
    pub fn m1(&self) -> DMatrix<f64> {
        let k = self.rank();
        if k == 0 {
            return DMatrix::zeros(0, 0);
        }
        -self
            .cap_lu
            .solve(&DMatrix::identity(k, k))
            .expect("capacitance factored")
    }

    /// `M₁⁻¹ = −(M⁻¹ + UᵀU₁)`, exact.
    pub fn m1_inv(&self) -> DMatrix<f64> {
        -&self.capacitance
    }
}

impl<S: SolveOp> SolveOp for SwTriple<S> {
    fn dim(&self) -> usize {
        SwTriple::dim(self)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.apply(b)
    }
}

/// Solve with a positive diagonal.
#[derive(Debug, Clone)]
pub struct DiagSolve(pub Vec<f64>);

impl SolveOp for DiagSolve {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        b.iter().zip(&self.0).map(|(x, d)| x / d).collect()
    }
}

/// Symmetric diagonal-plus-low-rank matrix `diag(d) + U M Uᵀ`.
#[derive(Debug, Clone)]
pub struct Dplr {
    pub d: Vec<f64>,
    pub u: DMatrix<f64>,
    pub m: DMatrix<f64>,
    /// `M⁻¹` when known exactly.
    pub m_inv: Option<DMatrix<f64>>,
}

impl Dplr {
    pub fn new(d: Vec<f64>, u: DMatrix<f64>, m: DMatrix<f64>) -> Result<Self, LinopsError> {
        if u.nrows() != d.len() || m.nrows() != u.ncols() || m.ncols() != u.ncols() {
            return Err(LinopsError::Dimension(format!(
                "diag {} with U {}x{} and M {}x{}",
                d.len(),
                u.nrows(),
                u.ncols(),
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self {
            d,
            u,
            m,
            m_inv: None,
        })
    }

    pub fn diagonal(d: Vec<f64>) -> Self {
        let n = d.len();
        Self {
            d,
            u: DMatrix::zeros(n, 0),
            m: DMatrix::zeros(0, 0),
            m_inv: Some(DMatrix::zeros(0, 0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().zip(&self.d).map(|(a, b)| a * b).collect();
        if self.rank() > 0 {
            let t = self.u.tr_mul(&DVectorView::from_slice(x, x.len()));
            let n = out.len();
            DVectorViewMut::from_slice(&mut out, n).gemv(1.0, &self.u, &(&self.m * t), 1.0);
        }
        out
    }

    /// Inverse in the same shape, via [`swinv`].
    pub fn inverse(&self) -> Result<Dplr, LinopsError> {
        if self.d.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(LinopsError::Singular("diagonal part".into()));
        }
        let mid = match &self.m_inv {
            Some(mi) => Middle::Inverse(mi),
            None => Middle::Matrix(&self.m),
        };
        let t = swinv(DiagSolve(self.d.clone()), &self.u, mid)?;
        Ok(Dplr {
            d: self.d.iter().map(|v| 1.0 / v).collect(),
            m: t.m1(),
            m_inv: Some(t.m1_inv()),
            u: t.u1,
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.d))
            + &self.u * &self.m * self.u.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_example() {
        let u = DMatrix::from_element(1, 1, 1.0);
        let m = DMatrix::from_element(1, 1, 3.0);
        let t = swinv(DiagSolve(vec![2.0]), &u, Middle::Matrix(&m)).unwrap();
        // 0.5 + 0.5·(−6/5)·0.5
        assert!((t.m1()[(0, 0)] + 1.2).abs() < 1e-15);
        assert!((t.apply(&[1.0])[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn empty_update_is_plain_inverse() {
        let u = DMatrix::zeros(3, 0);
        let m = DMatrix::zeros(0, 0);
        let t = swinv(DiagSolve(vec![2.0, 4.0, 8.0]), &u, Middle::Matrix(&m)).unwrap();
        assert_eq!(t.apply(&[1.0, 1.0, 1.0]), vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn singular_middle_is_reported() {
        let u = DMatrix::from_element(2, 1, 1.0);
        let m = DMatrix::zeros(1, 1);
        let err = swinv(DiagSolve(vec![1.0, 1.0]), &u, Middle::Matrix(&m)).unwrap_err();
        assert!(matches!(err, LinopsError::Singular(ref s) if s.contains("middle")));
        // D + U M Uᵀ = diag(1,1) − 11ᵀ/2·2 is singular: capacitance fails
        let m = DMatrix::from_element(1, 1, -0.5);
        let err = swinv(DiagSolve(vec![1.0, 1.0]), &u, Middle::Matrix(&m)).unwrap_err();
        assert!(matches!(err, LinopsError::Singular(ref s) if s.contains("capacitance")));
    }

    #[test]
    fn random_triples_match_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let d: Vec<f64> = (0..5).map(|_| rng.random_range(0.5..3.0)).collect();
            let u = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
            let g = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let m = &g * g.transpose() + DMatrix::identity(2, 2) * 0.1;
            let a = Dplr::new(d, u, m).unwrap();
            let inv = a.inverse().unwrap().to_dense();
            let dense_inv = a.to_dense().try_inverse().unwrap();
            assert!((inv - &dense_inv).norm() <= 1e-10 * dense_inv.norm());
        }
    }
}
