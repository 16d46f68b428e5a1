use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use super::{Dplr, LinopsError};

/// Positive definite metric `H` of a scaled proximal operator.
#[derive(Debug, Clone)]
pub enum Metric {
    /// `H = σ I`
    ScaledIdentity { n: usize, sigma: f64 },
    /// `H = diag(h)`
    Diagonal(Vec<f64>),
    /// `H⁻¹ = Λ₁ + U₁M₁U₁ᵀ` stored natively, with the direct form of `H`
    /// alongside.
    DiagPlusLowRankInverse(Box<DplrMetric>),
}

#[derive(Debug, Clone)]
pub struct DplrMetric {
    inverse: Dplr,
    direct: Dplr,
}

impl DplrMetric {
    pub fn inverse(&self) -> &Dplr {
        &self.inverse
    }

    pub fn direct(&self) -> &Dplr {
        &self.direct
    }
}

impl Metric {
    pub fn identity(n: usize) -> Self {
        Metric::ScaledIdentity { n, sigma: 1.0 }
    }

    pub fn scaled_identity(n: usize, sigma: f64) -> Result<Self, LinopsError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(LinopsError::NotPositiveDefinite(format!("scale {sigma}")));
        }
        Ok(Metric::ScaledIdentity { n, sigma })
    }

    pub fn diagonal(h: Vec<f64>) -> Result<Self, LinopsError> {
        if let Some(v) = h.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(LinopsError::NotPositiveDefinite(format!(
                "diagonal entry {v}"
            )));
        }
        Ok(Metric::Diagonal(h))
    }

    /// Metric whose inverse is the given diagonal-plus-low-rank matrix.
    pub fn from_inverse(inverse: Dplr) -> Result<Self, LinopsError> {
        check_diag(&inverse.d)?;
        let direct = inverse.inverse()?;
        Ok(Metric::DiagPlusLowRankInverse(Box::new(DplrMetric {
            inverse,
            direct,
        })))
    }

    /// Metric given in direct form `H = Λ + UMUᵀ`.
    pub fn from_direct(direct: Dplr) -> Result<Self, LinopsError> {
        check_diag(&direct.d)?;
        let inverse = direct.inverse()?;
        Ok(Metric::DiagPlusLowRankInverse(Box::new(DplrMetric {
            inverse,
            direct,
        })))
    }

    pub fn dim(&self) -> usize {
        match self {
            Metric::ScaledIdentity { n, .. } => *n,
            Metric::Diagonal(h) => h.len(),
            Metric::DiagPlusLowRankInverse(m) => m.inverse.dim(),
        }
    }

    pub fn apply_h(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Metric::ScaledIdentity { sigma, .. } => x.iter().map(|v| sigma * v).collect(),
            Metric::Diagonal(h) => x.iter().zip(h).map(|(a, b)| a * b).collect(),
            Metric::DiagPlusLowRankInverse(m) => m.direct.apply(x),
        }
    }

    pub fn apply_hinv(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Metric::ScaledIdentity { sigma, .. } => x.iter().map(|v| v / sigma).collect(),
            Metric::Diagonal(h) => x.iter().zip(h).map(|(a, b)| a / b).collect(),
            Metric::DiagPlusLowRankInverse(m) => m.inverse.apply(x),
        }
    }

    /// `H⁻¹` as `Λ₁ + U₁M₁U₁ᵀ` (rank 0 for the diagonal variants).
    pub fn inverse_dplr(&self) -> Cow<'_, Dplr> {
        match self {
            Metric::ScaledIdentity { n, sigma } => {
                Cow::Owned(Dplr::diagonal(vec![1.0 / sigma; *n]))
            }
            Metric::Diagonal(h) => Cow::Owned(Dplr::diagonal(h.iter().map(|v| 1.0 / v).collect())),
            Metric::DiagPlusLowRankInverse(m) => Cow::Borrowed(&m.inverse),
        }
    }

    /// `H` as `Λ + UMUᵀ`.
    pub fn direct_dplr(&self) -> Cow<'_, Dplr> {
        match self {
            Metric::ScaledIdentity { n, sigma } => Cow::Owned(Dplr::diagonal(vec![*sigma; *n])),
            Metric::Diagonal(h) => Cow::Owned(Dplr::diagonal(h.clone())),
            Metric::DiagPlusLowRankInverse(m) => Cow::Borrowed(&m.direct),
        }
    }

    /// `‖x‖²_H`
    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        crate::vecops::dot(x, &self.apply_h(x))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Metric::ScaledIdentity { n, sigma } => DMatrix::identity(*n, *n) * *sigma,
            Metric::Diagonal(h) => DMatrix::from_diagonal(&DVector::from_row_slice(h)),
            Metric::DiagPlusLowRankInverse(m) => m.direct.to_dense(),
        }
    }

    pub fn to_dense_inverse(&self) -> DMatrix<f64> {
        self.inverse_dplr().to_dense()
    }
}

fn check_diag(d: &[f64]) -> Result<(), LinopsError> {
    if let Some(v) = d.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(LinopsError::NotPositiveDefinite(format!(
            "diagonal entry {v}"
        )));
    }
    Ok(())
}
