use nalgebra::{DMatrix, DVector};

use super::{Csr, Dplr, SymBanded};

/// A linear operator tagged with its structure.
#[derive(Debug, Clone)]
pub enum StructuredMatrix {
    Diagonal(Vec<f64>),
    /// Symmetric banded.
    Banded(SymBanded),
    DiagPlusLowRank(Dplr),
    BlockDiag(Vec<DMatrix<f64>>),
    Sparse(Csr),
    Dense(DMatrix<f64>),
}

impl StructuredMatrix {
    pub fn identity(n: usize) -> Self {
        StructuredMatrix::Diagonal(vec![1.0; n])
    }

    pub fn rows(&self) -> usize {
        match self {
            StructuredMatrix::Diagonal(d) => d.len(),
            StructuredMatrix::Banded(b) => b.dim(),
            StructuredMatrix::DiagPlusLowRank(m) => m.dim(),
            StructuredMatrix::BlockDiag(bs) => bs.iter().map(|b| b.nrows()).sum(),
            StructuredMatrix::Sparse(s) => s.rows(),
            StructuredMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            StructuredMatrix::BlockDiag(bs) => bs.iter().map(|b| b.ncols()).sum(),
            StructuredMatrix::Sparse(s) => s.cols(),
            StructuredMatrix::Dense(m) => m.ncols(),
            _ => self.rows(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            StructuredMatrix::Diagonal(d) => d.iter().zip(x).map(|(a, b)| a * b).collect(),
            StructuredMatrix::Banded(b) => b.apply(x),
            StructuredMatrix::DiagPlusLowRank(m) => m.apply(x),
            StructuredMatrix::BlockDiag(bs) => {
                let mut out = Vec::with_capacity(self.rows());
                let mut off = 0;
                for b in bs {
                    let xb = DVector::from_row_slice(&x[off..off + b.ncols()]);
                    out.extend((b * xb).iter());
                    off += b.ncols();
                }
                out
            }
            StructuredMatrix::Sparse(s) => s.apply(x),
            StructuredMatrix::Dense(m) => (m * DVector::from_row_slice(x)).as_slice().to_vec(),
        }
    }

    pub fn apply_t(&self, x: &[f64]) -> Vec<f64> {
        match self {
            StructuredMatrix::BlockDiag(bs) => {
                let mut out = Vec::with_capacity(self.cols());
                let mut off = 0;
                for b in bs {
                    let xb = DVector::from_row_slice(&x[off..off + b.nrows()]);
                    out.extend(b.tr_mul(&xb).iter());
                    off += b.nrows();
                }
                out
            }
            StructuredMatrix::Sparse(s) => s.apply_t(x),
            StructuredMatrix::Dense(m) => m.tr_mul(&DVector::from_row_slice(x)).as_slice().to_vec(),
            // The remaining variants are symmetric.
            _ => self.apply(x),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            StructuredMatrix::Dense(m) => m.clone(),
            StructuredMatrix::Sparse(s) => s.to_dense(),
            StructuredMatrix::DiagPlusLowRank(m) => m.to_dense(),
            _ => {
                let (r, c) = (self.rows(), self.cols());
                let mut m = DMatrix::zeros(r, c);
                let mut e = vec![0.0; c];
                for j in 0..c {
                    e[j] = 1.0;
                    m.set_column(j, &DVector::from_vec(self.apply(&e)));
                    e[j] = 0.0;
                }
                m
            }
        }
    }

    /// Sparse copy; low-rank and dense variants become fully populated.
    pub fn to_csr(&self) -> Csr {
        match self {
            StructuredMatrix::Sparse(s) => s.clone(),
            StructuredMatrix::Diagonal(d) => Csr::diagonal(d),
            _ => Csr::from_dense(&self.to_dense()),
        }
    }
}

impl From<Csr> for StructuredMatrix {
    fn from(s: Csr) -> Self {
        StructuredMatrix::Sparse(s)
    }
}

impl From<DMatrix<f64>> for StructuredMatrix {
    fn from(m: DMatrix<f64>) -> Self {
        StructuredMatrix::Dense(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_agree_with_dense_form() {
        let blocks = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::from_element(1, 1, 5.0),
        ];
        let variants = vec![
            StructuredMatrix::Diagonal(vec![1.0, -2.0, 3.0]),
            StructuredMatrix::Banded(SymBanded::tridiagonal(&[2.0, 2.0, 2.0], &[-1.0, 0.5])),
            StructuredMatrix::BlockDiag(blocks),
            StructuredMatrix::Sparse(
                Csr::from_triplets(3, 3, &[(0, 2, 1.0), (2, 1, -1.0)]).unwrap(),
            ),
        ];
        let x = [0.3, -1.1, 2.0];
        for m in variants {
            let d = m.to_dense();
            let xv = DVector::from_row_slice(&x);
            let y = m.apply(&x);
            let yt = m.apply_t(&x);
            assert!((DVector::from_vec(y) - &d * &xv).amax() < 1e-14);
            assert!((DVector::from_vec(yt) - d.tr_mul(&xv)).amax() < 1e-14);
            assert!((m.to_csr().to_dense() - d).amax() < 1e-14);
        }
    }
}
