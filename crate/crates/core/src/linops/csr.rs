use nalgebra::DMatrix;

use super::LinopsError;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: d.to_vec(),
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinopsError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(LinopsError::Dimension(format!(
                    "triplet ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut data: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *data.last_mut().expect("previous entry") += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            data,
        }
        .pruned())
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t).expect("indices in range")
    }

    fn pruned(self) -> Self {
        if self.data.iter().all(|v| *v != 0.0) {
            return self;
        }
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Entries `(col, value)` of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let rg = self.indptr[r]..self.indptr[r + 1];
        self.indices[rg.clone()]
            .iter()
            .copied()
            .zip(self.data[rg].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            t.extend(self.row(r).map(|(c, v)| (r, c, v)));
        }
        t
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.indptr
            .windows(2)
            .map(|w| {
                let rg = w[0]..w[1];
                self.indices[rg.clone()]
                    .iter()
                    .zip(&self.data[rg])
                    .map(|(&c, v)| v * x[c])
                    .sum()
            })
            .collect()
    }

    /// `y = Aᵀ x`
    pub fn apply_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (w, &xr) in self.indptr.windows(2).zip(x) {
            if xr == 0.0 {
                continue;
            }
            let rg = w[0]..w[1];
            for (&c, v) in self.indices[rg.clone()].iter().zip(&self.data[rg]) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Csr {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v))
            .collect();
        Csr::from_triplets(self.cols, self.rows, &t).expect("transposed indices in range")
    }

    pub fn scaled(&self, alpha: f64) -> Csr {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= alpha;
        }
        out.pruned()
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &Csr) -> Result<Csr, LinopsError> {
        if self.cols != other.rows {
            return Err(LinopsError::Dimension(format!(
                "product of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![0.0; other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut touched = Vec::new();
        let mut t = Vec::new();
        for r in 0..self.rows {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                t.push((r, c, acc[c]));
            }
        }
        Csr::from_triplets(self.rows, other.cols, &t)
    }

    /// Product with a dense matrix.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        debug_assert_eq!(self.cols, m.nrows());
        let mut out = DMatrix::zeros(self.rows, m.ncols());
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for j in 0..m.ncols() {
                    out[(r, j)] += a * m[(k, j)];
                }
            }
        }
        out
    }

    /// Stacks `[self; other]`.
    pub fn vstack(&self, other: &Csr) -> Result<Csr, LinopsError> {
        if self.cols != other.cols {
            return Err(LinopsError::Dimension(format!(
                "vstack of {} and {} columns",
                self.cols, other.cols
            )));
        }
        let mut t = self.triplets();
        t.extend(
            other
                .triplets()
                .into_iter()
                .map(|(r, c, v)| (r + self.rows, c, v)),
        );
        Csr::from_triplets(self.rows + other.rows, self.cols, &t)
    }

    /// Block-diagonal `diag(self, other)`.
    pub fn block_diag(&self, other: &Csr) -> Csr {
        let mut t = self.triplets();
        t.extend(
            other
                .triplets()
                .into_iter()
                .map(|(r, c, v)| (r + self.rows, c + self.cols, v)),
        );
        Csr::from_triplets(self.rows + other.rows, self.cols + other.cols, &t)
            .expect("block indices in range")
    }

    /// `I_k ⊗ self`.
    pub fn kron_identity(&self, k: usize) -> Csr {
        let base = self.triplets();
        let mut t = Vec::with_capacity(base.len() * k);
        for i in 0..k {
            t.extend(
                base.iter()
                    .map(|&(r, c, v)| (r + i * self.rows, c + i * self.cols, v)),
            );
        }
        Csr::from_triplets(self.rows * k, self.cols * k, &t).expect("kron indices in range")
    }

    /// Appends `extra` zero columns on the right.
    pub fn pad_cols(&self, extra: usize) -> Csr {
        let mut out = self.clone();
        out.cols += extra;
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}
