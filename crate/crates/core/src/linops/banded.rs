use super::LinopsError;

/// Symmetric matrix with half-bandwidth `w`, lower band stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    w: usize,
    band: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, w: usize) -> Self {
        Self {
            n,
            w,
            band: vec![0.0; n * (w + 1)],
        }
    }

    /// Symmetric tridiagonal matrix from its diagonal and off-diagonal.
    pub fn tridiagonal(diag: &[f64], off: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), 1);
        for (i, d) in diag.iter().enumerate() {
            m.add(i, i, *d);
        }
        for (i, o) in off.iter().enumerate() {
            m.add(i + 1, i, *o);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.w
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.w);
        i * (self.w + 1) + (j + self.w - i)
    }

    /// Adds `v` to entry `(i, j)` (and, implicitly, `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.band[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.w {
            0.0
        } else {
            self.band[self.idx(i, j)]
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.w);
            y[i] += self.band[self.idx(i, i)] * x[i];
            for j in lo..i {
                let a = self.band[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
        }
        y
    }

    /// `LDLᵀ` factorization without pivoting, `O(n w²)`.
    pub fn factor(&self) -> Result<BandLdl, LinopsError> {
        let (n, w) = (self.n, self.w);
        let mut l = self.band.clone();
        let mut d = vec![0.0; n];
        let at = |i: usize, j: usize| i * (w + 1) + (j + w - i);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            for j in lo..i {
                let mut s = l[at(i, j)];
                for k in lo.max(j.saturating_sub(w))..j {
                    s -= l[at(i, k)] * l[at(j, k)] * d[k];
                }
                l[at(i, j)] = s / d[j];
            }
            let mut s = l[at(i, i)];
            for k in lo..i {
                let lik = l[at(i, k)];
                s -= lik * lik * d[k];
            }
            if !(s > 0.0) || !s.is_finite() {
                return Err(LinopsError::NotPositiveDefinite(format!(
                    "banded pivot {i} is {s:e}"
                )));
            }
            d[i] = s;
            l[at(i, i)] = 1.0;
        }
        Ok(BandLdl { n, w, l, d })
    }
}

/// Banded `LDLᵀ` factor.
#[derive(Debug, Clone)]
pub struct BandLdl {
    n: usize,
    w: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandLdl {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, w) = (self.n, self.w);
        let at = |i: usize, j: usize| i * (w + 1) + (j + w - i);
        if w == 0 {
            return b.iter().zip(&self.d).map(|(x, d)| x / d).collect();
        }
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let mut s = x[i];
            for k in lo..i {
                s -= self.l[at(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let hi = (i + w).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.l[at(k, i)] * x[k];
            }
            x[i] = s;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd_band(n: usize, w: usize, rng: &mut impl Rng) -> SymBanded {
        let mut m = SymBanded::zeros(n, w);
        for i in 0..n {
            for j in i.saturating_sub(w)..i {
                m.add(i, j, rng.random_range(-1.0..1.0));
            }
        }
        for i in 0..n {
            m.add(i, i, 2.0 * w as f64 + 1.0);
        }
        m
    }

    fn dense(m: &SymBanded) -> DMatrix<f64> {
        DMatrix::from_fn(m.dim(), m.dim(), |i, j| m.get(i, j))
    }

    #[test]
    fn solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(n, w) in &[(1, 0), (5, 1), (12, 3), (30, 7)] {
            let m = random_spd_band(n, w, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = m.factor().unwrap().solve(&b);
            let xd = dense(&m).lu().solve(&DVector::from_row_slice(&b)).unwrap();
            let err = (DVector::from_row_slice(&x) - xd).amax();
            assert!(err < 1e-12, "n={n} w={w} err={err}");
            let back = m.apply(&x);
            for i in 0..n {
                assert!((back[i] - b[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tridiagonal_example() {
        let m = SymBanded::tridiagonal(&[2.0, 2.0, 2.0], &[-1.0, -1.0]);
        let x = m.factor().unwrap().solve(&[1.0, 0.0, 1.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = SymBanded::tridiagonal(&[1.0, 1.0], &[2.0]);
        assert!(matches!(
            m.factor(),
            Err(LinopsError::NotPositiveDefinite(_))
        ));
    }
}
