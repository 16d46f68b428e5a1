//! Smooth losses and test instances: least squares, logistic regression,
//! banded and conditioned design matrices, known-solution right-hand sides,
//! and the observed-convergence statistic.

use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linops::{Csr, StructuredMatrix};
use crate::pqn::{optimality_residual, PqnError};
use crate::qscalc::{build_group_l2, build_l1, build_tv_1d, QsError, QsFunction};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("known solution fails the optimality check (residual {0:e})")]
    NotOptimal(f64),
    #[error("malformed data at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Qs(#[from] QsError),
    #[error(transparent)]
    Pqn(#[from] PqnError),
}

/// A differentiable function `f : ℝⁿ → ℝ`.
pub trait SmoothProblem {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }
}

/// `f(x) = ½‖Ax − b‖²`
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: StructuredMatrix,
    b: Vec<f64>,
}

impl LeastSquares {
    pub fn new(a: StructuredMatrix, b: Vec<f64>) -> Result<Self, ProblemError> {
        if a.rows() != b.len() {
            return Err(ProblemError::Dimension(format!(
                "A has {} rows, b has {} entries",
                a.rows(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn matrix(&self) -> &StructuredMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.apply(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }
}

impl SmoothProblem for LeastSquares {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.residual(x).iter().map(|r| r * r).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.a.apply_t(&self.residual(x))
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let r = self.residual(x);
        (
            0.5 * r.iter().map(|v| v * v).sum::<f64>(),
            self.a.apply_t(&r),
        )
    }
}

/// `f(x) = (1/N) Σ log(1 + exp(a_iᵀx))` over the rows `a_i` of an `N × n`
/// matrix. Labels are expected to be folded into the rows: an observation
/// `(ξ, ℓ)` with `ℓ ∈ {−1, 1}` enters as `a = −ℓξ`.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    rows: DMatrix<f64>,
}

/// `log(1 + eᵗ)` without overflow.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1/(1 + e⁻ᵗ)` without overflow.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticLoss {
    pub fn new(rows: DMatrix<f64>) -> Result<Self, ProblemError> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(ProblemError::Dimension(
                "logistic data must be nonempty".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn observations(&self) -> usize {
        self.rows.nrows()
    }

    fn margins(&self, x: &[f64]) -> DVector<f64> {
        &self.rows * DVector::from_row_slice(x)
    }
}

impl SmoothProblem for LogisticLoss {
    fn dim(&self) -> usize {
        self.rows.ncols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.margins(x).iter().map(|&t| softplus(t)).sum::<f64>() / self.observations() as f64
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_grad(x).1
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = self.observations() as f64;
        let t = self.margins(x);
        let value = t.iter().map(|&ti| softplus(ti)).sum::<f64>() / n;
        let w = t.map(sigmoid) / n;
        (value, self.rows.tr_mul(&w).as_slice().to_vec())
    }
}

/// Synthetic logistic data: `N` standard-normal feature rows, a planted
/// weight vector with `support` nonzeros, labels `sign(ξᵀw + 0.1·noise)`.
pub fn synthetic_logistic(
    obs: usize,
    n: usize,
    support: usize,
    seed: u64,
) -> Result<LogisticLoss, ProblemError> {
    if obs == 0 || n == 0 || support > n {
        return Err(ProblemError::Parameter(format!(
            "N = {obs}, n = {n}, support = {support}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; n];
    for wi in w.iter_mut().take(support) {
        *wi = rng.sample::<f64, _>(StandardNormal);
    }
    let mut rows = DMatrix::zeros(obs, n);
    for i in 0..obs {
        let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let margin: f64 = xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            + 0.1 * rng.sample::<f64, _>(StandardNormal);
        let label = if margin >= 0.0 { 1.0 } else { -1.0 };
        for j in 0..n {
            rows[(i, j)] = -label * xi[j];
        }
    }
    LogisticLoss::new(rows)
}

/// Reads a dense matrix from whitespace-separated text, one row per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_dense_matrix(reader: impl BufRead) -> Result<DMatrix<f64>, ProblemError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = t
            .split_whitespace()
            .map(|w| {
                w.parse::<f64>().map_err(|e| ProblemError::Parse {
                    line: i + 1,
                    msg: format!("{w:?}: {e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        match cols {
            None => cols = Some(vals.len()),
            Some(c) if c != vals.len() => {
                return Err(ProblemError::Parse {
                    line: i + 1,
                    msg: format!("expected {c} values, found {}", vals.len()),
                })
            }
            _ => {}
        }
        data.extend(vals);
        rows += 1;
    }
    let cols = cols.ok_or(ProblemError::Parse {
        line: 0,
        msg: "no data rows".into(),
    })?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// `n × n` lower-triangular matrix of ones with bandwidth `p` (the main
/// diagonal and `p − 1` subdiagonals).
pub fn gen_banded(n: usize, p: usize) -> Result<Csr, ProblemError> {
    if p == 0 || p > n {
        return Err(ProblemError::Parameter(format!(
            "bandwidth p = {p} must lie in [1, {n}]"
        )));
    }
    let trip: Vec<_> = (0..n)
        .flat_map(|i| (i.saturating_sub(p - 1)..=i).map(move |j| (i, j, 1.0)))
        .collect();
    Ok(Csr::from_triplets(n, n, &trip).expect("indices are in range"))
}

/// `α_L·blockdiag(T, 0) + α_μ·I` with `T` the order-`n/2` tridiagonal
/// matrix with 2 on the diagonal and −1 off it.
pub fn gen_conditioned(n: usize, alpha_l: f64, alpha_mu: f64) -> Result<Csr, ProblemError> {
    if n == 0 || n % 2 != 0 {
        return Err(ProblemError::Parameter(format!(
            "n = {n} must be positive and even"
        )));
    }
    if !(alpha_l >= 0.0 && alpha_mu > 0.0) {
        return Err(ProblemError::Parameter(format!(
            "α_L = {alpha_l}, α_μ = {alpha_mu}"
        )));
    }
    let m = n / 2;
    let mut trip = Vec::new();
    for i in 0..n {
        let t = if i < m { 2.0 * alpha_l } else { 0.0 };
        trip.push((i, i, t + alpha_mu));
    }
    if alpha_l > 0.0 {
        for i in 0..m.saturating_sub(1) {
            trip.push((i, i + 1, -alpha_l));
            trip.push((i + 1, i, -alpha_l));
        }
    }
    Ok(Csr::from_triplets(n, n, &trip).expect("indices are in range"))
}

/// `max_{i≠j} |a_iᵀa_j|/(‖a_i‖‖a_j‖)` over the columns of `a`.
pub fn coherence(a: &DMatrix<f64>) -> f64 {
    let g = a.tr_mul(a);
    let n = g.nrows();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let d = (g[(i, i)] * g[(j, j)]).sqrt();
            if d > 0.0 {
                best = best.max(g[(i, j)].abs() / d);
            }
        }
    }
    best
}

/// Regularizers with known-solution constructions.
#[derive(Debug, Clone, PartialEq)]
pub enum RegKind {
    L1,
    /// Group 2-norm over consecutive blocks of the given sizes.
    GroupL2 {
        sizes: Vec<usize>,
    },
    Tv1d,
}

impl RegKind {
    /// `λ·g` on `ℝⁿ`.
    pub fn build(&self, n: usize, lambda: f64) -> Result<QsFunction, ProblemError> {
        let g = match self {
            RegKind::L1 => build_l1(n)?,
            RegKind::GroupL2 { sizes } => {
                if sizes.iter().sum::<usize>() != n {
                    return Err(ProblemError::Dimension(format!(
                        "group sizes do not sum to n = {n}"
                    )));
                }
                build_group_l2(sizes)?
            }
            RegKind::Tv1d => build_tv_1d(n)?,
        };
        Ok(g.scaled(lambda)?)
    }

    /// A subgradient of `λ·g` at `x` that is strictly interior on the
    /// nondifferentiable parts: zero off the support, on zero blocks and on
    /// ties.
    pub fn subgradient(&self, x: &[f64], lambda: f64) -> Vec<f64> {
        match self {
            RegKind::L1 => x.iter().map(|&v| lambda * sign(v)).collect(),
            RegKind::GroupL2 { sizes } => {
                let mut out = vec![0.0; x.len()];
                let mut off = 0;
                for &k in sizes {
                    let blk = &x[off..off + k];
                    let norm = blk.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        for i in 0..k {
                            out[off + i] = lambda * blk[i] / norm;
                        }
                    }
                    off += k;
                }
                out
            }
            RegKind::Tv1d => {
                let mut out = vec![0.0; x.len()];
                for i in 0..x.len().saturating_sub(1) {
                    let w = lambda * sign(x[i + 1] - x[i]);
                    out[i] -= w;
                    out[i + 1] += w;
                }
                out
            }
        }
    }

    /// A planted solution with structure matching the regularizer: sparse
    /// for l1, alternating zero and nonzero blocks for groups, piecewise
    /// constant for TV.
    pub fn planted_solution(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let magnitude = |rng: &mut dyn rand::RngCore| {
            let m: f64 = rng.random_range(1.0..2.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        };
        match self {
            RegKind::L1 => (0..n)
                .map(|_| {
                    if rng.random_bool(L1_DENSITY) {
                        magnitude(rng)
                    } else {
                        0.0
                    }
                })
                .collect(),
            RegKind::GroupL2 { sizes } => {
                let mut x = Vec::with_capacity(n);
                for (b, &k) in sizes.iter().enumerate() {
                    for _ in 0..k {
                        x.push(if b % 2 == 0 { magnitude(rng) } else { 0.0 });
                    }
                }
                x
            }
            RegKind::Tv1d => {
                let mut level = magnitude(rng);
                (0..n)
                    .map(|i| {
                        if i > 0 && rng.random_bool(0.05) {
                            level += magnitude(rng);
                        }
                        level
                    })
                    .collect()
            }
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Right-hand side `b = Ax* + A⁻ᵀv` for which `∇f(x*) = Aᵀ(Ax* − b) = −v`,
/// so `x*` minimizes `½‖Ax − b‖² + g` whenever `v ∈ ∂g(x*)`.
pub fn known_solution_rhs(
    a: &StructuredMatrix,
    x_star: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, ProblemError> {
    let n = a.rows();
    if a.cols() != n || x_star.len() != n || v.len() != n {
        return Err(ProblemError::Dimension(format!(
            "A is {}x{}, x* has {} entries, v has {}",
            a.rows(),
            a.cols(),
            x_star.len(),
            v.len()
        )));
    }
    let at = a.to_dense().transpose();
    let u = at
        .lu()
        .solve(&DVector::from_row_slice(v))
        .ok_or_else(|| ProblemError::Singular("Aᵀ".into()))?;
    let mut b = a.apply(x_star);
    for (bi, ui) in b.iter_mut().zip(u.iter()) {
        *bi += ui;
    }
    Ok(b)
}

/// A least-squares problem with a regularizer and a certified minimizer.
#[derive(Debug, Clone)]
pub struct KnownSolution {
    pub problem: LeastSquares,
    pub g: QsFunction,
    pub kind: RegKind,
    pub lambda: f64,
    pub x_star: Vec<f64>,
    pub v: Vec<f64>,
}

/// Largest optimality residual a known solution may have.
pub const KNOWN_SOLUTION_TOL: f64 = 1e-8;

/// Probability that an entry of a planted l1 solution is nonzero.
pub const L1_DENSITY: f64 = 0.01;

impl KnownSolution {
    pub fn new(
        a: StructuredMatrix,
        kind: RegKind,
        lambda: f64,
        x_star: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        let n = x_star.len();
        let g = kind.build(n, lambda)?;
        let v = kind.subgradient(&x_star, lambda);
        let b = known_solution_rhs(&a, &x_star, &v)?;
        let problem = LeastSquares::new(a, b)?;
        let inst = Self {
            problem,
            g,
            kind,
            lambda,
            x_star,
            v,
        };
        let r = inst.optimality_residual()?;
        if r > KNOWN_SOLUTION_TOL {
            return Err(ProblemError::NotOptimal(r));
        }
        Ok(inst)
    }

    /// `‖x* − prox_g(x* − ∇f(x*))‖∞`
    pub fn optimality_residual(&self) -> Result<f64, ProblemError> {
        Ok(optimality_residual(
            &self.g,
            &self.x_star,
            &self.problem.gradient(&self.x_star),
        )?)
    }

    /// `‖x − x*‖∞`
    pub fn error(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.x_star)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `Σ k·log e_k / Σ log e_k` over `k = 0..N`. Zero errors are clamped at
/// `1e-300`.
pub fn observed_convergence(errors: &[f64]) -> Result<f64, ProblemError> {
    if errors.is_empty() {
        return Err(ProblemError::Parameter("empty error sequence".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(ProblemError::Parameter(format!(
            "error {e} must be finite and nonnegative"
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &e) in errors.iter().enumerate() {
        if e == 0.0 {
            log::warn!("zero error at iteration {k} clamped to 1e-300");
        }
        let l = e.max(1e-300).ln();
        num += k as f64 * l;
        den += l;
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecops::max_abs_diff;

    fn central_difference(f: &dyn SmoothProblem, x: &[f64]) -> Vec<f64> {
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = 1e-5 * scale;
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f.value(&xp) - f.value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let d = max_abs_diff(a, b);
        let s = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        d / s.max(1e-12)
    }

    #[test]
    fn least_squares_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(7, 5, |_, _| rng.random_range(-1.0..1.0));
        let b: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = LeastSquares::new(StructuredMatrix::Dense(a), b).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert!(rel_err(&central_difference(&f, &x), &f.gradient(&x)) <= 1e-6);
            assert!(f.value(&x) >= 0.0);
        }
    }

    #[test]
    fn logistic_value_and_gradient() {
        let f = synthetic_logistic(40, 6, 3, 2).unwrap();
        assert!((f.value(&[0.0; 6]) - std::f64::consts::LN_2).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(rel_err(&central_difference(&f, &x), &f.gradient(&x)) <= 1e-6);
            // Midpoint convexity along a random line.
            let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            assert!(f.value(&mid) <= 0.5 * (f.value(&x) + f.value(&y)) + 1e-15);
        }
        let one = LogisticLoss::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((one.value(&[800.0]) - 800.0).abs() < 1e-12);
        assert!(one.value(&[-800.0]) >= 0.0 && one.value(&[-800.0]) < 1e-300);
    }

    #[test]
    fn dense_reader() {
        let text = "# header\n1 2 3\n\n4.5 -1 0\n";
        let m = read_dense_matrix(text.as_bytes()).unwrap();
        assert_eq!(
            m,
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.5, -1.0, 0.0])
        );
        assert!(matches!(
            read_dense_matrix("1 2\n3\n".as_bytes()),
            Err(ProblemError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_dense_matrix("1 x\n".as_bytes()),
            Err(ProblemError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn banded_coherence() {
        assert_eq!(coherence(&gen_banded(5, 1).unwrap().to_dense()), 0.0);
        let a = gen_banded(3, 2).unwrap().to_dense();
        assert_eq!(
            a,
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0])
        );
        assert!((coherence(&a) - 0.5f64.sqrt()).abs() < 1e-12);
        for (n, p) in [(40, 7), (60, 60), (30, 2)] {
            let c = coherence(&gen_banded(n, p).unwrap().to_dense());
            assert!(
                (c - ((p - 1) as f64 / p as f64).sqrt()).abs() < 1e-12,
                "n={n} p={p}"
            );
        }
        assert!(gen_banded(3, 0).is_err() && gen_banded(3, 4).is_err());
    }

    #[test]
    fn conditioned_spectrum() {
        let a = gen_conditioned(4, 0.0, 2.0).unwrap().to_dense();
        assert_eq!(a, DMatrix::identity(4, 4) * 2.0);
        let a = gen_conditioned(4, 1.0, 1.0).unwrap().to_dense();
        assert_eq!(a, a.transpose());
        let eig = a.clone().symmetric_eigen().eigenvalues;
        // T = [[2, −1], [−1, 2]] has eigenvalues 1 and 3.
        let mut ev: Vec<f64> = eig.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(max_abs_diff(&ev, &[1.0, 1.0, 2.0, 4.0]) < 1e-12);
        // Eigenvalues of T at order m are 2 − 2cos(kπ/(m + 1)).
        let t = gen_conditioned(8, 1.0, 1e-300)
            .unwrap()
            .to_dense()
            .view((0, 0), (4, 4))
            .clone_owned();
        let mut ev: Vec<f64> = t.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let expect: Vec<f64> = (1..=4)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 5.0).cos())
            .collect();
        assert!(max_abs_diff(&ev, &expect) < 1e-12);
        assert!(gen_conditioned(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn known_solution_examples() {
        // A = 2I, x* = (2, 0), v = (1, 0): b = (4, 0) + (0.5, 0).
        let a = StructuredMatrix::Diagonal(vec![2.0, 2.0]);
        let b = known_solution_rhs(&a, &[2.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(b, vec![4.5, 0.0]);
        let ks = KnownSolution::new(a.clone(), RegKind::L1, 1.0, vec![2.0, 0.0]).unwrap();
        assert_eq!(ks.problem.gradient(&ks.x_star), vec![-1.0, 0.0]);
        let x = vec![0.6, 0.8];
        let ks = KnownSolution::new(a, RegKind::GroupL2 { sizes: vec![2] }, 1.0, x).unwrap();
        assert!(ks.optimality_residual().unwrap() < 1e-12);
    }

    #[test]
    fn planted_instances_are_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40;
        let a = StructuredMatrix::Sparse(gen_banded(n, 10).unwrap());
        for kind in [
            RegKind::L1,
            RegKind::GroupL2 { sizes: vec![8; 5] },
            RegKind::Tv1d,
        ] {
            let x = kind.planted_solution(n, &mut rng);
            let ks = KnownSolution::new(a.clone(), kind.clone(), 0.5, x).unwrap();
            assert!(ks.optimality_residual().unwrap() <= KNOWN_SOLUTION_TOL);
        }
    }

    #[test]
    fn observed_convergence_examples() {
        assert!((observed_convergence(&[0.5; 5]).unwrap() - 2.0).abs() < 1e-15);
        let oc = observed_convergence(&[1.0, 0.1, 0.01]).unwrap();
        assert!((oc - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(observed_convergence(&[0.3]).unwrap(), 0.0);
        assert!(observed_convergence(&[]).is_err());
    }
}
