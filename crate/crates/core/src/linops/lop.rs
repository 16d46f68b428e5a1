//! The operator `L(u) = B H⁻¹ Bᵀ + Aᵀ block(u)⁻¹ A` and its structured solves.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use log::debug;
use nalgebra::{DMatrix, DVector, DVectorView};

use super::swinv::small_lu;
use super::{swinv, Csr, DiagSolve, Dplr, LinopsError, Metric, Middle, SolveOp, SymBanded};
use crate::cones::{quad_rep, soc_det, soc_inverse, Cone, ConeProduct};
use crate::qscalc::{QsFunction, SolveStrategy};
use crate::vecops::{norm2, sub};

/// Largest half-bandwidth accepted by the banded strategies.
pub const MAX_BAND: usize = 16;
/// Largest number of border variables for the pivoting strategy.
pub const MAX_BORDER: usize = 8;
/// Second-order blocks up to this size are assembled explicitly.
const MAX_ASSEMBLED_SOC: usize = 16;
/// Dense re-solves are attempted only up to this order.
const DENSE_LIMIT: usize = 4000;
/// Above this many groups, SocBlocks inverts groups one at a time instead of
/// folding them into a single capacitance matrix.
const SOC_FOLD_LIMIT: usize = 32;
/// Relative residual that triggers refinement and the dense fallback.
const GUARD_TOL: f64 = 1e-7;

static DENSE_FALLBACKS: AtomicUsize = AtomicUsize::new(0);

/// Number of structured solves (or factorizations) that were redone densely
/// since process start.
pub fn dense_fallback_count() -> usize {
    DENSE_FALLBACKS.load(Ordering::Relaxed)
}

fn note_fallback(reason: &str) {
    DENSE_FALLBACKS.fetch_add(1, Ordering::Relaxed);
    debug!("structured L(u) solve fell back to dense: {reason}");
}

/// Calls `visit(i, k, v)` once per unordered pair `i ≥ k` for every term of
/// `B Λ₁ Bᵀ + Aᵀ X A`, where `X` is given per cone block by `weights`.
/// Returns `false` (without visiting everything) if some second-order block
/// is too large to assemble.
fn visit_entries(
    a: &Csr,
    cone: &ConeProduct,
    bt: &Csr,
    lambda1: &[f64],
    weights: &dyn Fn(usize, Cone, std::ops::Range<usize>) -> BlockWeight,
    visit: &mut dyn FnMut(usize, usize, f64),
) -> bool {
    for j in 0..bt.rows() {
        let ents: Vec<(usize, f64)> = bt.row(j).collect();
        for p in 0..ents.len() {
            for q in 0..=p {
                let (i, k) = order(ents[p].0, ents[q].0);
                visit(i, k, lambda1[j] * ents[p].1 * ents[q].1);
            }
        }
    }
    for (bi, (c, r)) in cone.iter().enumerate() {
        match weights(bi, c, r.clone()) {
            BlockWeight::Diagonal(x) => {
                for (row, xr) in r.clone().zip(x) {
                    let ents: Vec<(usize, f64)> = a.row(row).collect();
                    for p in 0..ents.len() {
                        for q in 0..=p {
                            let (i, k) = order(ents[p].0, ents[q].0);
                            visit(i, k, xr * ents[p].1 * ents[q].1);
                        }
                    }
                }
            }
            BlockWeight::Dense(x) => {
                if r.len() > MAX_ASSEMBLED_SOC {
                    return false;
                }
                let ents: Vec<(usize, usize, f64)> = r
                    .clone()
                    .enumerate()
                    .flat_map(|(lr, row)| a.row(row).map(move |(col, v)| (lr, col, v)))
                    .collect();
                for p in 0..ents.len() {
                    for q in 0..=p {
                        let (r1, c1, v1) = ents[p];
                        let (r2, c2, v2) = ents[q];
                        let mut coef = x[(r1, r2)] * v1 * v2;
                        if p != q && c1 == c2 {
                            coef *= 2.0;
                        }
                        let (i, k) = order(c1, c2);
                        visit(i, k, coef);
                    }
                }
            }
        }
    }
    true
}

#[inline]
fn order(i: usize, k: usize) -> (usize, usize) {
    if i >= k {
        (i, k)
    } else {
        (k, i)
    }
}

enum BlockWeight {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

/// Dense `block(u_b)⁻¹ = P(u_b⁻¹)²` for one second-order block.
fn soc_block_inverse_dense(ub: &[f64]) -> DMatrix<f64> {
    let w = soc_inverse(ub).expect("interior scaling point");
    let m = w.len();
    let mut p = DMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    for j in 0..m {
        e[j] = 1.0;
        let col = quad_rep(&w, &quad_rep(&w, &e));
        p.set_column(j, &DVector::from_vec(col));
        e[j] = 0.0;
    }
    p
}

fn value_weights<'u>(
    u: &'u [f64],
) -> impl Fn(usize, Cone, std::ops::Range<usize>) -> BlockWeight + 'u {
    move |_, c, r| match c {
        Cone::Orthant(_) => BlockWeight::Diagonal(u[r].iter().map(|v| 1.0 / v).collect()),
        Cone::SecondOrder(m) => {
            if m > MAX_ASSEMBLED_SOC {
                BlockWeight::Dense(DMatrix::zeros(0, 0))
            } else {
                BlockWeight::Dense(soc_block_inverse_dense(&u[r]))
            }
        }
    }
}

fn pattern_weights(_: usize, c: Cone, r: std::ops::Range<usize>) -> BlockWeight {
    match c {
        Cone::Orthant(_) => BlockWeight::Diagonal(vec![1.0; r.len()]),
        Cone::SecondOrder(m) => {
            if m > MAX_ASSEMBLED_SOC {
                BlockWeight::Dense(DMatrix::zeros(0, 0))
            } else {
                BlockWeight::Dense(DMatrix::from_element(m, m, 1.0))
            }
        }
    }
}

/// Structural analysis used to pick and validate strategies.
pub(crate) mod pattern {
    use super::*;

    /// Half-bandwidth of `B Bᵀ + Aᵀ A`-style coupling restricted to the
    /// non-border variables (numbered in order), or `None` when the coupling
    /// is not assemblable or the bandwidth exceeds [`MAX_BAND`].
    pub fn core_bandwidth(
        a: &Csr,
        cone: &ConeProduct,
        bt: &Csr,
        border: &[usize],
    ) -> Option<usize> {
        if !rows_sparse(a, bt) {
            return None;
        }
        let ell = a.cols();
        let pos = core_positions(ell, border);
        let ones = vec![1.0; bt.rows()];
        let mut w = 0usize;
        let mut work = 0usize;
        let ok = visit_entries(a, cone, bt, &ones, &pattern_weights, &mut |i, k, _| {
            work += 1;
            if let (Some(pi), Some(pk)) = (pos[i], pos[k]) {
                w = w.max(pi.abs_diff(pk));
            }
        });
        if !ok || w > MAX_BAND || work > 64 * (ell + a.nnz() + bt.nnz()) + 1024 {
            return None;
        }
        Some(w)
    }

    /// Variables coupled to more than `2·MAX_BAND` others; candidates for
    /// the bordered strategy.
    pub fn high_degree_vars(a: &Csr, cone: &ConeProduct, bt: &Csr) -> Option<Vec<usize>> {
        if !rows_sparse(a, bt) {
            return None;
        }
        let ell = a.cols();
        let mut deg = vec![0usize; ell];
        let ones = vec![1.0; bt.rows()];
        let mut work = 0usize;
        let limit = 64 * (ell + a.nnz() + bt.nnz()) + 1024;
        let ok = visit_entries(a, cone, bt, &ones, &pattern_weights, &mut |i, k, _| {
            work += 1;
            if i != k && work <= limit {
                deg[i] += 1;
                deg[k] += 1;
            }
        });
        if !ok || work > limit {
            return None;
        }
        Some((0..ell).filter(|&i| deg[i] > 2 * MAX_BAND).collect())
    }

    fn rows_sparse(a: &Csr, bt: &Csr) -> bool {
        const MAX_ROW_NNZ: usize = 256;
        (0..a.rows()).all(|r| a.row_nnz(r) <= MAX_ROW_NNZ)
            && (0..bt.rows()).all(|r| bt.row_nnz(r) <= MAX_ROW_NNZ)
    }

    pub fn core_positions(ell: usize, border: &[usize]) -> Vec<Option<usize>> {
        let mut is_border = vec![false; ell];
        for &b in border {
            is_border[b] = true;
        }
        let mut next = 0;
        is_border
            .iter()
            .map(|&bd| {
                if bd {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    }

    /// `true` when every column of `B` has at most one nonzero, so that
    /// `B Λ Bᵀ` is diagonal for diagonal `Λ`.
    pub fn b_is_selection(bt: &Csr) -> bool {
        (0..bt.rows()).all(|j| bt.row_nnz(j) <= 1)
    }

    /// Structure required by the SocBlocks strategy: orthant rows with a
    /// single nonzero, second-order blocks with an empty first row and
    /// single-nonzero remaining rows on distinct columns, column sets of
    /// distinct second-order blocks disjoint, and `B` selection-like.
    pub fn soc_blocks_ok(a: &Csr, cone: &ConeProduct, bt: &Csr) -> bool {
        if !b_is_selection(bt) || cone.is_orthant_only() {
            return false;
        }
        let mut owner = vec![usize::MAX; a.cols()];
        for (bi, (c, r)) in cone.iter().enumerate() {
            match c {
                Cone::Orthant(_) => {
                    if r.clone().any(|row| a.row_nnz(row) > 1) {
                        return false;
                    }
                }
                Cone::SecondOrder(_) => {
                    if a.row_nnz(r.start) != 0 {
                        return false;
                    }
                    for row in r.start + 1..r.end {
                        if a.row_nnz(row) != 1 {
                            return false;
                        }
                        let (col, _) = a.row(row).next().expect("one entry");
                        if owner[col] != usize::MAX {
                            return false;
                        }
                        owner[col] = bi;
                    }
                }
            }
        }
        true
    }

    /// Structure required by the Separable strategy with `block` dual
    /// variables per coordinate.
    pub fn separable_ok(a: &Csr, cone: &ConeProduct, bmat: &Csr, block: usize) -> bool {
        let n = bmat.cols();
        let ell = a.cols();
        if block == 0 || ell != n * block || !cone.is_orthant_only() || n == 0 || a.rows() % n != 0
        {
            return false;
        }
        let p = a.rows() / n;
        for row in 0..a.rows() {
            let i = row / p;
            if a.row(row).any(|(c, _)| c / block != i) {
                return false;
            }
        }
        for j in 0..bmat.rows() {
            if bmat.row_nnz(j) > 1 || bmat.row(j).any(|(c, _)| c != j / block) {
                return false;
            }
        }
        // Λ_i = A_iᵀ diag(x) A_i must be invertible: each A_i full column rank.
        for i in 0..n {
            let mut ai = DMatrix::zeros(p, block);
            for (lr, row) in (i * p..(i + 1) * p).enumerate() {
                for (c, v) in a.row(row) {
                    ai[(lr, c - i * block)] = v;
                }
            }
            let tol = 1e-10 * ai.amax().max(1.0);
            if p < block || ai.svd(false, false).rank(tol) < block {
                return false;
            }
        }
        true
    }
}

/// `M⁻¹` of a diagonal-plus-low-rank triple.
fn middle_inverse(d: &Dplr) -> Result<DMatrix<f64>, LinopsError> {
    if let Some(mi) = &d.m_inv {
        return Ok(mi.clone());
    }
    if d.rank() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    small_lu(d.m.clone(), "metric middle matrix")?
        .try_inverse()
        .ok_or_else(|| LinopsError::Singular("metric middle matrix".into()))
}

/// Bordered banded matrix `[[C, E], [Eᵀ, F]]` with banded `C`.
struct BorderedBanded {
    pos: Vec<Option<usize>>,
    border: Vec<usize>,
    ldl: super::BandLdl,
    z: DMatrix<f64>,
    schur: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl BorderedBanded {
    fn assemble(
        g: &QsFunction,
        lambda1: &[f64],
        u: &[f64],
        border: &[usize],
        w: usize,
    ) -> Result<Self, LinopsError> {
        let ell = g.ell();
        let pos = pattern::core_positions(ell, border);
        let nc = ell - border.len();
        let kb = border.len();
        let mut bpos = vec![usize::MAX; ell];
        for (t, &b) in border.iter().enumerate() {
            bpos[b] = t;
        }
        let mut core = SymBanded::zeros(nc, w);
        let mut e = DMatrix::zeros(nc, kb);
        let mut f = DMatrix::zeros(kb, kb);
        let mut bad = false;
        let weights = value_weights(u);
        let ok = visit_entries(
            g.a(),
            g.cone(),
            g.bmat_t(),
            lambda1,
            &weights,
            &mut |i, k, v| match (pos[i], pos[k]) {
                (Some(pi), Some(pk)) => {
                    if pi.abs_diff(pk) > w {
                        bad = true;
                    } else {
                        core.add(pi, pk, v);
                    }
                }
                (Some(pi), None) => e[(pi, bpos[k])] += v,
                (None, Some(pk)) => e[(pk, bpos[i])] += v,
                (None, None) => {
                    let (bi, bk) = (bpos[i], bpos[k]);
                    f[(bi, bk)] += v;
                    if bi != bk {
                        f[(bk, bi)] += v;
                    }
                }
            },
        );
        if !ok || bad {
            return Err(LinopsError::Strategy(
                "coupling pattern exceeds declared bandwidth".into(),
            ));
        }
        let ldl = core.factor()?;
        let mut z = DMatrix::zeros(nc, kb);
        for t in 0..kb {
            let col: Vec<f64> = e.column(t).iter().copied().collect();
            z.set_column(t, &DVector::from_vec(ldl.solve(&col)));
        }
        let schur = if kb > 0 {
            Some(small_lu(f - e.transpose() * &z, "border Schur complement")?)
        } else {
            None
        };
        Ok(Self {
            pos,
            border: border.to_vec(),
            ldl,
            z,
            schur,
        })
    }
}

impl SolveOp for BorderedBanded {
    fn dim(&self) -> usize {
        self.pos.len()
    }

    fn solve(&self, q: &[f64]) -> Vec<f64> {
        if self.border.is_empty() {
            return self.ldl.solve(q);
        }
        let nc = self.ldl.dim();
        let mut qc = vec![0.0; nc];
        for (i, p) in self.pos.iter().enumerate() {
            if let Some(p) = p {
                qc[*p] = q[i];
            }
        }
        let mut t = self.ldl.solve(&qc);
        let mut out = vec![0.0; q.len()];
        if let Some(schur) = &self.schur {
            let qb = DVector::from_iterator(self.border.len(), self.border.iter().map(|&b| q[b]));
            let rhs = qb - self.z.tr_mul(&DVectorView::from_slice(&qc, nc));
            let pb = schur.solve(&rhs).expect("Schur complement factored");
            let corr = &self.z * &pb;
            for (ti, ci) in t.iter_mut().zip(corr.iter()) {
                *ti -= ci;
            }
            for (bi, &b) in self.border.iter().enumerate() {
                out[b] = pb[bi];
            }
        }
        for (i, p) in self.pos.iter().enumerate() {
            if let Some(p) = p {
                out[i] = t[*p];
            }
        }
        out
    }
}

/// `diag(d) + Σ_g c_g v_g v_gᵀ` with disjoint group supports, inverted one
/// group at a time by Sherman–Morrison.
struct GroupRank1 {
    d: Vec<f64>,
    groups: Vec<(Vec<usize>, Vec<f64>, f64)>,
}

impl SolveOp for GroupRank1 {
    fn dim(&self) -> usize {
        self.d.len()
    }

    fn solve(&self, q: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = q.iter().zip(&self.d).map(|(a, b)| a / b).collect();
        for (idx, t, denom) in &self.groups {
            // t = D⁻¹v, denom = 1/c + vᵀD⁻¹v, and vᵀ(D⁻¹q) = tᵀq
            let s: f64 = idx.iter().zip(t).map(|(&i, ti)| ti * q[i]).sum::<f64>() / denom;
            for (&i, ti) in idx.iter().zip(t) {
                x[i] -= ti * s;
            }
        }
        x
    }
}

/// Per-coordinate blocks for separable functions.
struct SeparableSolve {
    block: usize,
    lam: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    bvec: Vec<DVector<f64>>,
    hs: super::SwTriple<DiagSolve>,
}

impl SeparableSolve {
    fn build(g: &QsFunction, h: &Metric, u: &[f64]) -> Result<Self, LinopsError> {
        let n = g.n();
        let block = g.ell() / n;
        let p = g.a().rows() / n;
        let mut lam = Vec::with_capacity(n);
        let mut bvec = Vec::with_capacity(n);
        let mut sigma = vec![0.0; n];
        for i in 0..n {
            let mut li = DMatrix::zeros(block, block);
            for row in i * p..(i + 1) * p {
                let x = 1.0 / u[row];
                let ents: Vec<(usize, f64)> =
                    g.a().row(row).map(|(c, v)| (c - i * block, v)).collect();
                for &(c1, v1) in &ents {
                    for &(c2, v2) in &ents {
                        li[(c1, c2)] += x * v1 * v2;
                    }
                }
            }
            let mut bi = DVector::zeros(block);
            for j in 0..block {
                if let Some((_, v)) = g.bmat().row(i * block + j).next() {
                    bi[j] = v;
                }
            }
            let lu = small_lu(li, "separable block Λ_i")?;
            sigma[i] = bi.dot(&lu.solve(&bi).expect("factored"));
            lam.push(lu);
            bvec.push(bi);
        }
        let direct = h.direct_dplr();
        let d: Vec<f64> = direct.d.iter().zip(&sigma).map(|(a, b)| a + b).collect();
        let mi = middle_inverse(&direct)?;
        let hs = swinv(DiagSolve(d), &direct.u, Middle::Inverse(&mi))?;
        Ok(Self {
            block,
            lam,
            bvec,
            hs,
        })
    }
}

impl SolveOp for SeparableSolve {
    fn dim(&self) -> usize {
        self.lam.len() * self.block
    }

    fn solve(&self, q: &[f64]) -> Vec<f64> {
        let b = self.block;
        let n = self.lam.len();
        let mut t = vec![0.0; q.len()];
        let mut q1 = vec![0.0; n];
        for i in 0..n {
            let ti = self.lam[i]
                .solve(&DVector::from_row_slice(&q[i * b..(i + 1) * b]))
                .expect("factored");
            q1[i] = self.bvec[i].dot(&ti);
            t[i * b..(i + 1) * b].copy_from_slice(ti.as_slice());
        }
        let q2 = self.hs.apply(&q1);
        for i in 0..n {
            let ci = self.lam[i]
                .solve(&(&self.bvec[i] * q2[i]))
                .expect("factored");
            for j in 0..b {
                t[i * b + j] -= ci[j];
            }
        }
        t
    }
}

/// Dense factorization of a formed matrix (Cholesky, LU if not definite).
pub struct DenseSolve {
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    n: usize,
}

impl DenseSolve {
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinopsError> {
        let n = m.nrows();
        let sym = (&m + m.transpose()) * 0.5;
        if let Some(chol) = sym.clone().cholesky() {
            return Ok(Self {
                chol: Some(chol),
                lu: None,
                n,
            });
        }
        if let Ok(lu) = small_lu(sym.clone(), "dense L(u)") {
            return Ok(Self {
                chol: None,
                lu: Some(lu),
                n,
            });
        }
        // Numerically singular: factor a slightly shifted copy and let the
        // caller's refinement absorb the perturbation.
        let scale = sym.diagonal().amax().max(f64::MIN_POSITIVE);
        let mut delta = 1e-14 * scale;
        while delta <= 1e-8 * scale {
            let shifted = &sym + DMatrix::identity(n, n) * delta;
            if let Some(chol) = shifted.cholesky() {
                return Ok(Self {
                    chol: Some(chol),
                    lu: None,
                    n,
                });
            }
            delta *= 100.0;
        }
        Err(LinopsError::Singular("dense L(u)".into()))
    }
}

impl SolveOp for DenseSolve {
    fn dim(&self) -> usize {
        self.n
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let v = DVector::from_row_slice(b);
        let x = match (&self.chol, &self.lu) {
            (Some(c), _) => c.solve(&v),
            (None, Some(lu)) => lu.solve(&v).expect("factored"),
            _ => unreachable!("one factorization is always present"),
        };
        x.as_slice().to_vec()
    }
}

/// Dense `Aᵀ block(u)⁻¹ A`.
pub fn dense_atxa(a: &Csr, cone: &ConeProduct, u: &[f64]) -> Result<DMatrix<f64>, LinopsError> {
    let ad = a.to_dense();
    let mut xa = DMatrix::zeros(ad.nrows(), ad.ncols());
    for j in 0..ad.ncols() {
        let col: Vec<f64> = ad.column(j).iter().copied().collect();
        let s = cone.block_solve(u, &col)?;
        xa.set_column(j, &DVector::from_vec(s));
    }
    Ok(ad.transpose() * xa)
}

/// Dense `L(u)` for a QS function and metric.
pub fn dense_l(g: &QsFunction, h: &Metric, u: &[f64]) -> Result<DMatrix<f64>, LinopsError> {
    let bd = g.bmat().to_dense();
    let q = &bd * h.to_dense_inverse() * bd.transpose();
    Ok(q + dense_atxa(g.a(), g.cone(), u)?)
}

/// `L(u)` bound to `(g, H, u)`, with the solver selected by the strategy tag.
pub struct LOperator<'a> {
    g: &'a QsFunction,
    h: &'a Metric,
    u: Vec<f64>,
    strategy: SolveStrategy,
    solver: Box<dyn SolveOp + Send + Sync + 'a>,
    dense: OnceLock<Option<DenseSolve>>,
}

/// Builds `L(u)` using `g`'s strategy.
pub fn build_l<'a>(
    g: &'a QsFunction,
    h: &'a Metric,
    u: &[f64],
) -> Result<LOperator<'a>, LinopsError> {
    build_l_with(g, h, u, g.strategy().clone())
}

/// Builds `L(u)` with an explicit strategy (must be valid for `g`'s shape,
/// DenseFallback always is).
pub fn build_l_with<'a>(
    g: &'a QsFunction,
    h: &'a Metric,
    u: &[f64],
    strategy: SolveStrategy,
) -> Result<LOperator<'a>, LinopsError> {
    if h.dim() != g.n() {
        return Err(LinopsError::Dimension(format!(
            "metric order {} vs n = {}",
            h.dim(),
            g.n()
        )));
    }
    if u.len() != g.cone().dim() {
        return Err(LinopsError::Dimension(format!(
            "u has {} entries, cone {}",
            u.len(),
            g.cone().dim()
        )));
    }
    if !g.cone().contains(u, true)? {
        return Err(LinopsError::Cone(crate::cones::ConeError::NotInterior {
            block: 0,
        }));
    }
    let built = structured_solver(g, h, u, &strategy);
    let (solver, strategy): (Box<dyn SolveOp + Send + Sync + 'a>, SolveStrategy) = match built {
        Ok(s) => (s, strategy),
        Err(e) => {
            if strategy != SolveStrategy::DenseFallback {
                note_fallback(&format!("{strategy:?} factorization failed: {e}"));
            }
            let d = DenseSolve::new(dense_l(g, h, u)?)?;
            (Box::new(d), SolveStrategy::DenseFallback)
        }
    };
    Ok(LOperator {
        g,
        h,
        u: u.to_vec(),
        strategy,
        solver,
        dense: OnceLock::new(),
    })
}

fn structured_solver<'a>(
    g: &'a QsFunction,
    h: &'a Metric,
    u: &[f64],
    strategy: &SolveStrategy,
) -> Result<Box<dyn SolveOp + Send + Sync + 'a>, LinopsError> {
    let hinv = h.inverse_dplr();
    let low_rank = || -> Result<(DMatrix<f64>, DMatrix<f64>), LinopsError> {
        Ok((g.bmat().mul_dense(&hinv.u), middle_inverse(&hinv)?))
    };
    match strategy {
        SolveStrategy::DenseFallback => Ok(Box::new(DenseSolve::new(dense_l(g, h, u)?)?)),
        SolveStrategy::L1Diag
        | SolveStrategy::GraphTridiag { .. }
        | SolveStrategy::BallPivot { .. } => {
            let (border, w): (&[usize], usize) = match strategy {
                SolveStrategy::L1Diag => (&[], 0),
                SolveStrategy::GraphTridiag { bandwidth } => (&[], *bandwidth),
                SolveStrategy::BallPivot { border, bandwidth } => (border, *bandwidth),
                _ => unreachable!(),
            };
            let core = BorderedBanded::assemble(g, &hinv.d, u, border, w)?;
            let (wmat, mi) = low_rank()?;
            if wmat.ncols() == 0 {
                Ok(Box::new(core))
            } else {
                Ok(Box::new(swinv(core, &wmat, Middle::Inverse(&mi))?))
            }
        }
        SolveStrategy::SocBlocks => soc_blocks_solver(g, &hinv, u, low_rank()?),
        SolveStrategy::Separable { .. } => Ok(Box::new(SeparableSolve::build(g, h, u)?)),
    }
}

fn soc_blocks_solver<'a>(
    g: &'a QsFunction,
    hinv: &Dplr,
    u: &[f64],
    (wmat, mi): (DMatrix<f64>, DMatrix<f64>),
) -> Result<Box<dyn SolveOp + Send + Sync + 'a>, LinopsError> {
    let ell = g.ell();
    let a = g.a();
    let mut d = vec![0.0; ell];
    for j in 0..g.bmat_t().rows() {
        for (i, v) in g.bmat_t().row(j) {
            d[i] += hinv.d[j] * v * v;
        }
    }
    let mut groups: Vec<(Vec<usize>, Vec<f64>, f64)> = Vec::new();
    for (c, r) in g.cone().iter() {
        match c {
            Cone::Orthant(_) => {
                for row in r {
                    if let Some((col, v)) = a.row(row).next() {
                        d[col] += v * v / u[row];
                    }
                }
            }
            Cone::SecondOrder(_) => {
                let w = soc_inverse(&u[r.clone()]).expect("interior u");
                let det = soc_det(&w);
                let mut idx = Vec::with_capacity(r.len() - 1);
                let mut vec = Vec::with_capacity(r.len() - 1);
                for (k, row) in (r.start + 1..r.end).enumerate() {
                    let (col, v) = a.row(row).next().expect("single entry");
                    d[col] += v * v * det * det;
                    idx.push(col);
                    vec.push(v * w[k + 1]);
                }
                groups.push((idx, vec, 8.0 * w[0] * w[0]));
            }
        }
    }
    if groups.len() <= SOC_FOLD_LIMIT {
        let k0 = wmat.ncols();
        let p = groups.len();
        let mut ucomb = DMatrix::zeros(ell, k0 + p);
        ucomb.view_mut((0, 0), (ell, k0)).copy_from(&wmat);
        let mut minv = DMatrix::zeros(k0 + p, k0 + p);
        minv.view_mut((0, 0), (k0, k0)).copy_from(&mi);
        for (t, (idx, v, c)) in groups.iter().enumerate() {
            for (&i, vi) in idx.iter().zip(v) {
                ucomb[(i, k0 + t)] = *vi;
            }
            minv[(k0 + t, k0 + t)] = 1.0 / c;
        }
        Ok(Box::new(swinv(
            DiagSolve(d),
            &ucomb,
            Middle::Inverse(&minv),
        )?))
    } else {
        let groups = groups
            .into_iter()
            .map(|(idx, v, c)| {
                let t: Vec<f64> = idx.iter().zip(&v).map(|(&i, vi)| vi / d[i]).collect();
                let denom = 1.0 / c + t.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
                (idx, t, denom)
            })
            .collect();
        let core = GroupRank1 { d, groups };
        if wmat.ncols() == 0 {
            Ok(Box::new(core))
        } else {
            Ok(Box::new(swinv(core, &wmat, Middle::Inverse(&mi))?))
        }
    }
}

impl<'a> LOperator<'a> {
    /// Strategy actually in use (DenseFallback if the requested one failed).
    pub fn strategy(&self) -> &SolveStrategy {
        &self.strategy
    }

    pub fn dim(&self) -> usize {
        self.g.ell()
    }

    /// `L(u) w` computed from the factors, without forming `L`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let g = self.g;
        let mut out = g.bmat().apply(&self.h.apply_hinv(&g.bmat().apply_t(w)));
        let xa = g
            .cone()
            .block_solve(&self.u, &g.a().apply(w))
            .expect("interior u");
        for (o, v) in out.iter_mut().zip(g.a().apply_t(&xa)) {
            *o += v;
        }
        out
    }

    /// Solves `L(u) p = q`. A structured solve whose relative residual
    /// exceeds `1e-7` is refined and, failing that, redone densely.
    pub fn solve(&self, q: &[f64]) -> Vec<f64> {
        let mut p = self.solver.solve(q);
        let scale = 1.0 + norm2(q);
        let mut r = sub(q, &self.apply(&p));
        if norm2(&r) / scale <= GUARD_TOL || self.strategy == SolveStrategy::DenseFallback {
            return p;
        }
        for _ in 0..2 {
            let dp = self.solver.solve(&r);
            for (pi, di) in p.iter_mut().zip(&dp) {
                *pi += di;
            }
            r = sub(q, &self.apply(&p));
            if norm2(&r) / scale <= GUARD_TOL {
                return p;
            }
        }
        if self.dim() > DENSE_LIMIT {
            return p;
        }
        let dense = self.dense.get_or_init(|| {
            note_fallback(&format!(
                "{:?} residual {:e}",
                self.strategy,
                norm2(&r) / scale
            ));
            dense_l(self.g, self.h, &self.u)
                .ok()
                .and_then(|m| DenseSolve::new(m).ok())
        });
        match dense {
            Some(d) => d.solve(q),
            None => p,
        }
    }

    /// Solve without the residual guard.
    pub fn solve_unguarded(&self, q: &[f64]) -> Vec<f64> {
        self.solver.solve(q)
    }
}

impl SolveOp for LOperator<'_> {
    fn dim(&self) -> usize {
        LOperator::dim(self)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        LOperator::solve(self, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qscalc::{build_group_l2, build_l1, build_tv_1d};
    use crate::vecops::max_abs_diff;

    #[test]
    fn apply_matches_dense_l() {
        let h = Metric::diagonal(vec![1.0, 2.0, 0.5, 4.0]).unwrap();
        for g in [build_l1(4).unwrap(), build_tv_1d(4).unwrap(), build_group_l2(&[2, 2]).unwrap()] {
            let u = g.cone().identity();
            let l = build_l(&g, &h, &u).unwrap();
            let dense = dense_l(&g, &h, &u).unwrap();
            let w: Vec<f64> = (0..g.ell()).map(|i| 1.0 - 0.3 * i as f64).collect();
            let expect = &dense * nalgebra::DVector::from_vec(w.clone());
            assert!(max_abs_diff(&l.apply(&w), expect.as_slice()) < 1e-12);
            let p = l.solve(&w);
            assert!(max_abs_diff(&l.apply(&p), &w) < 1e-10);
        }
    }

    #[test]
    fn l1_diag_example() {
        // H = I, u = 1: L = I + 2I for the 1-norm's two inequality rows.
        let g = build_l1(2).unwrap();
        let h = Metric::identity(2);
        let l = build_l(&g, &h, &[1.0; 4]).unwrap();
        assert_eq!(l.strategy(), &SolveStrategy::L1Diag);
        assert!(max_abs_diff(&l.solve(&[3.0, 6.0]), &[1.0, 2.0]) < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = build_l1(2).unwrap();
        let h = Metric::identity(2);
        assert!(matches!(build_l(&g, &h, &[1.0; 3]), Err(LinopsError::Dimension(_))));
        assert!(matches!(build_l(&g, &h, &[1.0, 1.0, -1.0, 1.0]), Err(LinopsError::Cone(_))));
        assert!(matches!(build_l(&g, &Metric::identity(3), &[1.0; 4]), Err(LinopsError::Dimension(_))));
    }
}
