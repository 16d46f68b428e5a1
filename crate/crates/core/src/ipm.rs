//! Primal-dual interior method for conic quadratic programs
//!
//! ```text
//! minimize ½yᵀQy − cᵀy   subject to   Ay − b ∈ K,
//! ```
//!
//! with slack `s = Ay − b` and multiplier `v`, both kept in the interior of
//! `K`. Each iteration takes a Mehrotra predictor-corrector step on the
//! Nesterov–Todd scaled complementarity condition and eliminates `Δs`, `Δv`
//! so that only `L(u) = Q + Aᵀ block(u)⁻¹ A` has to be solved.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::cones::{ConeProduct, NtScaling};
use crate::linops::{dense_atxa, Csr, DenseSolve, LinopsError, SolveOp};
use crate::qscalc::QsError;
use crate::vecops::{dot, norm2, norm_inf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IpmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linops(#[from] LinopsError),
}

impl From<IpmError> for QsError {
    fn from(e: IpmError) -> Self {
        match e {
            IpmError::Dimension(s) => QsError::Dimension(s),
            IpmError::Linops(l) => QsError::Linops(l),
        }
    }
}

/// A conic QP together with the ability to solve with `L(u)`.
pub trait ConicQp {
    /// Number of variables `ℓ`.
    fn dim(&self) -> usize;
    fn cone(&self) -> &ConeProduct;
    fn c(&self) -> &[f64];
    fn b(&self) -> &[f64];
    fn apply_q(&self, y: &[f64]) -> Vec<f64>;
    fn apply_a(&self, y: &[f64]) -> Vec<f64>;
    fn apply_at(&self, v: &[f64]) -> Vec<f64>;
    /// Solver for `Q + Aᵀ block(u)⁻¹ A` at a strictly interior `u`.
    fn factor(&self, u: &[f64]) -> Result<Box<dyn SolveOp + '_>, LinopsError>;
}

/// Conic QP with a dense `Q` (possibly zero) and sparse `A`.
#[derive(Debug, Clone)]
pub struct DenseQp {
    q: Option<DMatrix<f64>>,
    c: Vec<f64>,
    a: Csr,
    b: Vec<f64>,
    cone: ConeProduct,
}

impl DenseQp {
    pub fn new(
        q: DMatrix<f64>,
        c: Vec<f64>,
        a: Csr,
        b: Vec<f64>,
        cone: ConeProduct,
    ) -> Result<Self, IpmError> {
        if q.nrows() != a.cols() || q.ncols() != a.cols() {
            return Err(IpmError::Dimension(format!(
                "Q is {}x{}, ℓ = {}",
                q.nrows(),
                q.ncols(),
                a.cols()
            )));
        }
        Self::check(&c, &a, &b, &cone)?;
        Ok(Self {
            q: Some(q),
            c,
            a,
            b,
            cone,
        })
    }

    /// The linear program `max cᵀy s.t. Ay ⪰_K b` (`Q = 0`).
    pub fn linear(c: Vec<f64>, a: Csr, b: Vec<f64>, cone: ConeProduct) -> Result<Self, IpmError> {
        Self::check(&c, &a, &b, &cone)?;
        Ok(Self {
            q: None,
            c,
            a,
            b,
            cone,
        })
    }

    fn check(c: &[f64], a: &Csr, b: &[f64], cone: &ConeProduct) -> Result<(), IpmError> {
        if c.len() != a.cols() || a.rows() != cone.dim() || b.len() != cone.dim() {
            return Err(IpmError::Dimension(format!(
                "A is {}x{}, c has {}, b has {}, cone dimension {}",
                a.rows(),
                a.cols(),
                c.len(),
                b.len(),
                cone.dim()
            )));
        }
        Ok(())
    }
}

impl ConicQp for DenseQp {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn cone(&self) -> &ConeProduct {
        &self.cone
    }

    fn c(&self) -> &[f64] {
        &self.c
    }

    fn b(&self) -> &[f64] {
        &self.b
    }

    fn apply_q(&self, y: &[f64]) -> Vec<f64> {
        match &self.q {
            Some(q) => (q * nalgebra::DVector::from_column_slice(y))
                .as_slice()
                .to_vec(),
            None => vec![0.0; y.len()],
        }
    }

    fn apply_a(&self, y: &[f64]) -> Vec<f64> {
        self.a.apply(y)
    }

    fn apply_at(&self, v: &[f64]) -> Vec<f64> {
        self.a.apply_t(v)
    }

    fn factor(&self, u: &[f64]) -> Result<Box<dyn SolveOp + '_>, LinopsError> {
        let mut l = dense_atxa(&self.a, &self.cone, u)?;
        if let Some(q) = &self.q {
            l += q;
        }
        Ok(Box::new(DenseSolve::new(l)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmConfig {
    /// Target for the normalized residuals and the gap `sᵀv`.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary factor.
    pub step_frac: f64,
    /// Record an [`IterTrace`] per iteration.
    pub trace: bool,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            step_frac: 0.99,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmState {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub mu: f64,
}

impl IpmState {
    /// `y = 0`, `s = max(1, ‖b‖∞)·e`, `v = e`.
    pub fn initial<Q: ConicQp + ?Sized>(qp: &Q) -> Self {
        let e = qp.cone().identity();
        let scale = norm_inf(qp.b()).max(1.0);
        let s: Vec<f64> = e.iter().map(|x| x * scale).collect();
        let mu = dot(&s, &e) / qp.cone().degree() as f64;
        Self {
            y: vec![0.0; qp.dim()],
            v: e,
            s,
            mu,
        }
    }
}

/// Residuals of the perturbed optimality conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `Qy − Aᵀv − c`
    pub r_d: Vec<f64>,
    /// `Ay − s − b`
    pub r_p: Vec<f64>,
    /// `s ∘ v − μe`
    pub r_mu: Vec<f64>,
    pub gap: f64,
}

impl Residuals {
    /// Largest block norm.
    pub fn norm(&self) -> f64 {
        norm2(&self.r_d)
            .max(norm2(&self.r_p))
            .max(norm2(&self.r_mu))
    }
}

pub fn residual<Q: ConicQp + ?Sized>(qp: &Q, st: &IpmState) -> Residuals {
    let cone = qp.cone();
    let mut r_d = qp.apply_q(&st.y);
    let atv = qp.apply_at(&st.v);
    for ((r, a), c) in r_d.iter_mut().zip(&atv).zip(qp.c()) {
        *r -= a + c;
    }
    let mut r_p = qp.apply_a(&st.y);
    for ((r, s), b) in r_p.iter_mut().zip(&st.s).zip(qp.b()) {
        *r -= s + b;
    }
    let mut r_mu = cone.jordan_product(&st.s, &st.v);
    for (r, e) in r_mu.iter_mut().zip(cone.identity()) {
        *r -= st.mu * e;
    }
    Residuals {
        r_d,
        r_p,
        r_mu,
        gap: dot(&st.s, &st.v),
    }
}

/// A search direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub dy: Vec<f64>,
    pub dv: Vec<f64>,
    pub ds: Vec<f64>,
}

/// Solves
///
/// ```text
/// QΔy − AᵀΔv = −r_d
/// AΔy − Δs   = −r_p
/// λ ∘ (WΔv + W⁻¹Δs) = r_c
/// ```
///
/// by eliminating `Δs` and `Δv`, followed by [`REFINE_STEPS`] rounds of
/// iterative refinement on the unreduced system.
fn direction(
    qp: &(impl ConicQp + ?Sized),
    nt: &NtScaling<'_>,
    l: &dyn SolveOp,
    r_d: &[f64],
    r_p: &[f64],
    r_c: &[f64],
) -> Result<Direction, LinopsError> {
    let cone = qp.cone();
    let lam = nt.lambda();
    let mut d = eliminate(qp, nt, l, r_d, r_p, r_c)?;
    for _ in 0..REFINE_STEPS {
        // Residuals of the three equations at the current direction, with
        // the signs arranged so that the correction solves the same system.
        let mut e_d = qp.apply_q(&d.dy);
        for ((e, a), r) in e_d.iter_mut().zip(qp.apply_at(&d.dv)).zip(r_d) {
            *e = *e - a + r;
        }
        let mut e_p = qp.apply_a(&d.dy);
        for ((e, ds), r) in e_p.iter_mut().zip(&d.ds).zip(r_p) {
            *e = *e - ds + r;
        }
        let inner: Vec<f64> = nt
            .apply_w(&d.dv)
            .iter()
            .zip(nt.apply_w_inv(&d.ds))
            .map(|(a, b)| a + b)
            .collect();
        let e_c: Vec<f64> = r_c
            .iter()
            .zip(cone.jordan_product(lam, &inner))
            .map(|(r, x)| r - x)
            .collect();
        let size = norm_inf(&e_d).max(norm_inf(&e_p)).max(norm_inf(&e_c));
        if size == 0.0 {
            break;
        }
        let corr = eliminate(qp, nt, l, &e_d, &e_p, &e_c)?;
        for (x, c) in d.dy.iter_mut().zip(&corr.dy) {
            *x += c;
        }
        for (x, c) in d.dv.iter_mut().zip(&corr.dv) {
            *x += c;
        }
        for (x, c) in d.ds.iter_mut().zip(&corr.ds) {
            *x += c;
        }
    }
    Ok(d)
}

const REFINE_STEPS: usize = 2;

fn eliminate(
    qp: &(impl ConicQp + ?Sized),
    nt: &NtScaling<'_>,
    l: &dyn SolveOp,
    r_d: &[f64],
    r_p: &[f64],
    r_c: &[f64],
) -> Result<Direction, LinopsError> {
    let cone = qp.cone();
    let u = nt.point();
    let t = nt.apply_w(&cone.jordan_solve(nt.lambda(), r_c));
    let t_rp: Vec<f64> = t.iter().zip(r_p).map(|(a, b)| a - b).collect();
    let mut rhs = qp.apply_at(&cone.block_solve(u, &t_rp)?);
    for (r, d) in rhs.iter_mut().zip(r_d) {
        *r -= d;
    }
    let dy = l.solve(&rhs);
    let ady = qp.apply_a(&dy);
    let w: Vec<f64> = t_rp.iter().zip(&ady).map(|(a, b)| a - b).collect();
    let dv = cone.block_solve(u, &w)?;
    let udv = cone.block_apply(u, &dv)?;
    let ds = t.iter().zip(&udv).map(|(a, b)| a - b).collect();
    Ok(Direction { dy, dv, ds })
}

/// Newton direction targeting the central point with parameter `target_mu`
/// (`r_c = target_mu·e − λ∘λ`).
pub fn newton_direction<Q: ConicQp + ?Sized>(
    qp: &Q,
    st: &IpmState,
    target_mu: f64,
) -> Result<Direction, LinopsError> {
    let cone = qp.cone();
    let nt = NtScaling::new(cone, &st.s, &st.v)?;
    let l = qp.factor(nt.point())?;
    let res = residual(qp, st);
    let lam = nt.lambda();
    let r_c: Vec<f64> = cone
        .jordan_product(lam, lam)
        .iter()
        .zip(cone.identity())
        .map(|(ll, e)| target_mu * e - ll)
        .collect();
    direction(qp, &nt, l.as_ref(), &res.r_d, &res.r_p, &r_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    IterationLimit,
    Unbounded,
    Infeasible,
    NumericalBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterTrace {
    pub iter: usize,
    pub mu: f64,
    /// `‖r_p‖/(1 + ‖b‖)`
    pub primal: f64,
    /// `‖r_d‖/(1 + ‖c‖)`
    pub dual: f64,
    pub gap: f64,
    pub sigma: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmResult {
    pub status: IpmStatus,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub iterations: usize,
    /// Largest of the normalized primal and dual residuals and the gap.
    pub residual: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub trace: Vec<IterTrace>,
}

const UNBOUNDED_NORM: f64 = 1e10;
const INFEASIBLE_NORM: f64 = 1e8;
const PLATEAU_WINDOW: usize = 20;
const TINY_STEP: f64 = 1e-10;

pub fn solve<Q: ConicQp + ?Sized>(qp: &Q, cfg: &IpmConfig) -> IpmResult {
    solve_from(qp, IpmState::initial(qp), cfg)
}

/// Runs the interior method from a given strictly interior `(s, v)`.
pub fn solve_from<Q: ConicQp + ?Sized>(qp: &Q, mut st: IpmState, cfg: &IpmConfig) -> IpmResult {
    let cone = qp.cone();
    let degree = cone.degree() as f64;
    let e = cone.identity();
    let nc = 1.0 + norm2(qp.c());
    let nb = 1.0 + norm2(qp.b());
    let mut trace = Vec::new();
    let mut primal_hist: Vec<f64> = Vec::new();
    let mut tiny_steps = 0;
    let mut iter = 0;
    // Iterate with the smallest residual, returned if the method breaks down
    // after passing it.
    let mut best: Option<(f64, IpmState, Residuals)> = None;

    let finish =
        |status: IpmStatus, st: IpmState, iter: usize, res: &Residuals, trace: Vec<IterTrace>| {
            let primal = norm2(&res.r_p) / nb;
            let dual = norm2(&res.r_d) / nc;
            IpmResult {
                status,
                y: st.y,
                v: st.v,
                s: st.s,
                iterations: iter,
                residual: primal.max(dual).max(res.gap),
                primal,
                dual,
                gap: res.gap,
                trace,
            }
        };

    loop {
        st.mu = dot(&st.s, &st.v) / degree;
        let res = residual(qp, &st);
        let primal = norm2(&res.r_p) / nb;
        let dual = norm2(&res.r_d) / nc;
        if primal <= cfg.tol && dual <= cfg.tol && res.gap <= cfg.tol {
            return finish(IpmStatus::Optimal, st, iter, &res, trace);
        }
        let score = primal.max(dual).max(res.gap);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, st.clone(), res.clone()));
        }
        if norm_inf(&st.y) > UNBOUNDED_NORM {
            return finish(IpmStatus::Unbounded, st, iter, &res, trace);
        }
        primal_hist.push(primal);
        if norm_inf(&st.v) > INFEASIBLE_NORM && primal_hist.len() > PLATEAU_WINDOW {
            let old = primal_hist[primal_hist.len() - 1 - PLATEAU_WINDOW];
            if primal > 0.5 * old {
                return finish(IpmStatus::Infeasible, st, iter, &res, trace);
            }
        }
        if iter >= cfg.max_iter {
            return finish(IpmStatus::IterationLimit, st, iter, &res, trace);
        }

        let breakdown = |st: IpmState, res: &Residuals, trace: Vec<IterTrace>, iter: usize| {
            if norm_inf(&st.y) > 1e-2 * UNBOUNDED_NORM {
                return finish(IpmStatus::Unbounded, st, iter, res, trace);
            }
            if norm_inf(&st.v) > INFEASIBLE_NORM {
                return finish(IpmStatus::Infeasible, st, iter, res, trace);
            }
            let current = (norm2(&res.r_p) / nb).max(norm2(&res.r_d) / nc).max(res.gap);
            match &best {
                Some((score, b, r)) if *score < current => {
                    finish(IpmStatus::NumericalBreakdown, b.clone(), iter, r, trace)
                }
                _ => finish(IpmStatus::NumericalBreakdown, st, iter, res, trace),
            }
        };

        let nt = match NtScaling::new(cone, &st.s, &st.v) {
            Ok(nt) => nt,
            Err(_) => return breakdown(st, &res, trace, iter),
        };
        let l = match qp.factor(nt.point()) {
            Ok(l) => l,
            Err(err) => {
                log::debug!("factorization failed at iteration {iter}: {err}");
                return breakdown(st, &res, trace, iter);
            }
        };
        let lam = nt.lambda();
        let lam_sq = cone.jordan_product(lam, lam);

        // Predictor.
        let r_aff: Vec<f64> = lam_sq.iter().map(|x| -x).collect();
        let aff = match direction(qp, &nt, l.as_ref(), &res.r_d, &res.r_p, &r_aff) {
            Ok(d) => d,
            Err(_) => return breakdown(st, &res, trace, iter),
        };
        let alpha_aff = cone
            .max_step(&st.s, &aff.ds, 1.0)
            .min(cone.max_step(&st.v, &aff.dv, 1.0));
        let s_aff: Vec<f64> =
            st.s.iter()
                .zip(&aff.ds)
                .map(|(a, b)| a + alpha_aff * b)
                .collect();
        let v_aff: Vec<f64> =
            st.v.iter()
                .zip(&aff.dv)
                .map(|(a, b)| a + alpha_aff * b)
                .collect();
        let gap_aff = dot(&s_aff, &v_aff);
        let sigma = (gap_aff / res.gap).powi(3).clamp(1e-3, 1.0 - 1e-3);

        // Corrector with the second-order term.
        let cross = cone.jordan_product(&nt.apply_w_inv(&aff.ds), &nt.apply_w(&aff.dv));
        let r_c: Vec<f64> = (0..e.len())
            .map(|i| sigma * st.mu * e[i] - lam_sq[i] - cross[i])
            .collect();
        let dir = match direction(qp, &nt, l.as_ref(), &res.r_d, &res.r_p, &r_c) {
            Ok(d) => d,
            Err(_) => return breakdown(st, &res, trace, iter),
        };
        if dir
            .dy
            .iter()
            .chain(&dir.dv)
            .chain(&dir.ds)
            .any(|x| !x.is_finite())
        {
            return breakdown(st, &res, trace, iter);
        }
        let alpha = cone
            .max_step(&st.s, &dir.ds, cfg.step_frac)
            .min(cone.max_step(&st.v, &dir.dv, cfg.step_frac));

        for (y, d) in st.y.iter_mut().zip(&dir.dy) {
            *y += alpha * d;
        }
        for (v, d) in st.v.iter_mut().zip(&dir.dv) {
            *v += alpha * d;
        }
        for (s, d) in st.s.iter_mut().zip(&dir.ds) {
            *s += alpha * d;
        }
        iter += 1;
        if cfg.trace {
            trace.push(IterTrace {
                iter,
                mu: st.mu,
                primal,
                dual,
                gap: res.gap,
                sigma,
                alpha,
            });
        }
        log::trace!(
            "ipm {iter}: mu={:.3e} rp={primal:.3e} rd={dual:.3e} alpha={alpha:.3}",
            st.mu
        );
        if alpha < TINY_STEP {
            tiny_steps += 1;
            if tiny_steps >= 5 {
                let res = residual(qp, &st);
                return breakdown(st, &res, trace, iter);
            }
        } else {
            tiny_steps = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::Cone;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_qp(b: f64) -> DenseQp {
        DenseQp::new(
            DMatrix::from_element(1, 1, 1.0),
            vec![1.0],
            Csr::identity(1),
            vec![b],
            ConeProduct::orthant(1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn inactive_constraint() {
        let r = solve(&scalar_qp(0.0), &IpmConfig::default());
        assert_eq!(r.status, IpmStatus::Optimal);
        assert!((r.y[0] - 1.0).abs() < 1e-7);
        assert!(r.v[0].abs() < 1e-7);
        assert!((r.s[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn active_constraint() {
        let r = solve(&scalar_qp(2.0), &IpmConfig::default());
        assert_eq!(r.status, IpmStatus::Optimal);
        assert!((r.y[0] - 2.0).abs() < 1e-7);
        assert!((r.v[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn lp_over_unit_disk() {
        // max y₁ s.t. (1, y) ∈ ℚ³
        let a = Csr::from_triplets(3, 2, &[(1, 0, 1.0), (2, 1, 1.0)]).unwrap();
        let qp = DenseQp::linear(
            vec![1.0, 0.0],
            a,
            vec![-1.0, 0.0, 0.0],
            ConeProduct::second_order(3).unwrap(),
        )
        .unwrap();
        let r = solve(&qp, &IpmConfig::default());
        assert_eq!(r.status, IpmStatus::Optimal);
        assert!(
            (r.y[0] - 1.0).abs() < 1e-6 && r.y[1].abs() < 1e-6,
            "{:?}",
            r.y
        );
    }

    #[test]
    fn residual_at_optimum() {
        let qp = scalar_qp(0.0);
        let st = IpmState {
            y: vec![1.0],
            v: vec![0.0],
            s: vec![1.0],
            mu: 0.0,
        };
        let r = residual(&qp, &st);
        assert_eq!(r.r_d, vec![0.0]);
        assert_eq!(r.r_p, vec![0.0]);
        assert_eq!(r.r_mu, vec![0.0]);
    }

    #[test]
    fn zero_residual_gives_zero_direction() {
        // Central point of min ½y² − y, y ≥ 0 with μ: y − v = 1, s = y, sv = μ.
        let qp = scalar_qp(0.0);
        let y: f64 = 1.2;
        let v = y - 1.0;
        let st = IpmState {
            y: vec![y],
            v: vec![v],
            s: vec![y],
            mu: y * v,
        };
        let d = newton_direction(&qp, &st, st.mu).unwrap();
        assert!(d.dy[0].abs() < 1e-14 && d.dv[0].abs() < 1e-14 && d.ds[0].abs() < 1e-14);
    }

    #[test]
    fn scalar_direction_matches_dense_kkt() {
        // Oracle: the unscaled Newton system for one orthant variable,
        // [1 −1 0; 1 0 −1; 0 s v] (Δy,Δv,Δs) = (−r_d, −r_p, μ − sv).
        let qp = scalar_qp(0.0);
        let st = IpmState {
            y: vec![0.5],
            v: vec![0.5],
            s: vec![0.5],
            mu: 0.25,
        };
        let d = newton_direction(&qp, &st, 0.25).unwrap();
        let res = residual(&qp, &st);
        let k = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.5, 0.5]);
        let rhs = nalgebra::DVector::from_vec(vec![-res.r_d[0], -res.r_p[0], 0.25 - 0.25]);
        let sol = k.lu().solve(&rhs).unwrap();
        assert!((sol[0] - d.dy[0]).abs() < 1e-14);
        assert!((sol[1] - d.dv[0]).abs() < 1e-14);
        assert!((sol[2] - d.ds[0]).abs() < 1e-14);
    }

    #[test]
    fn soc_direction_solves_newton_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cone = ConeProduct::new(vec![Cone::SecondOrder(3), Cone::Orthant(2)]).unwrap();
        let a = Csr::from_dense(&DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0)));
        let q = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let q = &q * q.transpose();
        let qp = DenseQp::new(
            q,
            vec![1.0, -1.0, 0.5],
            a,
            vec![0.1, 0.2, -0.1, -1.0, 0.3],
            cone.clone(),
        )
        .unwrap();
        let st = IpmState {
            y: vec![0.3, -0.2, 0.1],
            v: vec![2.0, 0.5, -0.7, 1.0, 0.4],
            s: vec![1.5, -0.3, 0.9, 0.2, 3.0],
            mu: 0.3,
        };
        let d = newton_direction(&qp, &st, 0.3).unwrap();
        let res = residual(&qp, &st);
        let nt = NtScaling::new(&cone, &st.s, &st.v).unwrap();
        let row1: Vec<f64> = qp
            .apply_q(&d.dy)
            .iter()
            .zip(qp.apply_at(&d.dv))
            .zip(&res.r_d)
            .map(|((a, b), r)| a - b + r)
            .collect();
        let row2: Vec<f64> = qp
            .apply_a(&d.dy)
            .iter()
            .zip(&d.ds)
            .zip(&res.r_p)
            .map(|((a, b), r)| a - b + r)
            .collect();
        let lam = nt.lambda();
        let inner: Vec<f64> = nt
            .apply_w(&d.dv)
            .iter()
            .zip(nt.apply_w_inv(&d.ds))
            .map(|(a, b)| a + b)
            .collect();
        let lhs3 = cone.jordan_product(lam, &inner);
        let rhs3: Vec<f64> = cone
            .jordan_product(lam, lam)
            .iter()
            .zip(cone.identity())
            .map(|(l, e)| 0.3 * e - l)
            .collect();
        let scale = 1.0 + norm2(&res.r_d) + norm2(&res.r_p) + norm2(&rhs3);
        assert!(norm2(&row1) <= 1e-8 * scale);
        assert!(norm2(&row2) <= 1e-8 * scale);
        let row3: Vec<f64> = lhs3.iter().zip(&rhs3).map(|(a, b)| a - b).collect();
        assert!(norm2(&row3) <= 1e-8 * scale);
    }

    #[test]
    fn unbounded_lp_detected() {
        // max y s.t. y ≥ 0
        let qp = DenseQp::linear(
            vec![1.0],
            Csr::identity(1),
            vec![0.0],
            ConeProduct::orthant(1).unwrap(),
        )
        .unwrap();
        let r = solve(&qp, &IpmConfig::default());
        assert_eq!(r.status, IpmStatus::Unbounded);
    }

    #[test]
    fn infeasible_lp_detected() {
        // y ≥ 1 and −y ≥ 0
        let a = Csr::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, -1.0)]).unwrap();
        let qp = DenseQp::linear(
            vec![1.0],
            a,
            vec![1.0, 0.0],
            ConeProduct::orthant(2).unwrap(),
        )
        .unwrap();
        let r = solve(&qp, &IpmConfig::default());
        assert_eq!(r.status, IpmStatus::Infeasible);
    }

    #[test]
    fn iterates_stay_interior_and_gap_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let cone = ConeProduct::new(vec![Cone::Orthant(3), Cone::SecondOrder(4)]).unwrap();
            let a = Csr::from_dense(&DMatrix::from_fn(7, 4, |_, _| rng.random_range(-1.0..1.0)));
            let q = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let q = &q * q.transpose() + DMatrix::identity(4, 4);
            let c: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            // b chosen so that y = 0 is strictly feasible.
            let mut b: Vec<f64> = (0..7).map(|_| -rng.random_range(0.1..1.0)).collect();
            b[3] = -3.0;
            let qp = DenseQp::new(q, c, a, b, cone.clone()).unwrap();
            let cfg = IpmConfig {
                trace: true,
                ..IpmConfig::default()
            };
            let r = solve(&qp, &cfg);
            assert_eq!(r.status, IpmStatus::Optimal);
            assert!(cone.contains(&r.s, true).unwrap() && cone.contains(&r.v, true).unwrap());
            let gaps: Vec<f64> = r.trace.iter().map(|t| t.gap).collect();
            for w in gaps.windows(6) {
                assert!(w[5] < w[0], "{gaps:?}");
            }
        }
    }
}
