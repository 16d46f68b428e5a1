//! Products of nonnegative orthants and second-order cones.
//!
//! A vector in a [`ConeProduct`] is a plain `[f64]` slice partitioned by the
//! product's block layout. A second-order block of dimension `m` is stored as
//! `(τ, z̄)` with the scalar `τ` first and `z̄ ∈ ℝ^{m-1}` after it; membership
//! means `‖z̄‖₂ ≤ τ`.
//!
//! Besides membership and step-to-boundary computations, this module holds
//! the scaling algebra of the interior method:
//!
//! * `block(u)`, equal to `diag(u)` on orthant blocks and to
//!   `(2uuᵀ − (uᵀJu)J)²` on second-order blocks, with `J = diag(1, −I)`;
//! * the Nesterov–Todd scaling [`NtScaling`], whose point `u` satisfies
//!   `block(u)·v = s` and whose scaling operator `W` satisfies `W² = block(u)`
//!   and `W v = W⁻¹ s = λ`.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vecops::{dot, norm2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("invalid {kind} cone of dimension {dim}")]
    InvalidBlock { kind: &'static str, dim: usize },
    #[error("dimension mismatch: cone has {expected} entries, vector has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("point is not strictly interior to cone block {block}")]
    NotInterior { block: usize },
}

/// A single factor of a cone product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dim", rename_all = "snake_case")]
pub enum Cone {
    /// `ℝ₊^m`
    Orthant(usize),
    /// `{(τ, z̄) ∈ ℝ×ℝ^{m−1} : ‖z̄‖₂ ≤ τ}`, `m ≥ 2`
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Orthant(m) | Cone::SecondOrder(m) => m,
        }
    }

    /// Contribution to the barrier degree used to normalize `μ`.
    pub fn degree(&self) -> usize {
        match *self {
            Cone::Orthant(m) => m,
            Cone::SecondOrder(_) => 1,
        }
    }

    fn validate(&self) -> Result<(), ConeError> {
        match *self {
            Cone::Orthant(m) if m >= 1 => Ok(()),
            Cone::SecondOrder(m) if m >= 2 => Ok(()),
            Cone::Orthant(m) => Err(ConeError::InvalidBlock {
                kind: "orthant",
                dim: m,
            }),
            Cone::SecondOrder(m) => Err(ConeError::InvalidBlock {
                kind: "second-order",
                dim: m,
            }),
        }
    }
}

/// Ordered product `K₁ × ⋯ × K_k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConeProduct {
    blocks: Vec<Cone>,
    offsets: Vec<usize>,
    dim: usize,
    degree: usize,
}

impl ConeProduct {
    pub fn new(blocks: Vec<Cone>) -> Result<Self, ConeError> {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        let mut degree = 0;
        for c in &blocks {
            c.validate()?;
            offsets.push(dim);
            dim += c.dim();
            degree += c.degree();
        }
        Ok(Self {
            blocks,
            offsets,
            dim,
            degree,
        })
    }

    pub fn orthant(m: usize) -> Result<Self, ConeError> {
        Self::new(vec![Cone::Orthant(m)])
    }

    pub fn second_order(m: usize) -> Result<Self, ConeError> {
        Self::new(vec![Cone::SecondOrder(m)])
    }

    /// `self × other`, keeping block order.
    pub fn product(&self, other: &ConeProduct) -> ConeProduct {
        let mut blocks = self.blocks.clone();
        blocks.extend_from_slice(&other.blocks);
        // Both inputs were validated.
        Self::new(blocks).expect("product of valid cones")
    }

    /// `K × ⋯ × K` (`k` copies).
    pub fn repeat(&self, k: usize) -> ConeProduct {
        let mut blocks = Vec::with_capacity(self.blocks.len() * k);
        for _ in 0..k {
            blocks.extend_from_slice(&self.blocks);
        }
        Self::new(blocks).expect("repetition of valid cones")
    }

    pub fn blocks(&self) -> &[Cone] {
        &self.blocks
    }

    /// Total dimension `M = Σ mᵢ`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn is_orthant_only(&self) -> bool {
        self.blocks.iter().all(|c| matches!(c, Cone::Orthant(_)))
    }

    /// Blocks together with the index range each occupies.
    pub fn iter(&self) -> impl Iterator<Item = (Cone, Range<usize>)> + '_ {
        self.blocks
            .iter()
            .zip(&self.offsets)
            .map(|(c, &o)| (*c, o..o + c.dim()))
    }

    fn check_len(&self, x: &[f64]) -> Result<(), ConeError> {
        if x.len() != self.dim {
            return Err(ConeError::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Membership test; `strict` asks for the interior.
    pub fn contains(&self, x: &[f64], strict: bool) -> Result<bool, ConeError> {
        self.check_len(x)?;
        for (cone, r) in self.iter() {
            let xb = &x[r];
            let inside = match cone {
                Cone::Orthant(_) => {
                    if strict {
                        xb.iter().all(|&v| v > 0.0)
                    } else {
                        xb.iter().all(|&v| v >= 0.0)
                    }
                }
                Cone::SecondOrder(_) => {
                    let t = norm2(&xb[1..]);
                    if strict {
                        t < xb[0]
                    } else {
                        t <= xb[0]
                    }
                }
            };
            if !inside {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The element `e`: ones on orthant blocks, `(1, 0, …, 0)` on second-order
    /// blocks.
    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        for (cone, r) in self.iter() {
            match cone {
                Cone::Orthant(_) => e[r].fill(1.0),
                Cone::SecondOrder(_) => e[r.start] = 1.0,
            }
        }
        e
    }

    /// Jordan product `x ∘ y` (elementwise on orthants, `(xᵀy, x₀ȳ + y₀x̄)`
    /// on second-order blocks). Equals `arrow(x)·y`.
    pub fn jordan_product(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (cone, r) in self.iter() {
            let (xb, yb) = (&x[r.clone()], &y[r.clone()]);
            let ob = &mut out[r];
            match cone {
                Cone::Orthant(_) => {
                    for i in 0..xb.len() {
                        ob[i] = xb[i] * yb[i];
                    }
                }
                Cone::SecondOrder(_) => {
                    ob[0] = dot(xb, yb);
                    for i in 1..xb.len() {
                        ob[i] = xb[0] * yb[i] + yb[0] * xb[i];
                    }
                }
            }
        }
        out
    }

    /// Solves `λ ∘ x = r` for `x`, i.e. applies `arrow(λ)⁻¹`.
    pub fn jordan_solve(&self, lambda: &[f64], r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (cone, rg) in self.iter() {
            let (lb, rb) = (&lambda[rg.clone()], &r[rg.clone()]);
            let ob = &mut out[rg];
            match cone {
                Cone::Orthant(_) => {
                    for i in 0..lb.len() {
                        ob[i] = rb[i] / lb[i];
                    }
                }
                Cone::SecondOrder(_) => {
                    let l0 = lb[0];
                    let det = soc_det(lb);
                    let x0 = (l0 * rb[0] - dot(&lb[1..], &rb[1..])) / det;
                    ob[0] = x0;
                    for i in 1..lb.len() {
                        ob[i] = (rb[i] - x0 * lb[i]) / l0;
                    }
                }
            }
        }
        out
    }

    /// Applies `block(u)` to `w`.
    pub fn block_apply(&self, u: &[f64], w: &[f64]) -> Result<Vec<f64>, ConeError> {
        self.check_len(u)?;
        self.check_len(w)?;
        let mut out = vec![0.0; self.dim];
        for (idx, (cone, r)) in self.iter().enumerate() {
            let (ub, wb) = (&u[r.clone()], &w[r.clone()]);
            let ob = &mut out[r];
            match cone {
                Cone::Orthant(_) => {
                    for i in 0..ub.len() {
                        ob[i] = ub[i] * wb[i];
                    }
                }
                Cone::SecondOrder(_) => {
                    if soc_det(ub) <= 0.0 || ub[0] <= 0.0 {
                        return Err(ConeError::NotInterior { block: idx });
                    }
                    let t = quad_rep(ub, wb);
                    ob.copy_from_slice(&quad_rep(ub, &t));
                }
            }
        }
        Ok(out)
    }

    /// Solves `block(u)·p = q` for `p`.
    pub fn block_solve(&self, u: &[f64], q: &[f64]) -> Result<Vec<f64>, ConeError> {
        self.check_len(u)?;
        self.check_len(q)?;
        let mut out = vec![0.0; self.dim];
        for (idx, (cone, r)) in self.iter().enumerate() {
            let (ub, qb) = (&u[r.clone()], &q[r.clone()]);
            let ob = &mut out[r];
            match cone {
                Cone::Orthant(_) => {
                    for i in 0..ub.len() {
                        if ub[i] <= 0.0 {
                            return Err(ConeError::NotInterior { block: idx });
                        }
                        ob[i] = qb[i] / ub[i];
                    }
                }
                Cone::SecondOrder(_) => {
                    let uinv = soc_inverse(ub).ok_or(ConeError::NotInterior { block: idx })?;
                    let t = quad_rep(&uinv, qb);
                    ob.copy_from_slice(&quad_rep(&uinv, &t));
                }
            }
        }
        Ok(out)
    }

    /// Dense `block(u)`, for verification at small sizes.
    pub fn block_dense(&self, u: &[f64]) -> Result<DMatrix<f64>, ConeError> {
        self.check_len(u)?;
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let mut e = vec![0.0; self.dim];
        for j in 0..self.dim {
            e[j] = 1.0;
            let col = self.block_apply(u, &e)?;
            m.set_column(j, &nalgebra::DVector::from_vec(col));
            e[j] = 0.0;
        }
        Ok(m)
    }

    /// Dense block-diagonal `diag(x)` / `arrow(x)` matrix.
    pub fn arrow_dense(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (cone, r) in self.iter() {
            let o = r.start;
            let xb = &x[r];
            match cone {
                Cone::Orthant(_) => {
                    for (i, v) in xb.iter().enumerate() {
                        m[(o + i, o + i)] = *v;
                    }
                }
                Cone::SecondOrder(_) => {
                    for i in 0..xb.len() {
                        m[(o + i, o + i)] = xb[0];
                        m[(o, o + i)] = xb[i];
                        m[(o + i, o)] = xb[i];
                    }
                }
            }
        }
        m
    }

    /// Nesterov–Todd scaling point `u` for strictly interior `s` (slack) and
    /// `v` (dual): `block(u)·v = s`.
    pub fn nt_scaling(&self, s: &[f64], v: &[f64]) -> Result<Vec<f64>, ConeError> {
        Ok(NtScaling::new(self, s, v)?.u)
    }

    /// Fraction-to-boundary step: `min(1, frac·α_max)` where `α_max` is the
    /// supremum of `t` keeping `x + t·dx` in the cone.
    pub fn max_step(&self, x: &[f64], dx: &[f64], frac: f64) -> f64 {
        (frac * self.max_step_to_boundary(x, dx)).min(1.0)
    }

    /// `sup{t ≥ 0 : x + t·dx ∈ K}` (possibly `+∞`).
    pub fn max_step_to_boundary(&self, x: &[f64], dx: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for (cone, r) in self.iter() {
            let (xb, db) = (&x[r.clone()], &dx[r]);
            let a = match cone {
                Cone::Orthant(_) => xb.iter().zip(db).fold(f64::INFINITY, |m, (&xi, &di)| {
                    if di < 0.0 {
                        m.min(-xi / di)
                    } else {
                        m
                    }
                }),
                Cone::SecondOrder(_) => soc_step(xb, db),
            };
            alpha = alpha.min(a);
        }
        alpha
    }
}

/// `uᵀJu` computed as `(u₀ − ‖ū‖)(u₀ + ‖ū‖)`.
#[inline]
pub(crate) fn soc_det(u: &[f64]) -> f64 {
    let t = norm2(&u[1..]);
    (u[0] - t) * (u[0] + t)
}

/// Jordan inverse `Ju / det(u)`, `None` unless `u` is strictly interior.
pub(crate) fn soc_inverse(u: &[f64]) -> Option<Vec<f64>> {
    let det = soc_det(u);
    if !(det > 0.0 && u[0] > 0.0) {
        return None;
    }
    let mut out = Vec::with_capacity(u.len());
    out.push(u[0] / det);
    out.extend(u[1..].iter().map(|v| -v / det));
    Some(out)
}

/// Quadratic representation `P(u)w = 2u(uᵀw) − det(u)·Jw`.
pub(crate) fn quad_rep(u: &[f64], w: &[f64]) -> Vec<f64> {
    let det = soc_det(u);
    let c = 2.0 * dot(u, w);
    let mut out = Vec::with_capacity(u.len());
    out.push(c * u[0] - det * w[0]);
    out.extend(u[1..].iter().zip(&w[1..]).map(|(ui, wi)| c * ui + det * wi));
    out
}

/// Smallest positive root of `(x+t·dx)ᵀJ(x+t·dx) = 0`, `+∞` if none.
fn soc_step(x: &[f64], dx: &[f64]) -> f64 {
    let a = dx[0] * dx[0] - dot(&dx[1..], &dx[1..]);
    let b = x[0] * dx[0] - dot(&x[1..], &dx[1..]);
    let c = soc_det(x);
    if c <= 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return if b < 0.0 {
            -c / (2.0 * b)
        } else {
            f64::INFINITY
        };
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let q = -(b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return f64::INFINITY;
    }
    [q / a, c / q]
        .into_iter()
        .filter(|t| *t > 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Nesterov–Todd scaling of a primal-dual pair `(s, v)`.
///
/// On an orthant block `u = s/v`, `W = diag(√u)`. On a second-order block
/// `u = √β·w̄^{1/2}` where `w̄` is the normalized scaling point and
/// `β = (sᵀJs / vᵀJv)^{1/4}`, so that `W = P(u) = β·P(w̄^{1/2})` and
/// `block(u) = W² = β²·P(w̄)`.
#[derive(Debug, Clone)]
pub struct NtScaling<'k> {
    cone: &'k ConeProduct,
    u: Vec<f64>,
    /// `√u` on orthant blocks, `u⁻¹` on second-order blocks.
    aux: Vec<f64>,
    lambda: Vec<f64>,
}

impl<'k> NtScaling<'k> {
    pub fn new(cone: &'k ConeProduct, s: &[f64], v: &[f64]) -> Result<Self, ConeError> {
        cone.check_len(s)?;
        cone.check_len(v)?;
        let m = cone.dim();
        let mut u = vec![0.0; m];
        let mut aux = vec![0.0; m];
        let mut lambda = vec![0.0; m];
        for (idx, (c, r)) in cone.iter().enumerate() {
            let (sb, vb) = (&s[r.clone()], &v[r.clone()]);
            match c {
                Cone::Orthant(_) => {
                    for i in 0..sb.len() {
                        if !(sb[i] > 0.0 && vb[i] > 0.0) {
                            return Err(ConeError::NotInterior { block: idx });
                        }
                        let o = r.start + i;
                        u[o] = sb[i] / vb[i];
                        aux[o] = u[o].sqrt();
                        lambda[o] = (sb[i] * vb[i]).sqrt();
                    }
                }
                Cone::SecondOrder(_) => {
                    let (sd, vd) = (soc_det(sb), soc_det(vb));
                    if !(sd > 0.0 && vd > 0.0 && sb[0] > 0.0 && vb[0] > 0.0) {
                        return Err(ConeError::NotInterior { block: idx });
                    }
                    let (sn, vn) = (sd.sqrt(), vd.sqrt());
                    let sbar: Vec<f64> = sb.iter().map(|x| x / sn).collect();
                    let vbar: Vec<f64> = vb.iter().map(|x| x / vn).collect();
                    let gamma = ((1.0 + dot(&sbar, &vbar)) / 2.0).sqrt();
                    let beta = (sn / vn).sqrt();
                    // w̄ = (s̄ + Jv̄)/(2γ) has det 1; u is √β times its
                    // Jordan square root (w̄ + e)/√(2(w̄₀ + 1)).
                    let mut wbar: Vec<f64> = sbar
                        .iter()
                        .zip(&vbar)
                        .map(|(a, b)| (a - b) / (2.0 * gamma))
                        .collect();
                    wbar[0] = (sbar[0] + vbar[0]) / (2.0 * gamma);
                    let root = beta.sqrt() / (2.0 * (wbar[0] + 1.0)).sqrt();
                    let ub = &mut u[r.clone()];
                    ub[0] = root * (wbar[0] + 1.0);
                    for i in 1..sb.len() {
                        ub[i] = root * wbar[i];
                    }
                    let ub = &u[r.clone()];
                    let uinv = soc_inverse(ub).ok_or(ConeError::NotInterior { block: idx })?;
                    aux[r.clone()].copy_from_slice(&uinv);
                    lambda[r].copy_from_slice(&quad_rep(ub, vb));
                }
            }
        }
        Ok(Self {
            cone,
            u,
            aux,
            lambda,
        })
    }

    /// The scaling point `u` with `block(u) = W²`.
    pub fn point(&self) -> &[f64] {
        &self.u
    }

    /// The scaled variable `λ = W v = W⁻¹ s`.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn cone(&self) -> &ConeProduct {
        self.cone
    }

    pub fn apply_w(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x, false)
    }

    pub fn apply_w_inv(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x, true)
    }

    fn apply(&self, x: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (c, r) in self.cone.iter() {
            let xb = &x[r.clone()];
            match c {
                Cone::Orthant(_) => {
                    let sq = &self.aux[r.clone()];
                    for (i, o) in out[r].iter_mut().enumerate() {
                        *o = if inverse {
                            xb[i] / sq[i]
                        } else {
                            xb[i] * sq[i]
                        };
                    }
                }
                Cone::SecondOrder(_) => {
                    let p = if inverse {
                        &self.aux[r.clone()]
                    } else {
                        &self.u[r.clone()]
                    };
                    out[r].copy_from_slice(&quad_rep(p, xb));
                }
            }
        }
        out
    }

    /// Dense `(S, V)` pair of the rescaled complementarity operators, with
    /// `S = W·arrow(λ)` and `V = W⁻¹·arrow(λ)` so that `S V⁻¹ = block(u)`.
    /// The Newton system uses their transposes `arrow(λ)W`, `arrow(λ)W⁻¹`.
    pub fn scaled_operators_dense(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.cone.dim();
        let mut w = DMatrix::zeros(m, m);
        let mut winv = DMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            w.set_column(j, &nalgebra::DVector::from_vec(self.apply_w(&e)));
            winv.set_column(j, &nalgebra::DVector::from_vec(self.apply_w_inv(&e)));
            e[j] = 0.0;
        }
        let lam = self.cone.arrow_dense(&self.lambda);
        (&w * &lam, &winv * &lam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn soc(m: usize) -> ConeProduct {
        ConeProduct::second_order(m).unwrap()
    }

    fn orth(m: usize) -> ConeProduct {
        ConeProduct::orthant(m).unwrap()
    }

    fn random_interior(k: &ConeProduct, rng: &mut impl Rng) -> Vec<f64> {
        let mut x = vec![0.0; k.dim()];
        for (c, r) in k.iter() {
            match c {
                Cone::Orthant(_) => {
                    for v in &mut x[r] {
                        *v = rng.random_range(0.1..3.0);
                    }
                }
                Cone::SecondOrder(_) => {
                    let xb = &mut x[r];
                    for v in xb[1..].iter_mut() {
                        *v = rng.random_range(-1.0..1.0);
                    }
                    xb[0] = norm2(&xb[1..]) + rng.random_range(0.1..2.0);
                }
            }
        }
        x
    }

    #[test]
    fn invalid_blocks_are_rejected() {
        assert!(ConeProduct::new(vec![Cone::Orthant(0)]).is_err());
        assert!(ConeProduct::new(vec![Cone::SecondOrder(1)]).is_err());
        let k = ConeProduct::new(vec![Cone::Orthant(2), Cone::SecondOrder(3)]).unwrap();
        assert_eq!(k.dim(), 5);
        assert_eq!(k.degree(), 3);
    }

    #[test]
    fn membership_examples() {
        assert!(orth(2).contains(&[1.0, 2.0], true).unwrap());
        let k = soc(3);
        assert!(k.contains(&[1.0, 0.6, 0.8], false).unwrap());
        assert!(!k.contains(&[1.0, 0.6, 0.8], true).unwrap());
        assert!(!k.contains(&[0.5, 1.0, 0.0], false).unwrap());
        assert!(matches!(
            k.contains(&[1.0, 0.0], false),
            Err(ConeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identity_examples() {
        assert_eq!(orth(3).identity(), vec![1.0, 1.0, 1.0]);
        assert_eq!(soc(3).identity(), vec![1.0, 0.0, 0.0]);
        let k = ConeProduct::new(vec![Cone::Orthant(1), Cone::SecondOrder(2)]).unwrap();
        let e = k.identity();
        assert_eq!(e, vec![1.0, 1.0, 0.0]);
        assert!(k.contains(&e, true).unwrap());
    }

    #[test]
    fn block_apply_examples() {
        assert_eq!(
            orth(2).block_apply(&[2.0, 3.0], &[1.0, 1.0]).unwrap(),
            vec![2.0, 3.0]
        );
        // block((1,0)) = (2uuᵀ − J)² = I
        let w = [0.3, -1.7];
        let out = soc(2).block_apply(&[1.0, 0.0], &w).unwrap();
        assert!((out[0] - w[0]).abs() < 1e-15 && (out[1] - w[1]).abs() < 1e-15);
        assert!(matches!(
            soc(2).block_solve(&[1.0, 1.0], &w),
            Err(ConeError::NotInterior { .. })
        ));
    }

    #[test]
    fn block_solve_inverts_block_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = ConeProduct::new(vec![
            Cone::Orthant(3),
            Cone::SecondOrder(4),
            Cone::SecondOrder(2),
        ])
        .unwrap();
        for _ in 0..50 {
            let u = random_interior(&k, &mut rng);
            let q: Vec<f64> = (0..k.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = k.block_solve(&u, &q).unwrap();
            let back = k.block_apply(&u, &p).unwrap();
            let err = norm2(&crate::vecops::sub(&back, &q));
            assert!(err <= 1e-12 * norm2(&q).max(1.0) * 10.0, "err {err}");
            // positive definiteness
            assert!(dot(&q, &k.block_apply(&u, &q).unwrap()) > 0.0);
        }
    }

    #[test]
    fn nt_scaling_orthant_example() {
        let u = orth(2).nt_scaling(&[4.0, 9.0], &[2.0, 3.0]).unwrap();
        assert_eq!(u, vec![2.0, 3.0]);
    }

    #[test]
    fn nt_scaling_of_equal_pair_is_identity() {
        let k = soc(2);
        let s = [2.0, 0.5];
        let u = k.nt_scaling(&s, &s).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-14 && u[1].abs() < 1e-14);
        let u = orth(2).nt_scaling(&[3.0, 5.0], &[3.0, 5.0]).unwrap();
        assert_eq!(u, vec![1.0, 1.0]);
    }

    #[test]
    fn nt_scaling_identities_soc3() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = soc(3);
        for _ in 0..20 {
            let s = random_interior(&k, &mut rng);
            let v = random_interior(&k, &mut rng);
            let nt = NtScaling::new(&k, &s, &v).unwrap();
            assert!(k.contains(nt.point(), true).unwrap());
            // W v = W⁻¹ s = λ, block(u) v = s
            let wv = nt.apply_w(&v);
            let wis = nt.apply_w_inv(&s);
            for i in 0..3 {
                assert!((wv[i] - nt.lambda()[i]).abs() < 1e-12);
                assert!((wis[i] - nt.lambda()[i]).abs() < 1e-12);
            }
            let bv = k.block_apply(nt.point(), &v).unwrap();
            assert!(crate::vecops::max_abs_diff(&bv, &s) < 1e-12);
            let (sm, vm) = nt.scaled_operators_dense();
            let lhs = &sm * vm.try_inverse().unwrap();
            let blk = k.block_dense(nt.point()).unwrap();
            assert!((lhs - blk).norm() <= 1e-10);
        }
    }

    #[test]
    fn jordan_solve_inverts_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = ConeProduct::new(vec![Cone::SecondOrder(5), Cone::Orthant(2)]).unwrap();
        let l = random_interior(&k, &mut rng);
        let x: Vec<f64> = (0..k.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = k.jordan_product(&l, &x);
        let back = k.jordan_solve(&l, &r);
        assert!(crate::vecops::max_abs_diff(&back, &x) < 1e-12);
    }

    #[test]
    fn max_step_examples() {
        let k = orth(2);
        assert_eq!(k.max_step_to_boundary(&[1.0, 1.0], &[-2.0, -1.0]), 0.5);
        assert_eq!(k.max_step(&[1.0, 1.0], &[-2.0, -1.0], 1.0), 0.5);
        assert_eq!(k.max_step(&[1.0, 1.0], &[1.0, 0.0], 1.0), 1.0);
        let a = soc(3).max_step_to_boundary(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert!((a - 1.0).abs() < 1e-15);
        // moving along the axis never leaves the cone
        assert_eq!(
            soc(3).max_step_to_boundary(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]),
            f64::INFINITY
        );
    }

    #[test]
    fn orthant_step_hits_boundary_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = orth(6);
        for _ in 0..100 {
            let x = random_interior(&k, &mut rng);
            let dx: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..1.0)).collect();
            let a = k.max_step_to_boundary(&x, &dx);
            if a.is_finite() {
                let xa: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + a * d).collect();
                let mn = xa.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(mn.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn soc_step_stays_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = soc(5);
        for _ in 0..200 {
            let x = random_interior(&k, &mut rng);
            let dx: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = k.max_step(&x, &dx, 0.99);
            let xa: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + a * d).collect();
            assert!(k.contains(&xa, true).unwrap());
            let amax = k.max_step_to_boundary(&x, &dx);
            if amax.is_finite() {
                let xb: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + amax * d).collect();
                assert!(soc_det(&xb).abs() < 1e-9 * (1.0 + dot(&xb, &xb)));
            }
        }
    }
}
