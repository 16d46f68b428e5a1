//! Scaled proximal operators of quadratic-support (QS) functions.
//!
//! A QS function `g(x) = sup{ yᵀ(Bx + d) : Ay ⪰_K b }` is described by conic
//! data over a product of orthants and second-order cones. Its proximal map
//! in a metric `H` is obtained from a dual conic QP solved by a primal-dual
//! interior method whose linear algebra exploits the structure of `A`, `B`
//! and `H` ([`linops`]). The [`pqn`] module wraps this in a proximal L-BFGS
//! method for `min f(x) + g(x)`.

pub mod cones;
pub mod ipm;
pub mod linops;
pub mod pqn;
pub mod problems;
pub mod proxeval;
pub mod qscalc;
pub mod vecops;
