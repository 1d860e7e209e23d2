//! Complete-monotonicity checks for functions given as Laplace transforms.
//!
//! The crate evaluates the two reference kernels
//! `φ₃(t) = (g(t) - S(m,t)) e^{-t}` and `φ₄(t) = S(m,t) - t e^{-t}/(1 - e^{-t})`,
//! integrates them against `tⁿ e^{-xt}` with certified tail bounds, decides
//! complete monotonicity from kernel signs and derivative signs, and
//! experiments with exponential moments of discrete signed measures.

// `!(x > 0.0)` rejects NaN by design; quadrature nodes keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod cmcheck;
pub mod format;
pub mod laplace;
pub mod moments;
pub mod specfun;
