//! Local hidden-state models and hidden nonlocality for bound entangled states.
//!
//! The crate is organised bottom-up:
//!
//! - [`hermlin`]: dense complex operators on tensor-product spaces (partial
//!   trace, partial transpose, Hermitian eigendecomposition).
//! - [`conic`]: a small dense primal-dual interior-point SDP solver with an
//!   independent solution verifier.
//! - [`states`]: the three- and two-party states studied here, local filters,
//!   PPT checks and DPS entanglement certification.
//! - [`bell`]: Bell inequalities, Bell operators, local bounds and the see-saw
//!   optimizer.
//! - [`lhs`]: measurement polytopes, shrinking factors and the local
//!   hidden-state construction with checkable certificates.
//! - [`cli`]: reproduction pipelines and JSON reports.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bell;
pub mod cli;
pub mod conic;
pub mod hermlin;
pub mod lhs;
pub mod states;

pub use num_complex::Complex64;
