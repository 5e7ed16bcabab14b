//! Saturated boundary feedback design for 1-D linear hyperbolic systems.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! - [`linalg`]: small dense real matrices, a Jacobi eigensolver and
//!   direct solvers.
//! - [`lmi`]: affine symmetric-matrix expressions over structured decision
//!   variables, evaluation and constraint margins.
//! - [`sdp`]: a log-det barrier path-following solver for the small
//!   semidefinite programs produced by [`lmi`].
//! - [`control`]: plant model, saturation and dead-zone maps, the analysis
//!   and synthesis LMIs, ISS coefficients, well-posedness constants and the
//!   `(mu, alpha)` grid search.
//! - [`pde`]: a two-step Lax-Friedrichs simulator of the closed loop plus
//!   the Lyapunov and dissipation-bound diagnostics evaluated along it.
//!
//! File formats and the command-line front end live in the `hypiss` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod control;
pub mod linalg;
pub mod lmi;
mod math;
pub mod pde;
pub mod sdp;

pub use control::{Controller, Plant, SynthesisCertificate};
pub use linalg::{DiagMatrix, LinalgError, Matrix, SymMatrix};
pub use lmi::{AffineMatrixExpr, LmiProblem, Point, Sense};
pub use sdp::{Solution, SolveOptions, Status};
