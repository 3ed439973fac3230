//! Solvers for the scattering amplitude `g^T x = y^T b`, where `A x = b` and
//! `A^T y = g` are the forward and adjoint systems of a sparse nonsymmetric
//! matrix.
//!
//! The central method lifts both systems into one `2n x 2n` nonsymmetric
//! saddle-point system
//!
//! ```text
//!     M = [ A^T W A   A^T ]      b = [ A^T W c + d ]
//!         [   -A       0  ]          [     -c      ]
//! ```
//!
//! whose spectrum is real and positive once the weight `W` is large enough,
//! and runs a conjugate gradient iteration in the inner product induced by
//! `J (M - gamma I)`. See [`nspcg`] for the iteration, [`spectral`] for the
//! choice of `W = w I` and `gamma`, and [`precond`] for the block
//! preconditioner built from a (possibly incomplete) QR factorization.
//!
//! QMR, LSQR and GLSQR baselines live in [`qmr`] and [`bidiag`]; the
//! [`bench`] module regenerates the test problems and drives all solvers.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bidiag;
pub mod error;
pub mod history;
pub mod linalg;
pub mod mmio;
pub mod nspcg;
pub mod precond;
pub mod qmr;
pub mod saddle;
pub mod spectral;

pub use error::{Error, Result};
pub use history::{ConvergenceHistory, IterationRecord, SolveStatus};
pub use linalg::{CsrMatrix, DenseMatrix, LinearOperator};
pub use saddle::{SaddleSystem, SaddleVector, Weight};
