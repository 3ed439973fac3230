//! Sparse and dense kernels shared by every solver.

mod banded;
mod dense;
mod sparse;
pub mod vector;

pub use banded::{tridiagonal_lstsq, tridiagonal_solve, Tridiagonal};
pub use dense::{dense_lstsq, dense_solve, householder_qr, DenseMatrix};
pub use sparse::CsrMatrix;

/// Matrix-free operator contract: `y = A x` and `y = A^T x`.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64>;
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (**self).apply(x)
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        (**self).apply_transpose(x)
    }
}

/// The normal operator `x -> A^T (A x)`.
pub struct NormalOperator<'a, A: LinearOperator + ?Sized>(pub &'a A);

impl<A: LinearOperator + ?Sized> LinearOperator for NormalOperator<'_, A> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply_transpose(&self.0.apply(x))
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x)
    }
}

/// `A^T` viewed as an operator.
pub struct Transposed<'a, A: LinearOperator + ?Sized>(pub &'a A);

impl<A: LinearOperator + ?Sized> LinearOperator for Transposed<'_, A> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply_transpose(x)
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply(x)
    }
}

/// Identity operator of a given dimension.
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn nrows(&self) -> usize {
        self.0
    }
    fn ncols(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}
