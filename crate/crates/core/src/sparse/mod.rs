//! Sparse and dense kernels shared by every other module.
//!
//! All routines are pure. Row-parallel kernels accumulate each output row
//! in a fixed order, so results do not depend on the thread count.

mod csr;
mod dense;

pub use csr::{add_scaled, spgemm, spmm, sym_normalize, CsrMatrix};
pub use dense::DenseMatrix;

use crate::error::{Error, Result};

/// A square linear map applied to `n x d` panels, one column at a time in
/// effect. Implementors never need to materialize an `n x n` matrix.
pub trait LinearOperator: Sync {
    /// Side length of the (square) operator.
    fn dim(&self) -> usize;

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        spmm(self, x)
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.matmul(x)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).apply(x)
    }
}

/// Wraps a closure as an operator of the given dimension.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&DenseMatrix) -> Result<DenseMatrix> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&DenseMatrix) -> Result<DenseMatrix> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.n_rows() != self.dim {
            return Err(Error::Shape(format!(
                "operator of dim {} applied to {:?}",
                self.dim,
                x.shape()
            )));
        }
        let y = (self.f)(x)?;
        if y.shape() != x.shape() {
            return Err(Error::Shape(format!(
                "operator changed panel shape {:?} -> {:?}",
                x.shape(),
                y.shape()
            )));
        }
        Ok(y)
    }
}
