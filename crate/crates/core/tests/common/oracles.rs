//! Reference computations that avoid the library's recurrences.

use h2sgnn_core::sparse::{CsrMatrix, DenseMatrix};
use h2sgnn_core::FilterBasis;
use nalgebra::{DMatrix, SymmetricEigen};

/// Generalized binomial coefficient `z choose m`.
fn binom(z: f64, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (z - i as f64) / (i as f64 + 1.0))
}

/// Explicit sum form of the Jacobi polynomial `P_n^{(a,b)}(x)`.
pub fn jacobi_explicit(n: usize, a: f64, b: f64, x: f64) -> f64 {
    (0..=n)
        .map(|s| {
            binom(n as f64 + a, n - s)
                * binom(n as f64 + b, s)
                * ((x - 1.0) / 2.0).powi(s as i32)
                * ((x + 1.0) / 2.0).powi((n - s) as i32)
        })
        .sum()
}

/// Basis value `P_k(x)` from closed forms only.
pub fn basis_value(basis: FilterBasis, k: usize, x: f64) -> f64 {
    match basis {
        FilterBasis::Monomial => x.powi(k as i32),
        FilterBasis::Legendre => jacobi_explicit(k, 0.0, 0.0, x),
        FilterBasis::Jacobi { a, b } => jacobi_explicit(k, a, b, x),
    }
}

pub fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.n_rows(), m.n_cols(), m.data())
}

pub fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `U diag(f(λ)) Uᵀ x` for a symmetric operator.
pub fn spectral_apply(op: &CsrMatrix, x: &DenseMatrix, f: impl Fn(f64) -> f64) -> DenseMatrix {
    let eig = SymmetricEigen::new(to_nalgebra(&op.to_dense()));
    let u = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    from_nalgebra(&(u * d * u.transpose() * to_nalgebra(x)))
}

/// Dominant eigenvalue magnitude by power iteration on `MᵀM`.
pub fn spectral_norm(m: &CsrMatrix, iters: usize) -> f64 {
    let dense = to_nalgebra(&m.to_dense());
    let mut v = nalgebra::DVector::from_element(m.n_cols(), 1.0);
    let mut est = 0.0;
    for _ in 0..iters {
        let w = dense.transpose() * (&dense * &v);
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        est = n.sqrt();
        v = w / n;
    }
    est
}
