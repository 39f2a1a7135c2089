//! Polynomial filter bases applied through their three-term recurrences.
//!
//! Every basis is written as
//!
//! ```text
//! T_0 = X
//! T_k = lift_k · M T_{k-1} + keep_k · T_{k-1} + back_k · T_{k-2}     (k >= 1, T_{-1} = 0)
//! ```
//!
//! so forward propagation, scalar evaluation and the reverse sweep used for
//! gradients all share one table of coefficients. Only `n x d` panels are
//! ever formed; the operator `M` is touched through [`LinearOperator`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{DenseMatrix, LinearOperator};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FilterBasis {
    /// `x^k` (GPR-GNN style).
    Monomial,
    /// Jacobi `P_k^{a,b}(x)`; requires `a > -1`, `b > -1`.
    Jacobi { a: f64, b: f64 },
    Legendre,
}

/// Coefficients of one recurrence step; see the module docs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecurrenceStep {
    pub lift: f64,
    pub keep: f64,
    pub back: f64,
}

pub const DEFAULT_JACOBI_A: f64 = 1.0;
pub const DEFAULT_JACOBI_B: f64 = 1.0;

impl FilterBasis {
    pub fn jacobi(a: f64, b: f64) -> Result<Self> {
        if !(a > -1.0 && b > -1.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(format!(
                "Jacobi parameters must satisfy a > -1 and b > -1, got a={a}, b={b}"
            )));
        }
        Ok(FilterBasis::Jacobi { a, b })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FilterBasis::Monomial => "monomial",
            FilterBasis::Jacobi { .. } => "jacobi",
            FilterBasis::Legendre => "legendre",
        }
    }

    /// Coefficients producing `T_k` from `T_{k-1}` and `T_{k-2}`, `k >= 1`.
    pub fn step(&self, k: usize) -> RecurrenceStep {
        assert!(k >= 1, "recurrence starts at k = 1");
        match *self {
            FilterBasis::Monomial => RecurrenceStep {
                lift: 1.0,
                keep: 0.0,
                back: 0.0,
            },
            FilterBasis::Legendre => {
                // (k) P_k = (2k - 1) x P_{k-1} - (k - 1) P_{k-2}
                let kf = k as f64;
                RecurrenceStep {
                    lift: (2.0 * kf - 1.0) / kf,
                    keep: 0.0,
                    back: -(kf - 1.0) / kf,
                }
            }
            FilterBasis::Jacobi { a, b } if k == 1 => RecurrenceStep {
                lift: 0.5 * a + 0.5 * b + 1.0,
                keep: 0.5 * a - 0.5 * b,
                back: 0.0,
            },
            FilterBasis::Jacobi { a, b } => {
                let kf = k as f64;
                let s = 2.0 * kf + a + b;
                let denom = 2.0 * kf * (kf + a + b) * (s - 2.0);
                RecurrenceStep {
                    lift: (s - 1.0) * s * (s - 2.0) / denom,
                    keep: (s - 1.0) * (a * a - b * b) / denom,
                    back: -2.0 * (kf + a - 1.0) * (kf + b - 1.0) * s / denom,
                }
            }
        }
    }

    /// Scalar basis values `[P_0(x), ..., P_order(x)]`.
    pub fn eval_scalar(&self, x: f64, order: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(order + 1);
        out.push(1.0);
        for k in 1..=order {
            let st = self.step(k);
            let prev = out[k - 1];
            let prev2 = if k >= 2 { out[k - 2] } else { 0.0 };
            out.push(st.lift * x * prev + st.keep * prev + st.back * prev2);
        }
        out
    }

    /// `Σ_k coeffs[k] · P_k(x)`.
    pub fn eval_poly(&self, coeffs: &[f64], x: f64) -> f64 {
        if coeffs.is_empty() {
            return 0.0;
        }
        self.eval_scalar(x, coeffs.len() - 1)
            .iter()
            .zip(coeffs)
            .map(|(p, c)| p * c)
            .sum()
    }
}

impl fmt::Display for FilterBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterBasis::Jacobi { a, b } => write!(f, "jacobi({a},{b})"),
            other => f.write_str(other.kind_name()),
        }
    }
}

impl FromStr for FilterBasis {
    type Err = Error;

    /// Accepts `monomial` (alias `gprgnn`), `legendre`, `jacobi` and
    /// `jacobi(a,b)`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "monomial" | "gprgnn" | "gpr" => return Ok(FilterBasis::Monomial),
            "legendre" => return Ok(FilterBasis::Legendre),
            "jacobi" => return FilterBasis::jacobi(DEFAULT_JACOBI_A, DEFAULT_JACOBI_B),
            _ => {}
        }
        let bad = || Error::Config(format!("unknown filter basis `{s}`"));
        let args = s
            .strip_prefix("jacobi(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (a, b) = args.split_once(',').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        FilterBasis::jacobi(a, b)
    }
}

impl TryFrom<String> for FilterBasis {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FilterBasis> for String {
    fn from(b: FilterBasis) -> String {
        b.to_string()
    }
}

/// `terms[k] = P_k(M) X` for `k = 0..=order`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisStack {
    pub terms: Vec<DenseMatrix>,
}

impl BasisStack {
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    /// `Σ_k coeffs[k] · terms[k]`.
    pub fn contract(&self, coeffs: &[f64]) -> Result<DenseMatrix> {
        if coeffs.len() != self.terms.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for a stack of {} terms",
                coeffs.len(),
                self.terms.len()
            )));
        }
        let (r, c) = self.terms[0].shape();
        let mut out = DenseMatrix::zeros(r, c);
        for (t, &a) in self.terms.iter().zip(coeffs) {
            if a != 0.0 {
                out.axpy(a, t)?;
            }
        }
        Ok(out)
    }

    /// `<terms[k], upstream>` for every k.
    pub fn project(&self, upstream: &DenseMatrix) -> Result<Vec<f64>> {
        self.terms.iter().map(|t| t.dot(upstream)).collect()
    }
}

pub fn propagate_basis<Op: LinearOperator + ?Sized>(
    basis: FilterBasis,
    op: &Op,
    x: &DenseMatrix,
    order: usize,
) -> Result<BasisStack> {
    if op.dim() != x.n_rows() {
        return Err(Error::Shape(format!(
            "operator of dim {} applied to {:?}",
            op.dim(),
            x.shape()
        )));
    }
    let mut terms: Vec<DenseMatrix> = Vec::with_capacity(order + 1);
    terms.push(x.clone());
    for k in 1..=order {
        let st = basis.step(k);
        let mut next = op.apply(&terms[k - 1])?;
        if next.shape() != x.shape() {
            return Err(Error::Shape(format!(
                "operator changed panel shape {:?} -> {:?}",
                x.shape(),
                next.shape()
            )));
        }
        next.scale(st.lift);
        if st.keep != 0.0 {
            next.axpy(st.keep, &terms[k - 1])?;
        }
        if st.back != 0.0 && k >= 2 {
            next.axpy(st.back, &terms[k - 2])?;
        }
        terms.push(next);
    }
    Ok(BasisStack { terms })
}

/// Reverse sweep through [`propagate_basis`].
///
/// Given the forward `stack` and the loss gradient `upstream` with respect to
/// `stack.contract(coeffs)`, returns the gradient with respect to the input
/// panel `X`. `apply_adjoint(u, t_prev)` must return `Mᵀ u`; it also receives
/// the forward term `T_{k-1}` that `u` multiplied, so callers whose operator
/// depends on parameters can accumulate `<∂M u, T_{k-1}>` on the fly.
pub fn backpropagate_basis<F>(
    basis: FilterBasis,
    stack: &BasisStack,
    coeffs: &[f64],
    upstream: &DenseMatrix,
    mut apply_adjoint: F,
) -> Result<DenseMatrix>
where
    F: FnMut(&DenseMatrix, &DenseMatrix) -> Result<DenseMatrix>,
{
    let order = stack.order();
    if coeffs.len() != order + 1 {
        return Err(Error::Shape(format!(
            "{} coefficients for order {order}",
            coeffs.len()
        )));
    }
    let mut adj: Vec<DenseMatrix> = coeffs.iter().map(|&c| upstream.scaled(c)).collect();
    for k in (1..=order).rev() {
        let st = basis.step(k);
        let (lower, upper) = adj.split_at_mut(k);
        let g = &upper[0];
        if st.keep != 0.0 {
            lower[k - 1].axpy(st.keep, g)?;
        }
        if st.back != 0.0 && k >= 2 {
            lower[k - 2].axpy(st.back, g)?;
        }
        let u = g.scaled(st.lift);
        let back = apply_adjoint(&u, &stack.terms[k - 1])?;
        lower[k - 1].axpy(1.0, &back)?;
    }
    Ok(adj.swap_remove(0))
}

/// Samples the filter `Σ_k coeffs[k] P_k(x)` at `x = 1 - λ` for normalized
/// Laplacian eigenvalues `λ ∈ [0, 2]`.
pub fn frequency_response(
    basis: FilterBasis,
    coeffs: &[f64],
    laplacian_eigenvalues: &[f64],
) -> Result<Vec<(f64, f64)>> {
    laplacian_eigenvalues
        .iter()
        .map(|&lambda| {
            if !(0.0..=2.0).contains(&lambda) {
                return Err(Error::Domain(format!(
                    "Laplacian eigenvalue {lambda} outside [0, 2]"
                )));
            }
            Ok((lambda, basis.eval_poly(coeffs, 1.0 - lambda)))
        })
        .collect()
}

/// `count` evenly spaced points covering `[0, 2]` inclusive.
pub fn lambda_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|j| 2.0 * j as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{CsrMatrix, FnOperator};

    const BASES: [FilterBasis; 3] = [
        FilterBasis::Monomial,
        FilterBasis::Jacobi { a: 1.0, b: 1.0 },
        FilterBasis::Legendre,
    ];

    #[test]
    fn order_zero_is_identity() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let op = CsrMatrix::identity(2);
        for b in BASES {
            let s = propagate_basis(b, &op, &x, 0).unwrap();
            assert_eq!(s.terms, vec![x.clone()]);
        }
    }

    #[test]
    fn monomial_involution() {
        let swap = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
        let e0 = DenseMatrix::from_rows(&[[1.0], [0.0]]);
        let e1 = DenseMatrix::from_rows(&[[0.0], [1.0]]);
        let s = propagate_basis(FilterBasis::Monomial, &swap, &e0, 2).unwrap();
        assert_eq!(s.terms, vec![e0.clone(), e1, e0]);
    }

    #[test]
    fn legendre_scalar_operator() {
        let half = FnOperator::new(1, |x: &DenseMatrix| Ok(x.scaled(0.5)));
        let x = DenseMatrix::from_rows(&[[1.0]]);
        let s = propagate_basis(FilterBasis::Legendre, &half, &x, 2).unwrap();
        assert!((s.terms[2].get(0, 0) + 0.125).abs() < 1e-15);
    }

    #[test]
    fn jacobi_first_step_matches_seed() {
        let (a, b) = (0.5, -0.25);
        let basis = FilterBasis::jacobi(a, b).unwrap();
        let p = basis.eval_scalar(0.3, 1);
        assert!((p[1] - (0.5 * a - 0.5 * b + (0.5 * a + 0.5 * b + 1.0) * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn jacobi_domain() {
        assert!(FilterBasis::jacobi(-1.0, 0.0).is_err());
        assert!(FilterBasis::jacobi(0.0, f64::NAN).is_err());
        assert!("jacobi(-2,0)".parse::<FilterBasis>().is_err());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("GPRGNN".parse::<FilterBasis>().unwrap(), FilterBasis::Monomial);
        assert_eq!(
            "jacobi".parse::<FilterBasis>().unwrap(),
            FilterBasis::Jacobi { a: 1.0, b: 1.0 }
        );
        let j: FilterBasis = "jacobi(0.5, 2)".parse().unwrap();
        assert_eq!(j, FilterBasis::Jacobi { a: 0.5, b: 2.0 });
        assert_eq!(j.to_string().parse::<FilterBasis>().unwrap(), j);
        assert!("chebyshev".parse::<FilterBasis>().is_err());
    }

    #[test]
    fn frequency_response_examples() {
        for b in BASES {
            let r = frequency_response(b, &[1.0, 0.0, 0.0], &[0.0, 0.7, 2.0]).unwrap();
            assert!(r.iter().all(|&(_, h)| (h - 1.0).abs() < 1e-15));
        }
        let r = frequency_response(FilterBasis::Monomial, &[1.0, 1.0], &[0.0, 2.0]).unwrap();
        assert_eq!(r, vec![(0.0, 2.0), (2.0, 0.0)]);
        let r = frequency_response(FilterBasis::Monomial, &[0.0, 1.0], &[1.0]).unwrap();
        assert_eq!(r[0].1, 0.0);
        assert!(matches!(
            frequency_response(FilterBasis::Monomial, &[1.0], &[2.5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lambda_grid_endpoints() {
        assert_eq!(lambda_grid(3), vec![0.0, 1.0, 2.0]);
        assert_eq!(lambda_grid(1), vec![0.0]);
        assert!(lambda_grid(0).is_empty());
    }

    #[test]
    fn backprop_matches_explicit_adjoint_for_monomial() {
        // d/dX <upstream, Σ c_k M^k X> = Σ c_k (Mᵀ)^k upstream
        let m = DenseMatrix::from_rows(&[[0.0, 2.0], [1.0, 0.5]]);
        let x = DenseMatrix::from_rows(&[[1.0], [-1.0]]);
        let up = DenseMatrix::from_rows(&[[0.3], [0.7]]);
        let c = [0.5, -1.0, 2.0];
        let s = propagate_basis(FilterBasis::Monomial, &m, &x, 2).unwrap();
        let mt = m.transpose();
        let g = backpropagate_basis(FilterBasis::Monomial, &s, &c, &up, |u, _| mt.matmul(u)).unwrap();
        let mt_up = mt.matmul(&up).unwrap();
        let mt2_up = mt.matmul(&mt_up).unwrap();
        let mut expect = up.scaled(c[0]);
        expect.axpy(c[1], &mt_up).unwrap();
        expect.axpy(c[2], &mt2_up).unwrap();
        assert!(g.sub(&expect).unwrap().max_abs() < 1e-14);
    }
}
