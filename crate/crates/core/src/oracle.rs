//! Multivariate non-commutative polynomials over the meta-path adjacencies.
//!
//! A term is a word `i_1 i_2 ... i_k` over `R` relation indices standing for
//! the product `A_{i_1} A_{i_2} ... A_{i_k}`. The module counts terms and
//! parameters of the full word expansion against the local/global filters
//! and checks numerically that the k-th power of `Σ β_i A_i` equals the
//! sum over all length-k words weighted by the product of their β's.
//!
//! Relation indices are zero-based.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{propagate_basis, FilterBasis};
use crate::model::global_operator;
use crate::sparse::{spmm, sym_normalize, CsrMatrix, DenseMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcPolyTerm {
    pub word: Vec<usize>,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcPolynomial {
    terms: Vec<NcPolyTerm>,
    num_vars: usize,
    order: usize,
}

impl NcPolynomial {
    /// Validates and canonicalizes: coefficients of repeated words are
    /// summed and terms are sorted lexicographically by word.
    pub fn new(num_vars: usize, order: usize, terms: Vec<NcPolyTerm>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for t in terms {
            if t.word.len() > order {
                return Err(Error::Argument(format!(
                    "word {:?} longer than order {order}",
                    t.word
                )));
            }
            if let Some(&i) = t.word.iter().find(|&&i| i >= num_vars) {
                return Err(Error::Argument(format!(
                    "relation index {i} outside [0, {num_vars})"
                )));
            }
            *merged.entry(t.word).or_insert(0.0) += t.coeff;
        }
        Ok(Self {
            terms: merged
                .into_iter()
                .map(|(word, coeff)| NcPolyTerm { word, coeff })
                .collect(),
            num_vars,
            order,
        })
    }

    pub fn terms(&self) -> &[NcPolyTerm] {
        &self.terms
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|t| t.coeff *= c);
        out
    }

    pub fn coeff(&self, word: &[usize]) -> f64 {
        self.terms
            .binary_search_by(|t| t.word.as_slice().cmp(word))
            .map_or(0.0, |p| self.terms[p].coeff)
    }
}

/// All `num_vars^len` words of the given length, in lexicographic order.
pub fn words(num_vars: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..num_vars).map(move |i| {
                    let mut next = w.clone();
                    next.push(i);
                    next
                })
            })
            .collect();
    }
    out
}

fn checked_pow(base: u128, exp: usize) -> Result<u128> {
    let exp = u32::try_from(exp).map_err(|_| Error::Argument(format!("order {exp} too large")))?;
    base.checked_pow(exp)
        .ok_or_else(|| Error::Argument(format!("{base}^{exp} overflows")))
}

/// Number of terms of a full `R`-variable non-commutative polynomial of
/// order `K`: `1 + R + ... + R^K`, which is `K + 1` when `R = 1`.
pub fn count_terms_mnc(r: usize, k: usize) -> Result<u128> {
    match r {
        0 => Err(Error::Argument("R must be at least 1".into())),
        1 => Ok(k as u128 + 1),
        _ => {
            let r = r as u128;
            Ok((checked_pow(r, k + 1)? - 1) / (r - 1))
        }
    }
}

/// Filter families compared by parameter and term count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountVariant {
    /// Full word expansion (one coefficient per word).
    Pshgcn,
    Local,
    Global,
    Full,
}

impl CountVariant {
    pub const ALL: [CountVariant; 4] = [
        CountVariant::Pshgcn,
        CountVariant::Local,
        CountVariant::Global,
        CountVariant::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CountVariant::Pshgcn => "pshgcn",
            CountVariant::Local => "local",
            CountVariant::Global => "global",
            CountVariant::Full => "full",
        }
    }
}

impl fmt::Display for CountVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CountVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pshgcn" | "mnc" => Ok(CountVariant::Pshgcn),
            "local" | "local_only" => Ok(CountVariant::Local),
            "global" | "global_only" => Ok(CountVariant::Global),
            "full" => Ok(CountVariant::Full),
            other => Err(Error::Argument(format!(
                "unknown count variant `{other}` (expected pshgcn, local, global or full)"
            ))),
        }
    }
}

fn check_rk(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::Argument("R must be at least 1".into()));
    }
    Ok(())
}

/// Learnable filter coefficients of each family.
pub fn count_params(variant: CountVariant, r: usize, k: usize) -> Result<u128> {
    check_rk(r)?;
    let (r, k) = (r as u128, k as u128);
    Ok(match variant {
        CountVariant::Pshgcn => return count_terms_mnc(r as usize, k as usize),
        CountVariant::Local => r * (k + 1),
        CountVariant::Global => r + k + 1,
        CountVariant::Full => (r + 1) * (k + 1) + r,
    })
}

/// Filtered terms each family sums.
pub fn count_terms(variant: CountVariant, r: usize, k: usize) -> Result<u128> {
    check_rk(r)?;
    let (r, k) = (r as u128, k as u128);
    Ok(match variant {
        CountVariant::Pshgcn => return count_terms_mnc(r as usize, k as usize),
        CountVariant::Local => r * (k + 1),
        CountVariant::Global => k + 1,
        CountVariant::Full => (r + 1) * (k + 1),
    })
}

/// `(Σ_i β_i A_i)^k` written as a sum over all `R^k` words with coefficient
/// `Π β` over the word.
pub fn expand_global_power(beta: &[f64], k: usize) -> Result<NcPolynomial> {
    let terms = words(beta.len(), k)
        .into_iter()
        .map(|word| {
            let coeff = word.iter().map(|&i| beta[i]).product();
            NcPolyTerm { word, coeff }
        })
        .collect();
    NcPolynomial::new(beta.len(), k, terms)
}

/// The monomial global filter `Σ_k γ_k (Σ_i β_i A_i)^k` as a word expansion.
pub fn expand_global_filter(beta: &[f64], gamma: &[f64]) -> Result<NcPolynomial> {
    let order = gamma.len().saturating_sub(1);
    let mut terms = Vec::new();
    for (k, &g) in gamma.iter().enumerate() {
        terms.extend(expand_global_power(beta, k)?.scaled(g).terms);
    }
    NcPolynomial::new(beta.len(), order, terms)
}

const EVAL_CHUNK: usize = 64;

/// `Σ coeff · A_{i_1}(A_{i_2}(...(A_{i_k} x)))`. Words are folded onto `x`
/// one SpMM at a time; no sparse-sparse product is formed. Chunks of terms
/// run in parallel and are summed in term order.
pub fn eval_ncpoly(poly: &NcPolynomial, mats: &[&CsrMatrix], x: &DenseMatrix) -> Result<DenseMatrix> {
    if mats.len() != poly.num_vars {
        return Err(Error::Shape(format!(
            "{} matrices for a {}-variable polynomial",
            mats.len(),
            poly.num_vars
        )));
    }
    for m in mats {
        if !m.is_square() || m.n_cols() != x.n_rows() {
            return Err(Error::Shape(format!(
                "matrix {:?} cannot act on {:?}",
                m.shape(),
                x.shape()
            )));
        }
    }
    let partials: Vec<DenseMatrix> = poly
        .terms
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let mut acc = DenseMatrix::zeros(x.n_rows(), x.n_cols());
            for t in chunk {
                let mut v = x.clone();
                for &i in t.word.iter().rev() {
                    v = spmm(mats[i], &v)?;
                }
                acc.axpy(t.coeff, &v)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut out = DenseMatrix::zeros(x.n_rows(), x.n_cols());
    for p in &partials {
        out.axpy(1.0, p)?;
    }
    Ok(out)
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute difference when `b` is zero.
pub fn relative_discrepancy(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    let diff = a.sub(b)?.frobenius_norm();
    let scale = b.frobenius_norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderDiscrepancy {
    pub k: usize,
    pub words: usize,
    pub max_rel_discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerExpansionReport {
    pub tol: f64,
    pub orders: Vec<OrderDiscrepancy>,
    pub pass: bool,
}

impl PowerExpansionReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.orders
            .iter()
            .fold(0.0, |m, o| m.max(o.max_rel_discrepancy))
    }
}

/// Compares, for every `k ≤ order` and `trials` random panels, the k-th
/// monomial term propagated through the lazy global operator with the
/// word expansion of `(Σ β_i A_i)^k` applied to the same panel.
pub fn verify_power_expansion<R: Rng + ?Sized>(
    mats: &[&CsrMatrix],
    beta: &[f64],
    order: usize,
    trials: usize,
    tol: f64,
    panel_cols: usize,
    rng: &mut R,
) -> Result<PowerExpansionReport> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let op = global_operator(mats, beta)?;
    let n = mats[0].n_rows();
    let expansions = (0..=order)
        .map(|k| expand_global_power(beta, k))
        .collect::<Result<Vec<_>>>()?;
    let mut orders: Vec<OrderDiscrepancy> = expansions
        .iter()
        .enumerate()
        .map(|(k, p)| OrderDiscrepancy {
            k,
            words: p.len(),
            max_rel_discrepancy: 0.0,
        })
        .collect();
    for _ in 0..trials {
        let x = DenseMatrix::from_fn(n, panel_cols, |_, _| rng.random_range(-1.0..1.0));
        let stack = propagate_basis(FilterBasis::Monomial, &op, &x, order)?;
        for (k, poly) in expansions.iter().enumerate() {
            let expanded = eval_ncpoly(poly, mats, &x)?;
            let d = relative_discrepancy(&stack.terms[k], &expanded)?;
            let slot = &mut orders[k].max_rel_discrepancy;
            *slot = slot.max(d);
        }
    }
    let pass = orders
        .iter()
        .all(|o| o.max_rel_discrepancy.is_finite() && o.max_rel_discrepancy <= tol);
    Ok(PowerExpansionReport { tol, orders, pass })
}

/// A random instance: `r` symmetric-normalized `n x n` adjacencies and
/// weights drawn from `[-1, 1]`.
pub fn random_instance(r: usize, n: usize, seed: u64) -> (Vec<CsrMatrix>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats = (0..r)
        .map(|_| {
            let mut trips = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < 0.4 {
                        let w = rng.random_range(0.5..2.0);
                        trips.push((i, j, w));
                        trips.push((j, i, w));
                    }
                }
            }
            let a = CsrMatrix::from_triplets(n, n, trips).expect("indices in range");
            sym_normalize(&a).expect("non-negative weights")
        })
        .collect();
    let beta = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
    (mats, beta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub r: usize,
    pub k: usize,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub tol: f64,
    /// Worst relative discrepancy per order over all seeds.
    pub max_rel_discrepancy: BTreeMap<usize, f64>,
    pub pass: bool,
}

/// Runs [`verify_power_expansion`] on one random instance per seed.
pub fn oracle_check(r: usize, k: usize, n: usize, seeds: &[u64], trials: usize, tol: f64) -> Result<OracleCheckReport> {
    check_rk(r)?;
    if n == 0 {
        return Err(Error::Argument("matrix size must be positive".into()));
    }
    let mut worst: BTreeMap<usize, f64> = (0..=k).map(|i| (i, 0.0)).collect();
    let mut pass = true;
    for &seed in seeds {
        let (mats, beta) = random_instance(r, n, seed);
        let refs: Vec<&CsrMatrix> = mats.iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let rep = verify_power_expansion(&refs, &beta, k, trials, tol, 3, &mut rng)?;
        pass &= rep.pass;
        for o in rep.orders {
            let w = worst.entry(o.k).or_insert(0.0);
            *w = w.max(o.max_rel_discrepancy);
        }
    }
    Ok(OracleCheckReport {
        r,
        k,
        n,
        seeds: seeds.to_vec(),
        tol,
        max_rel_discrepancy: worst,
        pass,
    })
}
