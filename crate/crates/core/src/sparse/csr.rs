use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed sparse row matrix in canonical form: column indices strictly
/// increasing within each row, no duplicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Validates raw CSR arrays and wraps them.
    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        };
        m.check_invariants()?;
        Ok(m)
    }

    /// Builds a canonical matrix from (row, col, value) triplets; duplicate
    /// coordinates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut trips: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &trips {
            if r >= n_rows || c >= n_cols {
                return Err(Error::shape(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
        }
        trips.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(trips.len());
        let mut values: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trips {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Converts a dense matrix, keeping only nonzero entries.
    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(d.n_rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in d.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: d.n_rows(),
            n_cols: d.n_cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            d.set(i, j, v);
        }
        d
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Number of stored entries.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::shape(format!("invalid CSR: {msg}")));
        if self.row_ptr.len() != self.n_rows + 1 {
            return fail(format!(
                "row_ptr has {} entries for {} rows",
                self.row_ptr.len(),
                self.n_rows
            ));
        }
        if self.row_ptr[0] != 0 {
            return fail("row_ptr[0] != 0".into());
        }
        if self.col_idx.len() != self.values.len() || self.row_ptr[self.n_rows] != self.col_idx.len()
        {
            return fail("row_ptr, col_idx and values disagree on nnz".into());
        }
        for i in 0..self.n_rows {
            if self.row_ptr[i] > self.row_ptr[i + 1] {
                return fail(format!("row_ptr decreases at row {i}"));
            }
            let (cols, _) = self.row(i);
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return fail(format!("row {i} not strictly increasing"));
            }
            if cols.last().is_some_and(|&c| c >= self.n_cols) {
                return fail(format!("row {i} has a column >= {}", self.n_cols));
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each output row stays sorted.
        for (i, j, v) in self.iter() {
            let p = next[j];
            col_idx[p] = i;
            values[p] = v;
            next[j] += 1;
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Exact structural and numeric symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    /// Keeps entries for which `keep(row, col, value)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if keep(i, j, v) {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn without_diagonal(&self) -> CsrMatrix {
        self.filter(|i, j, _| i != j)
    }

    /// Same structure with every stored value replaced by 1.
    pub fn binarized(&self) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = 1.0);
        out
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }
}

/// Sparse-dense product `a * x`. Parallel over output rows; each row
/// accumulates its terms in stored column order.
pub fn spmm(a: &CsrMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if a.n_cols != x.n_rows() {
        return Err(Error::shape(format!(
            "spmm: {:?} x {:?}",
            a.shape(),
            x.shape()
        )));
    }
    let d = x.n_cols();
    let mut out = DenseMatrix::zeros(a.n_rows, d);
    if d == 0 {
        return Ok(out);
    }
    out.data_mut()
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(i, out_row)| {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, &xv) in out_row.iter_mut().zip(x.row(j)) {
                    *o += v * xv;
                }
            }
        });
    Ok(out)
}

/// Sparse-sparse product `a * b` (row-wise Gustavson). Entries that cancel to
/// exactly zero are dropped.
pub fn spgemm(a: &CsrMatrix, b: &CsrMatrix) -> Result<CsrMatrix> {
    if a.n_cols != b.n_rows {
        return Err(Error::shape(format!(
            "spgemm: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let n_cols = b.n_cols;
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..a.n_rows)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n_cols], vec![false; n_cols], Vec::new()),
            |(acc, seen, touched), i| {
                let (a_cols, a_vals) = a.row(i);
                for (&k, &av) in a_cols.iter().zip(a_vals) {
                    let (b_cols, b_vals) = b.row(k);
                    for (&j, &bv) in b_cols.iter().zip(b_vals) {
                        if !seen[j] {
                            seen[j] = true;
                            touched.push(j);
                        }
                        acc[j] += av * bv;
                    }
                }
                touched.sort_unstable();
                let mut cols = Vec::with_capacity(touched.len());
                let mut vals = Vec::with_capacity(touched.len());
                for &j in touched.iter() {
                    let v = acc[j];
                    if v != 0.0 {
                        cols.push(j);
                        vals.push(v);
                    }
                    acc[j] = 0.0;
                    seen[j] = false;
                }
                touched.clear();
                (cols, vals)
            },
        )
        .collect();
    Ok(assemble(a.n_rows, n_cols, rows))
}

fn assemble(n_rows: usize, n_cols: usize, rows: Vec<(Vec<usize>, Vec<f64>)>) -> CsrMatrix {
    let nnz: usize = rows.iter().map(|(c, _)| c.len()).sum();
    let mut row_ptr = Vec::with_capacity(n_rows + 1);
    let mut col_idx = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for (c, v) in rows {
        col_idx.extend(c);
        values.extend(v);
        row_ptr.push(col_idx.len());
    }
    CsrMatrix {
        n_rows,
        n_cols,
        row_ptr,
        col_idx,
        values,
    }
}

/// Weighted sum `Σ weights[i] * matrices[i]` of same-shape square matrices.
/// Exact zeros in the result are dropped.
pub fn add_scaled(matrices: &[&CsrMatrix], weights: &[f64]) -> Result<CsrMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Argument("add_scaled needs at least one matrix".into()))?;
    if matrices.len() != weights.len() {
        return Err(Error::Argument(format!(
            "{} matrices but {} weights",
            matrices.len(),
            weights.len()
        )));
    }
    let shape = first.shape();
    for m in matrices {
        if !m.is_square() || m.shape() != shape {
            return Err(Error::shape(format!(
                "add_scaled: {:?} vs {:?} (square required)",
                m.shape(),
                shape
            )));
        }
    }
    let rows = (0..shape.0)
        .map(|i| {
            let mut merged: Vec<(usize, f64)> = Vec::new();
            for (m, &w) in matrices.iter().zip(weights) {
                let (cols, vals) = m.row(i);
                merged.extend(cols.iter().zip(vals).map(|(&j, &v)| (j, w * v)));
            }
            merged.sort_by_key(|&(j, _)| j);
            let mut cols: Vec<usize> = Vec::with_capacity(merged.len());
            let mut vals: Vec<f64> = Vec::with_capacity(merged.len());
            for (j, v) in merged {
                if cols.last() == Some(&j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            let (cols, vals): (Vec<_>, Vec<_>) =
                cols.into_iter().zip(vals).filter(|&(_, v)| v != 0.0).unzip();
            (cols, vals)
        })
        .collect();
    Ok(assemble(shape.0, shape.1, rows))
}

/// Symmetric normalization `D^{-1/2} A D^{-1/2}` with `d_i` the row sums.
/// Zero-degree rows and columns stay zero.
pub fn sym_normalize(a: &CsrMatrix) -> Result<CsrMatrix> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "sym_normalize needs a square matrix, got {:?}",
            a.shape()
        )));
    }
    if let Some((i, j, v)) = a.iter().find(|&(_, _, v)| v < 0.0 || v.is_nan()) {
        return Err(Error::Domain(format!(
            "sym_normalize needs non-negative entries, found {v} at ({i}, {j})"
        )));
    }
    let deg = a.row_sums();
    let mut out = a.clone();
    for i in 0..out.n_rows {
        let (s, e) = (out.row_ptr[i], out.row_ptr[i + 1]);
        for p in s..e {
            let dd = deg[i] * deg[out.col_idx[p]];
            out.values[p] = if dd > 0.0 { out.values[p] / dd.sqrt() } else { 0.0 };
        }
    }
    // A zero-degree column can still hold an entry when the input is asymmetric.
    Ok(out.filter(|_, _, v| v != 0.0))
}
