//! Complex sparse operators in compressed-row form.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::SpinMode;
use crate::error::{Error, Result};

/// Identifies the basis an operator or state is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisTag {
    pub n_sites: usize,
    pub c0: usize,
    pub spin_mode: SpinMode,
    /// Phonon Fock cutoff per site when embedded, `None` for bare excitons.
    pub d_ph: Option<usize>,
}

impl BasisTag {
    pub fn sector(n_sites: usize, c0: usize, spin_mode: SpinMode) -> Self {
        BasisTag {
            n_sites,
            c0,
            spin_mode,
            d_ph: None,
        }
    }

    pub fn embedded(self, d_ph: usize) -> Self {
        BasisTag {
            d_ph: Some(d_ph),
            ..self
        }
    }

    pub fn exciton(self) -> Self {
        BasisTag { d_ph: None, ..self }
    }
}

impl fmt::Display for BasisTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} C0={} {:?}", self.n_sites, self.c0, self.spin_mode)?;
        if let Some(d) = self.d_ph {
            write!(f, " d_ph={d}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_tag(expected: BasisTag, found: BasisTag) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::BasisMismatch { expected, found })
    }
}

/// Accumulates `(row, col, value)` triplets; duplicates are summed.
#[derive(Debug, Clone)]
pub struct OperatorBuilder {
    dim: usize,
    tag: BasisTag,
    entries: Vec<(usize, usize, C64)>,
}

impl OperatorBuilder {
    pub fn new(dim: usize, tag: BasisTag) -> Self {
        OperatorBuilder {
            dim,
            tag,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: impl Into<C64>) {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries.push((row, col, value.into()));
    }

    pub fn build(mut self) -> SparseOperator {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        // drop exact cancellations
        let mut k = 0;
        let mut out_rows = Vec::with_capacity(rows.len());
        let mut out_cols = Vec::with_capacity(cols.len());
        let mut out_vals = Vec::with_capacity(vals.len());
        while k < rows.len() {
            if vals[k] != C64::new(0.0, 0.0) {
                out_rows.push(rows[k]);
                out_cols.push(cols[k]);
                out_vals.push(vals[k]);
            }
            k += 1;
        }
        for &r in &out_rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..self.dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator {
            dim: self.dim,
            tag: self.tag,
            row_ptr,
            cols: out_cols,
            vals: out_vals,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    tag: BasisTag,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    pub fn zeros(dim: usize, tag: BasisTag) -> Self {
        OperatorBuilder::new(dim, tag).build()
    }

    pub fn identity(dim: usize, tag: BasisTag) -> Self {
        Self::from_diagonal(tag, &vec![1.0; dim])
    }

    pub fn from_diagonal(tag: BasisTag, diag: &[f64]) -> Self {
        let mut b = OperatorBuilder::new(diag.len(), tag);
        for (k, &d) in diag.iter().enumerate() {
            b.push(k, k, d);
        }
        b.build()
    }

    pub fn from_dense(tag: BasisTag, m: &DMatrix<C64>) -> Self {
        let mut b = OperatorBuilder::new(m.nrows(), tag);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != C64::new(0.0, 0.0) {
                    b.push(r, c, m[(r, c)]);
                }
            }
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// `y = A x`
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        y
    }

    /// `<x| A |x>` without normalization.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (r, xr) in x.iter().enumerate() {
            let mut row = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[k] * x[self.cols[k]];
            }
            acc += xr.conj() * row;
        }
        acc
    }

    /// Product `A M` with `M` a dense row-major `dim x ncols` block.
    pub fn mul_dense(&self, m: &[C64], ncols: usize, out: &mut [C64]) {
        debug_assert_eq!(m.len(), self.dim * ncols);
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for r in 0..self.dim {
            let dst = &mut out[r * ncols..(r + 1) * ncols];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[k];
                let src = &m[self.cols[k] * ncols..(self.cols[k] + 1) * ncols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|k| self.get(k, k)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.iter().all(|(r, c, _)| r == c)
    }

    pub fn adjoint(&self) -> Self {
        let mut b = OperatorBuilder::new(self.dim, self.tag);
        for (r, c, v) in self.iter() {
            b.push(c, r, v.conj());
        }
        b.build()
    }

    pub fn scaled(&self, factor: impl Into<C64>) -> Self {
        let f = factor.into();
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= f);
        out
    }

    pub fn add(&self, other: &SparseOperator) -> Result<Self> {
        self.lin_comb(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &SparseOperator) -> Result<Self> {
        self.lin_comb(C64::new(-1.0, 0.0), other)
    }

    fn lin_comb(&self, factor: C64, other: &SparseOperator) -> Result<Self> {
        check_tag(self.tag, other.tag)?;
        let mut b = OperatorBuilder::new(self.dim, self.tag);
        for (r, c, v) in self.iter() {
            b.push(r, c, v);
        }
        for (r, c, v) in other.iter() {
            b.push(r, c, factor * v);
        }
        Ok(b.build())
    }

    /// Sum of operators sharing one basis.
    pub fn sum<'a>(ops: impl IntoIterator<Item = &'a SparseOperator>) -> Result<Self> {
        let mut iter = ops.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty operator sum".into()))?;
        let mut b = OperatorBuilder::new(first.dim, first.tag);
        for (r, c, v) in first.iter() {
            b.push(r, c, v);
        }
        for op in iter {
            check_tag(first.tag, op.tag)?;
            for (r, c, v) in op.iter() {
                b.push(r, c, v);
            }
        }
        Ok(b.build())
    }

    pub fn matmul(&self, other: &SparseOperator) -> Result<Self> {
        check_tag(self.tag, other.tag)?;
        let mut b = OperatorBuilder::new(self.dim, self.tag);
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, bv) in other.row(k) {
                    b.push(r, c, a * bv);
                }
            }
        }
        Ok(b.build())
    }

    /// `[A, B] = AB - BA`
    pub fn commutator(&self, other: &SparseOperator) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Maximal absolute row sum, an upper bound on the spectral norm of Hermitian operators.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A^dagger|` entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn restrict_dense(&self, indices: &[usize]) -> DMatrix<C64> {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in indices.iter().enumerate() {
            pos[i] = k;
        }
        let mut m = DMatrix::zeros(indices.len(), indices.len());
        for (k, &r) in indices.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    m[(k, pos[c])] += v;
                }
            }
        }
        m
    }
}
