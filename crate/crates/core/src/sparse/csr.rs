use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use super::permutation::Permutation;
use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
///
/// Matrices are immutable once built; every constructor produces the
/// canonical form so kernels can rely on ordered rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a canonical matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(entries: &[(usize, usize, f64)], n_rows: usize, n_cols: usize) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for (k, &(r, c, _)) in entries.iter().enumerate() {
            if r >= n_rows || c >= n_cols {
                return Err(Error::IndexOutOfRange {
                    entry: k,
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, stable in input order
        let mut next = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for &(r, c, v) in entries {
            let p = next[r];
            cols[p] = c;
            vals[p] = v;
            next[r] += 1;
        }

        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut order: Vec<usize> = Vec::new();
        for r in 0..n_rows {
            let (lo, hi) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&p| cols[p]);
            for &p in &order {
                match col_indices.last() {
                    Some(&last) if col_indices.len() > row_offsets[r] && last == cols[p] => {
                        *values.last_mut().unwrap() += vals[p];
                    }
                    _ => {
                        col_indices.push(cols[p]);
                        values.push(vals[p]);
                    }
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn from_raw_parts(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_len("row_offsets", n_rows + 1, row_offsets.len())?;
        check_len("values", col_indices.len(), values.len())?;
        if row_offsets[0] != 0 || row_offsets[n_rows] != col_indices.len() {
            return Err(Error::InvalidConfig("row_offsets must start at 0 and end at nnz".into()));
        }
        for r in 0..n_rows {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::InvalidConfig(format!("row_offsets decrease at row {r}")));
            }
            let row = &col_indices[lo..hi];
            for (k, &c) in row.iter().enumerate() {
                if c >= n_cols || (k > 0 && row[k - 1] >= c) {
                    return Err(Error::InvalidConfig(format!(
                        "row {r}: column indices must be strictly increasing and < {n_cols}"
                    )));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    // Trusted constructor for kernels that already emit canonical rows.
    pub(crate) fn from_sorted_rows(n_rows: usize, n_cols: usize, rows: Vec<(Vec<usize>, Vec<f64>)>) -> Self {
        let nnz = rows.iter().map(|r| r.0.len()).sum();
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for (c, v) in rows {
            col_indices.extend(c);
            values.extend(v);
            row_offsets.push(col_indices.len());
        }
        debug_assert_eq!(row_offsets.len(), n_rows + 1);
        Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Keeps every entry of a dense matrix whose magnitude exceeds `drop_tol`.
    pub fn from_dense(a: &DenseMatrix, drop_tol: f64) -> Self {
        let rows = (0..a.n_rows())
            .map(|i| {
                let mut c = Vec::new();
                let mut v = Vec::new();
                for (j, &x) in a.row(i).iter().enumerate() {
                    if x.abs() > drop_tol {
                        c.push(j);
                        v.push(x);
                    }
                }
                (c, v)
            })
            .collect();
        Self::from_sorted_rows(a.n_rows(), a.n_cols(), rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        let mut s = 0.0;
        for (c, v) in cols.iter().zip(vals) {
            s += v * x[*c];
        }
        s
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x`, row-parallel when the `parallel` feature is on. Each row is
    /// summed left to right regardless of threading, so results are bitwise
    /// reproducible.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len("spmv input", self.n_cols, x.len())?;
        check_len("spmv output", self.n_rows, y.len())?;
        #[cfg(feature = "parallel")]
        {
            if self.nnz() >= PAR_NNZ_THRESHOLD {
                self.spmv_parallel_unchecked(x, y);
                return Ok(());
            }
        }
        self.spmv_serial_unchecked(x, y);
        Ok(())
    }

    /// Single-threaded `y = A x`.
    pub fn spmv_serial_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len("spmv input", self.n_cols, x.len())?;
        check_len("spmv output", self.n_rows, y.len())?;
        self.spmv_serial_unchecked(x, y);
        Ok(())
    }

    /// Row-parallel `y = A x` regardless of matrix size.
    #[cfg(feature = "parallel")]
    pub fn spmv_parallel_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len("spmv input", self.n_cols, x.len())?;
        check_len("spmv output", self.n_rows, y.len())?;
        self.spmv_parallel_unchecked(x, y);
        Ok(())
    }

    fn spmv_serial_unchecked(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }

    #[cfg(feature = "parallel")]
    fn spmv_parallel_unchecked(&self, x: &[f64], y: &mut [f64]) {
        use rayon::prelude::*;
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * ROW_CHUNK;
            for (k, yi) in ys.iter_mut().enumerate() {
                *yi = self.row_dot(base + k, x);
            }
        });
    }

    /// `y -= A x`
    pub fn sub_spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len("spmv input", self.n_cols, x.len())?;
        check_len("spmv output", self.n_rows, y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi -= self.row_dot(i, x);
        }
        Ok(())
    }

    fn product_row(&self, b: &CsrMatrix, i: usize, acc: &mut [f64], mark: &mut [usize], stamp: usize) -> (Vec<usize>, Vec<f64>) {
        let mut cols = Vec::new();
        let (ac, av) = self.row(i);
        for (&k, &a) in ac.iter().zip(av) {
            let (bc, bv) = b.row(k);
            for (&j, &bval) in bc.iter().zip(bv) {
                if mark[j] != stamp {
                    mark[j] = stamp;
                    acc[j] = 0.0;
                    cols.push(j);
                }
                acc[j] += a * bval;
            }
        }
        cols.sort_unstable();
        let vals = cols.iter().map(|&j| acc[j]).collect();
        (cols, vals)
    }

    /// Sparse product `A B`. Structural zeros from cancellation are kept.
    pub fn matmul(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        check_len("matmul inner dimension", self.n_cols, b.n_rows)?;
        #[cfg(feature = "parallel")]
        if self.nnz() + b.nnz() >= PAR_NNZ_THRESHOLD {
            return Ok(self.matmul_parallel_unchecked(b));
        }
        Ok(self.matmul_serial_unchecked(b))
    }

    pub fn matmul_serial(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        check_len("matmul inner dimension", self.n_cols, b.n_rows)?;
        Ok(self.matmul_serial_unchecked(b))
    }

    fn matmul_serial_unchecked(&self, b: &CsrMatrix) -> CsrMatrix {
        let mut acc = vec![0.0; b.n_cols];
        let mut mark = vec![usize::MAX; b.n_cols];
        let rows = (0..self.n_rows)
            .map(|i| self.product_row(b, i, &mut acc, &mut mark, i))
            .collect();
        CsrMatrix::from_sorted_rows(self.n_rows, b.n_cols, rows)
    }

    #[cfg(feature = "parallel")]
    fn matmul_parallel_unchecked(&self, b: &CsrMatrix) -> CsrMatrix {
        use rayon::prelude::*;
        let chunks: Vec<Vec<(Vec<usize>, Vec<f64>)>> = (0..self.n_rows.div_ceil(ROW_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut acc = vec![0.0; b.n_cols];
                let mut mark = vec![usize::MAX; b.n_cols];
                let lo = chunk * ROW_CHUNK;
                let hi = (lo + ROW_CHUNK).min(self.n_rows);
                (lo..hi).map(|i| self.product_row(b, i, &mut acc, &mut mark, i)).collect()
            })
            .collect();
        CsrMatrix::from_sorted_rows(self.n_rows, b.n_cols, chunks.into_iter().flatten().collect())
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let p = next[c];
                col_indices[p] = i;
                values[p] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// `alpha A + beta B` over the union pattern.
    pub fn add_scaled(&self, alpha: f64, b: &CsrMatrix, beta: f64) -> Result<CsrMatrix> {
        check_len("add rows", self.n_rows, b.n_rows)?;
        check_len("add cols", self.n_cols, b.n_cols)?;
        let rows = (0..self.n_rows)
            .map(|i| {
                let (ac, av) = self.row(i);
                let (bc, bv) = b.row(i);
                let mut cols = Vec::with_capacity(ac.len() + bc.len());
                let mut vals = Vec::with_capacity(ac.len() + bc.len());
                let (mut p, mut q) = (0, 0);
                while p < ac.len() || q < bc.len() {
                    let take_a = q >= bc.len() || (p < ac.len() && ac[p] <= bc[q]);
                    let take_b = p >= ac.len() || (q < bc.len() && bc[q] <= ac[p]);
                    if take_a && take_b {
                        cols.push(ac[p]);
                        vals.push(alpha * av[p] + beta * bv[q]);
                        p += 1;
                        q += 1;
                    } else if take_a {
                        cols.push(ac[p]);
                        vals.push(alpha * av[p]);
                        p += 1;
                    } else {
                        cols.push(bc[q]);
                        vals.push(beta * bv[q]);
                        q += 1;
                    }
                }
                (cols, vals)
            })
            .collect();
        Ok(CsrMatrix::from_sorted_rows(self.n_rows, self.n_cols, rows))
    }

    pub fn add(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        self.add_scaled(1.0, b, 1.0)
    }

    pub fn sub(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        self.add_scaled(1.0, b, -1.0)
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Multiplies row `i` by `d[i]`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<CsrMatrix> {
        check_len("row scaling", self.n_rows, d.len())?;
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for p in out.row_offsets[i]..out.row_offsets[i + 1] {
                out.values[p] *= d[i];
            }
        }
        Ok(out)
    }

    /// Adds `d` onto the main diagonal, inserting entries where missing.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<CsrMatrix> {
        check_len("diagonal shift", self.n_rows, d.len())?;
        self.add(&CsrMatrix::from_diagonal(d).resized(self.n_rows, self.n_cols))
    }

    fn resized(mut self, n_rows: usize, n_cols: usize) -> CsrMatrix {
        debug_assert!(self.col_indices.iter().all(|&c| c < n_cols));
        self.row_offsets.resize(n_rows + 1, self.nnz());
        self.n_rows = n_rows;
        self.n_cols = n_cols;
        self
    }

    /// Submatrix on half-open row and column ranges, re-indexed locally.
    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> CsrMatrix {
        assert!(rows.end <= self.n_rows && cols.end <= self.n_cols);
        let out = rows
            .clone()
            .map(|i| {
                let (c, v) = self.row(i);
                let lo = c.partition_point(|&x| x < cols.start);
                let hi = c.partition_point(|&x| x < cols.end);
                (c[lo..hi].iter().map(|&x| x - cols.start).collect(), v[lo..hi].to_vec())
            })
            .collect();
        CsrMatrix::from_sorted_rows(rows.len(), cols.len(), out)
    }

    /// Submatrix on arbitrary sorted index sets.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n_cols];
        for (k, &c) in cols.iter().enumerate() {
            map[c] = k;
        }
        let out = rows
            .iter()
            .map(|&i| {
                let (c, v) = self.row(i);
                let mut oc = Vec::new();
                let mut ov = Vec::new();
                for (&j, &x) in c.iter().zip(v) {
                    if map[j] != usize::MAX {
                        oc.push(map[j]);
                        ov.push(x);
                    }
                }
                (oc, ov)
            })
            .collect();
        CsrMatrix::from_sorted_rows(rows.len(), cols.len(), out)
    }

    /// Assembles a matrix from placed blocks `(row offset, col offset, block)`.
    /// Overlapping blocks are summed.
    pub fn assemble(n_rows: usize, n_cols: usize, blocks: &[(usize, usize, &CsrMatrix)]) -> Result<CsrMatrix> {
        let mut trip = Vec::with_capacity(blocks.iter().map(|b| b.2.nnz()).sum());
        for &(r0, c0, b) in blocks {
            if r0 + b.n_rows > n_rows || c0 + b.n_cols > n_cols {
                return Err(Error::Layout(format!(
                    "block of shape {}x{} at ({r0}, {c0}) exceeds {n_rows}x{n_cols}",
                    b.n_rows, b.n_cols
                )));
            }
            for i in 0..b.n_rows {
                let (c, v) = b.row(i);
                trip.extend(c.iter().zip(v).map(|(&j, &x)| (r0 + i, c0 + j, x)));
            }
        }
        CsrMatrix::from_triplets(&trip, n_rows, n_cols)
    }

    /// `B[p(i), p(j)] = A[i, j]`.
    pub fn permute_symmetric(&self, perm: &Permutation) -> Result<CsrMatrix> {
        check_len("permutation", self.n_rows, perm.len())?;
        check_len("permutation", self.n_cols, perm.len())?;
        let fwd = perm.forward();
        let inv = perm.inverse();
        let rows = (0..self.n_rows)
            .map(|new_i| {
                let (c, v) = self.row(inv[new_i]);
                let mut pairs: Vec<(usize, f64)> = c.iter().zip(v).map(|(&j, &x)| (fwd[j], x)).collect();
                pairs.sort_unstable_by_key(|p| p.0);
                pairs.into_iter().unzip()
            })
            .collect();
        Ok(CsrMatrix::from_sorted_rows(self.n_rows, self.n_cols, rows))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                d[(i, j)] += x;
            }
        }
        d
    }

    pub fn is_pattern_symmetric(&self) -> bool {
        self.is_square() && {
            let t = self.transpose();
            t.row_offsets == self.row_offsets && t.col_indices == self.col_indices
        }
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.spmv_into(x, y)
    }
}

#[cfg(feature = "parallel")]
const PAR_NNZ_THRESHOLD: usize = 20_000;
#[cfg(feature = "parallel")]
const ROW_CHUNK: usize = 512;
