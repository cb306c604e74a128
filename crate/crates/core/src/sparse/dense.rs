use std::ops::{Index, IndexMut};

use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;

/// Row-major dense matrix used for small blocks, coarse grids and the exact oracle path.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_slice(n_rows: usize, n_cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        Self {
            n_rows,
            n_cols,
            data: data.to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn matmul(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, b.n_rows);
        let mut c = DenseMatrix::zeros(self.n_rows, b.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let brow = b.row(k);
                let crow = c.row_mut(i);
                for (cj, bj) in crow.iter_mut().zip(brow) {
                    *cj += a * bj;
                }
            }
        }
        c
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.n_cols, x.len());
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn sub(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.n_rows, self.n_cols), (b.n_rows, b.n_cols));
        DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().zip(&b.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> DenseMatrix {
        let mut b = DenseMatrix::zeros(rows.len(), cols.len());
        for (bi, i) in rows.enumerate() {
            b.row_mut(bi).copy_from_slice(&self.row(i)[cols.clone()]);
        }
        b
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced 1-norm (max column sum).
    pub fn norm_1(&self) -> f64 {
        (0..self.n_cols)
            .map(|j| (0..self.n_rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DenseMatrix,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        check_len("dense LU (square)", a.n_rows, a.n_cols)?;
        let n = a.n_rows;
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let tiny = f64::EPSILON * (n.max(1) as f64) * a.max_abs();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= tiny || pmax == 0.0 {
                return Err(Error::Singular { col: k });
            }
            if p != k {
                piv.swap(p, k);
                for j in 0..n {
                    lu.data.swap(p * n + j, k * n + j);
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / d;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= l * u;
                    }
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn dim(&self) -> usize {
        self.lu.n_rows
    }

    pub fn solve_into(&self, r: &[f64], x: &mut [f64]) -> Result<()> {
        let n = self.dim();
        check_len("dense solve rhs", n, r.len())?;
        check_len("dense solve output", n, x.len())?;
        for i in 0..n {
            x[i] = r[self.piv[i]];
        }
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(())
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.dim()];
        self.solve_into(r, &mut x)?;
        Ok(x)
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.solve_into(&e, &mut col).expect("sizes match");
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let n = self.dim();
        assert_eq!(b.n_rows, n);
        let mut out = DenseMatrix::zeros(n, b.n_cols);
        let mut rhs = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..b.n_cols {
            for i in 0..n {
                rhs[i] = b[(i, j)];
            }
            self.solve_into(&rhs, &mut col).expect("sizes match");
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

impl LinearOperator for DenseLu {
    fn dim(&self) -> usize {
        DenseLu::dim(self)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.solve_into(x, y)
    }
}

/// Direct solve of `A x = r` by partial-pivoting LU.
pub fn dense_solve(a: &DenseMatrix, r: &[f64]) -> Result<Vec<f64>> {
    DenseLu::factor(a)?.solve(r)
}

/// Inverse of a small dense block stored row-major, `n x n`.
pub(crate) fn invert_small(block: &[f64], n: usize) -> Option<Vec<f64>> {
    let a = DenseMatrix::from_row_slice(n, n, block);
    DenseLu::factor(&a).ok().map(|lu| lu.inverse().data)
}
