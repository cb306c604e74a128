use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;
use crate::sparse::dense::invert_small;
use crate::sparse::CsrMatrix;

/// Incomplete LU with zero fill. `L` (unit diagonal, implicit) and `U` share
/// the sparsity pattern of the source matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        check_len("ILU(0) (square)", a.n_rows(), a.n_cols())?;
        let n = a.n_rows();
        let offs = a.row_offsets().to_vec();
        let cols = a.col_indices().to_vec();
        let mut vals = a.values().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            if let Some(p) = (offs[i]..offs[i + 1]).find(|&p| cols[p] == i) {
                diag_pos[i] = p;
            }
        }
        // position of column j in the current row, or MAX
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            for p in offs[i]..offs[i + 1] {
                marker[cols[p]] = p;
            }
            for p in offs[i]..offs[i + 1] {
                let k = cols[p];
                if k >= i {
                    break;
                }
                let pivot = vals[diag_pos[k]];
                let lik = vals[p] / pivot;
                vals[p] = lik;
                for q in diag_pos[k] + 1..offs[k + 1] {
                    let m = marker[cols[q]];
                    if m != usize::MAX {
                        vals[m] -= lik * vals[q];
                    }
                }
            }
            for p in offs[i]..offs[i + 1] {
                marker[cols[p]] = usize::MAX;
            }
            if diag_pos[i] == usize::MAX || vals[diag_pos[i]] == 0.0 || !vals[diag_pos[i]].is_finite() {
                return Err(Error::ZeroPivot { row: i });
            }
        }
        let lu = CsrMatrix::from_raw_parts(n, n, offs, cols, vals)?;
        Ok(Self { lu, diag_pos })
    }

    /// Combined factors: strict lower part is `L`, the rest is `U`.
    pub fn factors(&self) -> &CsrMatrix {
        &self.lu
    }

    pub fn nnz(&self) -> usize {
        self.lu.nnz()
    }

    /// Solves `L U x = r`.
    pub fn solve_into(&self, r: &[f64], x: &mut [f64]) -> Result<()> {
        let n = self.lu.n_rows();
        check_len("ILU(0) rhs", n, r.len())?;
        check_len("ILU(0) output", n, x.len())?;
        let offs = self.lu.row_offsets();
        let cols = self.lu.col_indices();
        let vals = self.lu.values();
        for i in 0..n {
            let mut s = r[i];
            for p in offs[i]..self.diag_pos[i] {
                s -= vals[p] * x[cols[p]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.diag_pos[i] + 1..offs[i + 1] {
                s -= vals[p] * x[cols[p]];
            }
            x[i] = s / vals[self.diag_pos[i]];
        }
        Ok(())
    }
}

impl LinearOperator for Ilu0 {
    fn dim(&self) -> usize {
        self.lu.n_rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.solve_into(x, y)
    }
}

/// ILU(0) over dense `b x b` cell blocks treated as scalars.
#[derive(Debug, Clone)]
pub struct BlockIlu0 {
    b: usize,
    offs: Vec<usize>,
    cols: Vec<usize>,
    /// One dense row-major block per pattern entry.
    blocks: Vec<f64>,
    diag_pos: Vec<usize>,
    /// Inverses of the factored diagonal blocks.
    diag_inv: Vec<f64>,
}

fn block_mul(a: &[f64], b: &[f64], out: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| a[i * n + k] * b[k * n + j]).sum();
        }
    }
}

impl BlockIlu0 {
    pub fn factor(a: &CsrMatrix, block_size: usize) -> Result<Self> {
        check_len("block ILU(0) (square)", a.n_rows(), a.n_cols())?;
        let b = block_size;
        if b == 0 || a.n_rows() % b != 0 {
            return Err(Error::Layout(format!(
                "block ILU(0): size {} not divisible by cell size {b}",
                a.n_rows()
            )));
        }
        let nb = a.n_rows() / b;
        let bb = b * b;

        // block pattern
        let mut offs = vec![0usize; nb + 1];
        let mut cols = Vec::new();
        let mut seen = vec![usize::MAX; nb];
        for bi in 0..nb {
            let start = cols.len();
            for r in bi * b..(bi + 1) * b {
                for &c in a.row(r).0 {
                    let bc = c / b;
                    if seen[bc] != bi {
                        seen[bc] = bi;
                        cols.push(bc);
                    }
                }
            }
            if seen[bi] != bi {
                cols.push(bi);
            }
            cols[start..].sort_unstable();
            offs[bi + 1] = cols.len();
        }
        let mut blocks = vec![0.0; cols.len() * bb];
        let mut marker = vec![usize::MAX; nb];
        for bi in 0..nb {
            for p in offs[bi]..offs[bi + 1] {
                marker[cols[p]] = p;
            }
            for r in 0..b {
                let (rc, rv) = a.row(bi * b + r);
                for (&c, &v) in rc.iter().zip(rv) {
                    let p = marker[c / b];
                    blocks[p * bb + r * b + c % b] += v;
                }
            }
            for p in offs[bi]..offs[bi + 1] {
                marker[cols[p]] = usize::MAX;
            }
        }
        let diag_pos: Vec<usize> = (0..nb)
            .map(|bi| (offs[bi]..offs[bi + 1]).find(|&p| cols[p] == bi).expect("diagonal inserted"))
            .collect();

        let mut diag_inv = vec![0.0; nb * bb];
        let mut tmp = vec![0.0; bb];
        for bi in 0..nb {
            for p in offs[bi]..offs[bi + 1] {
                marker[cols[p]] = p;
            }
            for p in offs[bi]..offs[bi + 1] {
                let k = cols[p];
                if k >= bi {
                    break;
                }
                // L_ik = A_ik U_kk^{-1}
                block_mul(&blocks[p * bb..(p + 1) * bb], &diag_inv[k * bb..(k + 1) * bb], &mut tmp, b);
                blocks[p * bb..(p + 1) * bb].copy_from_slice(&tmp);
                for q in diag_pos[k] + 1..offs[k + 1] {
                    let m = marker[cols[q]];
                    if m != usize::MAX {
                        let mut prod = vec![0.0; bb];
                        block_mul(&blocks[p * bb..(p + 1) * bb], &blocks[q * bb..(q + 1) * bb], &mut prod, b);
                        for (x, y) in blocks[m * bb..(m + 1) * bb].iter_mut().zip(&prod) {
                            *x -= y;
                        }
                    }
                }
            }
            for p in offs[bi]..offs[bi + 1] {
                marker[cols[p]] = usize::MAX;
            }
            let d = diag_pos[bi];
            let inv = invert_small(&blocks[d * bb..(d + 1) * bb], b).ok_or(Error::SingularCellBlock {
                what: "block ILU(0) pivot",
                cell: bi,
                state: None,
            })?;
            diag_inv[bi * bb..(bi + 1) * bb].copy_from_slice(&inv);
        }
        Ok(Self {
            b,
            offs,
            cols,
            blocks,
            diag_pos,
            diag_inv,
        })
    }

    pub fn block_size(&self) -> usize {
        self.b
    }

    pub fn solve_into(&self, r: &[f64], x: &mut [f64]) -> Result<()> {
        let b = self.b;
        let bb = b * b;
        let nb = self.diag_pos.len();
        check_len("block ILU(0) rhs", nb * b, r.len())?;
        check_len("block ILU(0) output", nb * b, x.len())?;
        let mut s = vec![0.0; b];
        for bi in 0..nb {
            s.copy_from_slice(&r[bi * b..(bi + 1) * b]);
            for p in self.offs[bi]..self.diag_pos[bi] {
                let c = self.cols[p];
                let blk = &self.blocks[p * bb..(p + 1) * bb];
                for i in 0..b {
                    s[i] -= (0..b).map(|k| blk[i * b + k] * x[c * b + k]).sum::<f64>();
                }
            }
            x[bi * b..(bi + 1) * b].copy_from_slice(&s);
        }
        for bi in (0..nb).rev() {
            s.copy_from_slice(&x[bi * b..(bi + 1) * b]);
            for p in self.diag_pos[bi] + 1..self.offs[bi + 1] {
                let c = self.cols[p];
                let blk = &self.blocks[p * bb..(p + 1) * bb];
                for i in 0..b {
                    s[i] -= (0..b).map(|k| blk[i * b + k] * x[c * b + k]).sum::<f64>();
                }
            }
            let inv = &self.diag_inv[bi * bb..(bi + 1) * bb];
            for i in 0..b {
                x[bi * b + i] = (0..b).map(|k| inv[i * b + k] * s[k]).sum();
            }
        }
        Ok(())
    }
}

impl LinearOperator for BlockIlu0 {
    fn dim(&self) -> usize {
        self.diag_pos.len() * self.b
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.solve_into(x, y)
    }
}
