//! Right transformation that regularizes the contact block, and the exact
//! first-level Schur complement that eliminates it.
//!
//! `Q_r` is the identity except for block (2,1) = `-D22^{-1} J21`, where `D22`
//! is the point-block diagonal of the interface displacement block. After
//! `J~ = J Q_r` every cell block of `J~11 = J11 - J12 D22^{-1} J21` is
//! invertible, so the contact unknowns can be eliminated exactly.

use std::ops::Range;

use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;
use crate::problem::ContactState;
use crate::sparse::dense::{invert_small, DenseMatrix};
use crate::sparse::{block, Block, BlockLayout, CsrMatrix};

/// Dense inverses of the diagonal `b x b` cell blocks of a point-block matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagInverse {
    block_size: usize,
    blocks: Vec<f64>,
}

impl BlockDiagInverse {
    /// Inverts every diagonal cell block of square `a`. `states`, when given,
    /// tags the error for a singular block.
    pub fn from_diagonal_blocks(
        a: &CsrMatrix,
        block_size: usize,
        what: &'static str,
        states: Option<&[ContactState]>,
    ) -> Result<Self> {
        check_len("point-block matrix (square)", a.n_rows(), a.n_cols())?;
        if a.n_rows() % block_size != 0 {
            return Err(Error::Layout(format!(
                "{what}: size {} not divisible by cell size {block_size}",
                a.n_rows()
            )));
        }
        let cells = a.n_rows() / block_size;
        let b = block_size;
        let invert = |cell: usize| -> Result<Vec<f64>> {
            let mut dense = vec![0.0; b * b];
            for r in 0..b {
                let (cols, vals) = a.row(cell * b + r);
                for (&c, &v) in cols.iter().zip(vals) {
                    if c / b == cell {
                        dense[r * b + c % b] = v;
                    }
                }
            }
            invert_small(&dense, b).ok_or(Error::SingularCellBlock {
                what,
                cell,
                state: states.and_then(|s| s.get(cell).copied()),
            })
        };
        #[cfg(feature = "parallel")]
        let inverses: Vec<Result<Vec<f64>>> = {
            use rayon::prelude::*;
            (0..cells).into_par_iter().map(invert).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let inverses: Vec<Result<Vec<f64>>> = (0..cells).map(invert).collect();

        let mut blocks = Vec::with_capacity(cells * b * b);
        for inv in inverses {
            blocks.extend(inv?);
        }
        Ok(Self { block_size, blocks })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn n_cells(&self) -> usize {
        self.blocks.len() / (self.block_size * self.block_size).max(1)
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let bb = self.block_size * self.block_size;
        &self.blocks[c * bb..(c + 1) * bb]
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let b = self.block_size;
        let n = self.n_cells() * b;
        let rows = (0..n)
            .map(|i| {
                let c = i / b;
                let r = i % b;
                let blk = self.cell(c);
                ((c * b..(c + 1) * b).collect(), blk[r * b..(r + 1) * b].to_vec())
            })
            .collect();
        CsrMatrix::from_sorted_rows(n, n, rows)
    }
}

impl LinearOperator for BlockDiagInverse {
    fn dim(&self) -> usize {
        self.n_cells() * self.block_size
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len("block-diagonal inverse", self.dim(), x.len())?;
        let b = self.block_size;
        for c in 0..self.n_cells() {
            let blk = self.cell(c);
            for r in 0..b {
                y[c * b + r] = (0..b).map(|k| blk[r * b + k] * x[c * b + k]).sum();
            }
        }
        Ok(())
    }
}

/// Largest 1-norm condition number over the diagonal cell blocks of `a`.
pub fn max_cell_condition(a: &CsrMatrix, inv: &BlockDiagInverse) -> f64 {
    let b = inv.block_size();
    (0..inv.n_cells())
        .map(|c| {
            let mut blk = DenseMatrix::zeros(b, b);
            for r in 0..b {
                for k in 0..b {
                    blk[(r, k)] = a.get(c * b + r, c * b + k);
                }
            }
            let binv = DenseMatrix::from_row_slice(b, b, inv.cell(c));
            blk.norm_1() * binv.norm_1()
        })
        .fold(0.0, f64::max)
}

/// A square operator on a trailing run of blocks (for example blocks 2-6 of S^1).
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    layout: BlockLayout,
    first: Block,
}

impl ReducedSystem {
    pub(crate) fn new(matrix: CsrMatrix, layout: BlockLayout, first: Block) -> Self {
        Self { matrix, layout, first }
    }

    pub fn first_block(&self) -> Block {
        self.first
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    /// Local index range of block `b` (must not precede the first block).
    pub fn range(&self, b: Block) -> Range<usize> {
        assert!(b.id() >= self.first.id(), "block {b} eliminated from this system");
        let off = self.layout.range(self.first).start;
        let r = self.layout.range(b);
        r.start - off..r.end - off
    }

    pub fn span(&self, first: Block, last: Block) -> Range<usize> {
        self.range(first).start..self.range(last).end
    }

    pub fn block(&self, bi: Block, bj: Block) -> CsrMatrix {
        self.matrix.submatrix(self.range(bi), self.range(bj))
    }
}

/// Output of the preprocessing stage.
#[derive(Debug, Clone)]
pub struct TransformedSystem {
    pub j_tilde: CsrMatrix,
    pub qr: CsrMatrix,
    pub layout: BlockLayout,
    /// `(I - J22 D22^{-1}) J21`, block (2,1) of `J~`.
    pub e21: CsrMatrix,
    pub j11_tilde_inv: BlockDiagInverse,
    /// Largest 1-norm condition number of a `J~11` cell block.
    pub contact_condition: f64,
}

/// `Q_r`: identity with block (2,1) replaced by `-D22^{-1} J21`.
pub fn build_qr(j: &CsrMatrix, layout: &BlockLayout) -> Result<CsrMatrix> {
    check_len("Jacobian rows", layout.n(), j.n_rows())?;
    check_len("Jacobian cols", layout.n(), j.n_cols())?;
    let j22 = block(j, layout, Block::InterfaceDisplacement, Block::InterfaceDisplacement);
    let j21 = block(j, layout, Block::InterfaceDisplacement, Block::Contact);
    let d22_inv = BlockDiagInverse::from_diagonal_blocks(&j22, layout.dim(), "interface displacement (D22)", None)?;
    let x = d22_inv.to_csr().matmul(&j21)?.scaled(-1.0);
    let n = layout.n();
    let id = CsrMatrix::identity(n);
    let r2 = layout.range(Block::InterfaceDisplacement).start;
    let c1 = layout.range(Block::Contact).start;
    CsrMatrix::assemble(n, n, &[(0, 0, &id), (r2, c1, &x)])
}

/// Forms `J~ = J Q_r` explicitly and inverts the regularized contact block.
pub fn apply_transform(j: &CsrMatrix, layout: &BlockLayout) -> Result<TransformedSystem> {
    let qr = build_qr(j, layout)?;
    let j_tilde = j.matmul(&qr)?;
    let e21 = block(&j_tilde, layout, Block::InterfaceDisplacement, Block::Contact);
    let j11_tilde = block(&j_tilde, layout, Block::Contact, Block::Contact);
    let j11_tilde_inv = invert_contact_block(&j11_tilde, layout)?;
    let contact_condition = max_cell_condition(&j11_tilde, &j11_tilde_inv);
    Ok(TransformedSystem {
        j_tilde,
        qr,
        layout: layout.clone(),
        e21,
        j11_tilde_inv,
        contact_condition,
    })
}

/// Exact per-cell inverses of `J~11`.
pub fn invert_contact_block(j11_tilde: &CsrMatrix, layout: &BlockLayout) -> Result<BlockDiagInverse> {
    BlockDiagInverse::from_diagonal_blocks(j11_tilde, layout.dim(), "contact (J~11)", Some(layout.states()))
}

/// Exact first-level Schur complement of `J~` with respect to block 1, on blocks 2-6.
pub fn form_s1(ts: &TransformedSystem) -> Result<ReducedSystem> {
    let l = &ts.layout;
    let rest = l.span(Block::InterfaceDisplacement, Block::Temperature);
    let trailing = ts.j_tilde.submatrix(rest.clone(), rest.clone());
    let col1 = ts.j_tilde.submatrix(rest.clone(), l.range(Block::Contact));
    let j12 = block(&ts.j_tilde, l, Block::Contact, Block::InterfaceDisplacement);
    let correction = col1.matmul(&ts.j11_tilde_inv.to_csr())?.matmul(&j12)?;
    let m = rest.len();
    let placed = CsrMatrix::assemble(m, m, &[(0, 0, &correction)])?;
    let s1 = trailing.sub(&placed)?;
    Ok(ReducedSystem::new(s1, l.clone(), Block::InterfaceDisplacement))
}

/// `x = Q_r x~`.
pub fn recover_solution(ts: &TransformedSystem, x_tilde: &[f64]) -> Result<Vec<f64>> {
    ts.qr.spmv(x_tilde)
}
