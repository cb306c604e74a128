#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thmpc::{Block, BlockLayout, CsrMatrix};

pub fn dense_of(a: &CsrMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.n_rows(), a.n_cols());
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            m[(i, c)] += v;
        }
    }
    m
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn block_view(m: &DMatrix<f64>, layout: &BlockLayout, bi: Block, bj: Block) -> DMatrix<f64> {
    let (r, c) = (layout.range(bi), layout.range(bj));
    m.view((r.start, c.start), (r.len(), c.len())).into_owned()
}

/// `Q_r` from dense inverses of the `dim x dim` cell blocks of `J22`.
pub fn oracle_qr(j: &DMatrix<f64>, layout: &BlockLayout) -> DMatrix<f64> {
    let dim = layout.dim();
    let r1 = layout.range(Block::Contact);
    let r2 = layout.range(Block::InterfaceDisplacement);
    let j22 = block_view(j, layout, Block::InterfaceDisplacement, Block::InterfaceDisplacement);
    let j21 = block_view(j, layout, Block::InterfaceDisplacement, Block::Contact);
    let mut d22_inv = DMatrix::zeros(r2.len(), r2.len());
    for c in 0..r2.len() / dim {
        let blk = j22.view((c * dim, c * dim), (dim, dim)).into_owned();
        let inv = blk.try_inverse().expect("singular interface cell block");
        d22_inv.view_mut((c * dim, c * dim), (dim, dim)).copy_from(&inv);
    }
    let mut qr = DMatrix::identity(j.nrows(), j.ncols());
    qr.view_mut((r2.start, r1.start), (r2.len(), r1.len())).copy_from(&(-(d22_inv * j21)));
    qr
}

/// Schur complement of the leading `k x k` block.
pub fn schur_of_leading(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let a11 = a.view((0, 0), (k, k)).into_owned();
    let a12 = a.view((0, k), (k, n - k)).into_owned();
    let a21 = a.view((k, 0), (n - k, k)).into_owned();
    let a22 = a.view((k, k), (n - k, n - k)).into_owned();
    a22 - a21 * a11.try_inverse().expect("singular leading block") * a12
}

pub fn to_csr(m: &DMatrix<f64>) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                t.push((i, j, m[(i, j)]));
            }
        }
    }
    CsrMatrix::from_triplets(&t, m.nrows(), m.ncols()).unwrap()
}

/// 5-point Laplacian on an `m x m` grid with Dirichlet boundary.
pub fn laplacian_2d(m: usize) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let r = i * m + j;
            t.push((r, r, 4.0));
            if i > 0 {
                t.push((r, r - m, -1.0));
            }
            if i + 1 < m {
                t.push((r, r + m, -1.0));
            }
            if j > 0 {
                t.push((r, r - 1, -1.0));
            }
            if j + 1 < m {
                t.push((r, r + 1, -1.0));
            }
        }
    }
    CsrMatrix::from_triplets(&t, m * m, m * m).unwrap()
}
