//! CSR kernels, the six-block row partition, dense helpers and MatrixMarket I/O.

pub mod csr;
pub mod dense;
pub mod layout;
pub mod mtx;
pub mod permutation;

pub use csr::CsrMatrix;
pub use dense::{dense_solve, DenseLu, DenseMatrix};
pub use layout::{block, extract_block, Block, BlockLayout, CellKind};
pub use mtx::{read_matrix_market, write_matrix_market};
pub use permutation::Permutation;
