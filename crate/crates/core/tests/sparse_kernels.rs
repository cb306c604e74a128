mod common;

use proptest::prelude::*;

use common::{dense_of, norm};
use thmpc::sparse::mtx::{parse_matrix_market, to_matrix_market_string};
use thmpc::sparse::{extract_block, Permutation};
use thmpc::{generate, BlockLayout, ContactState, CsrMatrix, ProblemSpec};

fn triplets(n: usize, m: usize, max: usize) -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    prop::collection::vec((0..n, 0..m, -10.0f64..10.0), 0..max)
}

fn sparse(n: usize, m: usize) -> impl Strategy<Value = CsrMatrix> {
    triplets(n, m, 3 * n * m / 2).prop_map(move |t| CsrMatrix::from_triplets(&t, n, m).unwrap())
}

proptest! {
    #[test]
    fn duplicate_triplets_are_summed(t in triplets(7, 5, 60)) {
        let a = CsrMatrix::from_triplets(&t, 7, 5).unwrap();
        let mut dense = [[0.0f64; 5]; 7];
        for &(i, j, v) in &t {
            dense[i][j] += v;
        }
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                prop_assert!((a.get(i, j) - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
        let (offsets, cols) = (a.row_offsets(), a.col_indices());
        for i in 0..7 {
            prop_assert!(cols[offsets[i]..offsets[i + 1]].windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn product_is_associative_with_matvec(
        a in sparse(8, 6),
        b in sparse(6, 9),
        x in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let ab = a.matmul(&b).unwrap();
        let lhs = ab.spmv(&x).unwrap();
        let rhs = a.spmv(&b.spmv(&x).unwrap()).unwrap();
        let scale = 1.0 + norm(&rhs) + dense_of(&a).abs().sum() * dense_of(&b).abs().sum();
        let err: f64 = lhs.iter().zip(&rhs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-13 * scale);
        let oracle = dense_of(&a) * dense_of(&b);
        prop_assert!((dense_of(&ab) - oracle).abs().max() <= 1e-12 * scale);
    }

    #[test]
    fn serial_and_default_kernels_agree(a in sparse(12, 12), x in prop::collection::vec(-1.0f64..1.0, 12)) {
        let mut y1 = vec![0.0; 12];
        let mut y2 = vec![0.0; 12];
        a.spmv_serial_into(&x, &mut y1).unwrap();
        a.spmv_into(&x, &mut y2).unwrap();
        prop_assert_eq!(y1, y2);
        prop_assert_eq!(a.matmul(&a).unwrap(), a.matmul_serial(&a).unwrap());
    }

    #[test]
    fn transpose_is_an_involution(a in sparse(6, 9)) {
        prop_assert_eq!(a.transpose().transpose(), a.clone());
        prop_assert_eq!(dense_of(&a.transpose()), dense_of(&a).transpose());
    }

    #[test]
    fn matrix_market_round_trip_is_bitwise(a in sparse(9, 7)) {
        let text = to_matrix_market_string(&a);
        let back = parse_matrix_market(text.as_bytes()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn symmetric_permutation_matches_dense(a in sparse(8, 8), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut fwd: Vec<usize> = (0..8).collect();
        fwd.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let p = Permutation::from_forward(fwd).unwrap();
        let b = a.permute_symmetric(&p).unwrap();
        let x: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        // B (P x) = P (A x)
        let mut px = vec![0.0; 8];
        p.apply_into(&x, &mut px).unwrap();
        let mut pax = vec![0.0; 8];
        p.apply_into(&a.spmv(&x).unwrap(), &mut pax).unwrap();
        let bpx = b.spmv(&px).unwrap();
        for (u, v) in bpx.iter().zip(&pax) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }
}

#[test]
fn block_extraction_partitions_the_nonzeros() {
    for (dim, refine) in [(2, 6), (3, 3)] {
        for state in [ContactState::Stick, ContactState::Slide, ContactState::Open] {
            let p = generate(&ProblemSpec::uniform(dim, refine, state)).unwrap();
            let mut total = 0;
            for i in 1..=6 {
                for j in 1..=6 {
                    total += extract_block(&p.matrix, &p.layout, i, j).unwrap().nnz();
                }
            }
            assert_eq!(total, p.matrix.nnz());
        }
    }
}

#[test]
fn block_ids_outside_range_are_rejected() {
    let p = generate(&ProblemSpec::uniform(2, 4, ContactState::Open)).unwrap();
    assert!(extract_block(&p.matrix, &p.layout, 0, 1).is_err());
    assert!(extract_block(&p.matrix, &p.layout, 1, 7).is_err());
}

#[test]
fn one_by_one_matrix_market() {
    let a = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.5\n".as_bytes()).unwrap();
    assert_eq!((a.n_rows(), a.n_cols(), a.nnz()), (1, 1, 1));
    assert_eq!(a.get(0, 0), 2.5);
    let back = parse_matrix_market(to_matrix_market_string(&a).as_bytes()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn dense_array_banner_is_rejected() {
    let r = parse_matrix_market("%%MatrixMarket matrix array real general\n1 1\n2.5\n".as_bytes());
    assert!(r.is_err());
}

#[test]
fn truncated_entry_list_is_rejected() {
    let r = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n2 2 1.0\n".as_bytes());
    assert!(r.is_err());
}

#[test]
fn layout_json_round_trip() {
    let p = generate(&ProblemSpec::with_fractions(3, 4, 0.25, 0.5, 3).unwrap()).unwrap();
    let back = BlockLayout::from_json(&p.layout.to_json().unwrap()).unwrap();
    assert_eq!(back, p.layout);
}
