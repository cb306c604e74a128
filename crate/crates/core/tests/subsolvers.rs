mod common;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

use common::{dense_of, diff_norm, laplacian_2d, norm, random_vec};
use thmpc::sparse::{dense_solve, DenseMatrix};
use thmpc::subsolvers::{sor_sweep, AmgConfig, AmgHierarchy, BlockIlu0, Ilu0};
use thmpc::{generate, AssembledPreconditioner, CsrMatrix, LinearOperator, PreconditionerConfig, ProblemSpec, PtVariant};

/// Random sparse matrix with a dominant diagonal.
fn dominant(n: usize) -> impl Strategy<Value = CsrMatrix> {
    prop::collection::vec((0..n, 0..n, -1.0f64..1.0), n..4 * n).prop_map(move |mut t| {
        let mut rowsum = vec![0.0; n];
        for &(i, _, v) in &t {
            rowsum[i] += f64::abs(v);
        }
        for (i, s) in rowsum.into_iter().enumerate() {
            t.push((i, i, 1.0 + 2.0 * s));
        }
        CsrMatrix::from_triplets(&t, n, n).unwrap()
    })
}

fn check_linear(op: &dyn LinearOperator, u: &[f64], v: &[f64], alpha: f64, beta: f64) -> Result<(), TestCaseError> {
    let w: Vec<f64> = u.iter().zip(v).map(|(a, b)| alpha * a + beta * b).collect();
    let (ou, ov, ow) = (op.apply(u).unwrap(), op.apply(v).unwrap(), op.apply(&w).unwrap());
    let comb: Vec<f64> = ou.iter().zip(&ov).map(|(a, b)| alpha * a + beta * b).collect();
    let scale = 1.0 + alpha.abs() * norm(&ou) + beta.abs() * norm(&ov);
    prop_assert!(diff_norm(&ow, &comb) <= 1e-12 * scale);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ilu_keeps_the_pattern(a in dominant(15)) {
        let f = Ilu0::factor(&a).unwrap();
        prop_assert_eq!(f.nnz(), a.nnz());
        prop_assert_eq!(f.factors().col_indices(), a.col_indices());
    }

    #[test]
    fn ilu_is_linear(a in dominant(15), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in any::<u64>()) {
        let f = Ilu0::factor(&a).unwrap();
        check_linear(&f, &random_vec(15, seed), &random_vec(15, seed ^ 1), alpha, beta)?;
    }

    #[test]
    fn block_ilu_is_linear(a in dominant(16), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in any::<u64>()) {
        let f = BlockIlu0::factor(&a, 2).unwrap();
        check_linear(&f, &random_vec(16, seed), &random_vec(16, seed ^ 1), alpha, beta)?;
    }

    #[test]
    fn vcycle_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in any::<u64>()) {
        let a = laplacian_2d(20);
        let h = AmgHierarchy::setup(&a, &AmgConfig { strong_threshold: 0.25, ..AmgConfig::default() }).unwrap();
        check_linear(&h, &random_vec(400, seed), &random_vec(400, seed ^ 1), alpha, beta)?;
    }

    #[test]
    fn ilu_is_exact_on_tridiagonal(d in prop::collection::vec(3.0f64..5.0, 30), seed in any::<u64>()) {
        let n = d.len();
        let mut t = Vec::new();
        for (i, &di) in d.iter().enumerate() {
            t.push((i, i, di));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(&t, n, n).unwrap();
        let b = random_vec(n, seed);
        let x = Ilu0::factor(&a).unwrap().apply(&b).unwrap();
        let r: Vec<f64> = a.spmv(&x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect();
        prop_assert!(norm(&r) <= 1e-13 * norm(&b));
    }
}

#[test]
fn hilbert_solve_matches_rational_elimination() {
    let n = 4;
    let h = |i: usize, j: usize| BigRational::new(1.into(), ((i + j + 1) as i64).into());
    let b: Vec<BigRational> = (0..n).map(|i| BigRational::from_integer(((i + 1) as i64).into())).collect();
    let mut m: Vec<Vec<BigRational>> = (0..n).map(|i| (0..n).map(|j| h(i, j)).chain([b[i].clone()]).collect()).collect();
    for k in 0..n {
        for i in k + 1..n {
            let f = &m[i][k] / &m[k][k];
            for j in k..=n {
                let sub = &f * &m[k][j];
                m[i][j] -= sub;
            }
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut s = m[i][n].clone();
        for j in i + 1..n {
            s -= &m[i][j] * &x[j];
        }
        x[i] = s / &m[i][i];
    }
    let exact: Vec<f64> = x.iter().map(|v| v.to_f64().unwrap()).collect();

    let data: Vec<f64> = (0..n * n).map(|k| 1.0 / ((k / n + k % n + 1) as f64)).collect();
    let a = DenseMatrix::from_row_slice(n, n, &data);
    let bf: Vec<f64> = (1..=n).map(|v| v as f64).collect();
    let got = dense_solve(&a, &bf).unwrap();
    assert!(diff_norm(&got, &exact) <= 1e-9 * norm(&exact), "{got:?} vs {exact:?}");
}

#[test]
fn singular_dense_matrix_is_reported() {
    let a = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
    assert!(dense_solve(&a, &[1.0, 1.0]).is_err());
}

#[test]
fn symmetric_gauss_seidel_reduces_energy_error() {
    let a = laplacian_2d(16);
    let x_true = random_vec(256, 4);
    let b = a.spmv(&x_true).unwrap();
    let energy = |x: &[f64]| {
        let e: Vec<f64> = x.iter().zip(&x_true).map(|(p, q)| p - q).collect();
        let ae = a.spmv(&e).unwrap();
        e.iter().zip(&ae).map(|(p, q)| p * q).sum::<f64>().sqrt()
    };
    let mut x = vec![0.0; 256];
    let mut last = energy(&x);
    for _ in 0..20 {
        x = sor_sweep(&a, &x, &b, 1.0, true, 1).unwrap();
        let now = energy(&x);
        assert!(now < last, "{now} >= {last}");
        last = now;
    }
}

#[test]
fn galerkin_levels_stay_symmetric_on_laplacian() {
    let a = laplacian_2d(24);
    let h = AmgHierarchy::setup(&a, &AmgConfig { strong_threshold: 0.25, ..AmgConfig::default() }).unwrap();
    assert!(h.n_levels() >= 2);
    for k in 0..h.n_levels() {
        let m = dense_of(h.level_matrix(k));
        assert!((&m - m.transpose()).abs().max() <= 1e-12 * m.abs().max(), "level {k}");
    }
    assert!(h.stats().operator_complexity <= 5.0);
}

#[test]
fn hierarchy_complexity_on_generated_problems() {
    for (dim, refine) in [(2, 16), (2, 48), (3, 8), (3, 16)] {
        for variant in [PtVariant::Cpr, PtVariant::SystemAmg] {
            let p = generate(&ProblemSpec::with_fractions(dim, refine, 0.5, 0.5, 3).unwrap()).unwrap();
            let pc = AssembledPreconditioner::setup(&p.matrix, &p.layout, &p.spec.material, &PreconditionerConfig::with_pt(variant))
                .unwrap();
            for stats in [&pc.report.mech_amg, &pc.report.pt_amg].into_iter().flatten() {
                assert!(stats.operator_complexity <= 5.0, "{dim}D {variant}: {stats:?}");
            }
            assert!(pc.report.mech_amg.is_some() && pc.report.pt_amg.is_some());
        }
    }
}
