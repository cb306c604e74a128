mod common;

use nalgebra::DVector;

use common::{block_view, dense_of, diff_norm, norm, oracle_qr, random_vec, schur_of_leading};
use thmpc::contact::{apply_transform, build_qr, form_s1, recover_solution};
use thmpc::krylov::{gmres, KrylovConfig};
use thmpc::pt::{PtPreconditioner, PtVariant};
use thmpc::schur::{build_s2, build_s3, exact_s2, exact_s3, FixedStressCoeffs, SchurChain};
use thmpc::subsolvers::AmgConfig;
use thmpc::{generate, Block, ContactState, GeneratedProblem, ProblemSpec};

fn problems() -> Vec<GeneratedProblem> {
    let mut out = Vec::new();
    for (dim, refine) in [(2, 6), (3, 3)] {
        for (stick, slide) in [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0), (0.4, 0.3)] {
            let spec = ProblemSpec::with_fractions(dim, refine, stick, slide, 5).unwrap();
            out.push(generate(&spec).unwrap());
        }
    }
    out
}

#[test]
fn transform_matches_dense_oracle() {
    for p in problems() {
        let j = dense_of(&p.matrix);
        let q = oracle_qr(&j, &p.layout);
        let ts = apply_transform(&p.matrix, &p.layout).unwrap();
        let scale = j.abs().max();
        assert!((dense_of(&ts.qr) - &q).abs().max() <= 1e-13 * (1.0 + q.abs().max()));
        assert!((dense_of(&ts.j_tilde) - &j * &q).abs().max() <= 1e-12 * scale);
    }
}

#[test]
fn transform_is_unimodular() {
    for dim in [2, 3] {
        for (stick, slide) in [(1.0, 0.0), (0.0, 1.0), (0.5, 0.5)] {
            let p = generate(&ProblemSpec::with_fractions(dim, 2, stick, slide, 1).unwrap()).unwrap();
            assert!(p.layout.n() <= 60, "n = {}", p.layout.n());
            let q = dense_of(&build_qr(&p.matrix, &p.layout).unwrap());
            assert!((q.determinant() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn transformed_contact_column_is_projected() {
    for p in problems() {
        let j = dense_of(&p.matrix);
        let l = &p.layout;
        let dim = l.dim();
        let j21 = block_view(&j, l, Block::InterfaceDisplacement, Block::Contact);
        let j22 = block_view(&j, l, Block::InterfaceDisplacement, Block::InterfaceDisplacement);
        let mut d = j22.clone() * 0.0;
        for c in 0..j22.nrows() / dim {
            d.view_mut((c * dim, c * dim), (dim, dim))
                .copy_from(&j22.view((c * dim, c * dim), (dim, dim)).into_owned().try_inverse().unwrap());
        }
        let expect = (nalgebra::DMatrix::identity(j22.nrows(), j22.nrows()) - &j22 * d) * &j21;
        let ts = apply_transform(&p.matrix, l).unwrap();
        assert!((dense_of(&ts.e21) - expect).abs().max() <= 1e-12 * j.abs().max());
    }
}

#[test]
fn transform_only_changes_the_contact_column() {
    for p in problems() {
        let ts = apply_transform(&p.matrix, &p.layout).unwrap();
        let c1 = p.layout.range(Block::Contact);
        for i in 0..p.layout.n() {
            let (cols, vals) = ts.j_tilde.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if !c1.contains(&c) {
                    assert_eq!(v, p.matrix.get(i, c), "({i},{c})");
                }
            }
        }
    }
}

#[test]
fn first_schur_complement_matches_dense() {
    for p in problems() {
        let ts = apply_transform(&p.matrix, &p.layout).unwrap();
        let s1 = form_s1(&ts).unwrap();
        let expect = schur_of_leading(&dense_of(&ts.j_tilde), p.layout.len(Block::Contact));
        let err = (dense_of(&s1.matrix) - &expect).abs().max();
        assert!(err <= 1e-11 * (1.0 + expect.abs().max()), "{err:e}");
    }
}

#[test]
fn recovered_solution_matches_direct_solve() {
    for p in problems().into_iter().filter(|p| p.layout.states().iter().all(|&s| s == ContactState::Open)) {
        let ts = apply_transform(&p.matrix, &p.layout).unwrap();
        let jt = dense_of(&ts.j_tilde);
        let b = DVector::from_vec(p.rhs.clone());
        let xt = jt.lu().solve(&b).unwrap();
        let x = recover_solution(&ts, xt.as_slice()).unwrap();
        let direct = dense_of(&p.matrix).lu().solve(&b).unwrap();
        assert!(diff_norm(&x, direct.as_slice()) <= 1e-9 * norm(direct.as_slice()));
    }
}

#[test]
fn transformed_system_is_regular_for_closed_states() {
    for p in problems() {
        let ts = apply_transform(&p.matrix, &p.layout).unwrap();
        assert!(ts.contact_condition.is_finite() && ts.contact_condition < 1e8, "{}", ts.contact_condition);
        let b = random_vec(p.layout.n(), 1);
        let xt = dense_of(&ts.j_tilde).lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let x = recover_solution(&ts, xt.as_slice()).unwrap();
        let r: Vec<f64> = p.matrix.spmv(&x).unwrap().iter().zip(&b).map(|(a, c)| a - c).collect();
        assert!(norm(&r) <= 1e-9 * norm(&b));
    }
}

#[test]
fn stabilization_lands_on_diagonal_of_pressure_rows_only() {
    let p = generate(&ProblemSpec::with_fractions(3, 4, 0.3, 0.3, 2).unwrap()).unwrap();
    let s1 = form_s1(&apply_transform(&p.matrix, &p.layout).unwrap()).unwrap();
    let coeffs = FixedStressCoeffs::from_material(&p.spec.material, &p.layout, false).unwrap();
    let (plain, _, _) = build_s2(&s1, &FixedStressCoeffs::zero()).unwrap();
    let (s2, f55, f66) = build_s2(&s1, &coeffs).unwrap();
    assert!(f66.iter().all(|&v| v == 0.0));
    let diff = dense_of(&s2.matrix) - dense_of(&plain.matrix);
    let pr = s2.range(Block::Pressure);
    for i in 0..diff.nrows() {
        for j in 0..diff.ncols() {
            if i == j && pr.contains(&i) {
                let e = f55[i - pr.start];
                assert!((diff[(i, j)] - e).abs() <= 1e-13 * (1.0 + plain.matrix.max_abs()));
            } else {
                assert_eq!(diff[(i, j)], 0.0);
            }
        }
    }
    assert!(f55.iter().any(|&v| v > 0.0));
}

#[test]
fn diagonal_flux_elimination_pattern_and_gap() {
    for dim in [2, 3] {
        let refine = if dim == 2 { 6 } else { 3 };
        let p = generate(&ProblemSpec::with_fractions(dim, refine, 0.3, 0.4, 8).unwrap()).unwrap();
        let s1 = form_s1(&apply_transform(&p.matrix, &p.layout).unwrap()).unwrap();
        let coeffs = FixedStressCoeffs::from_material(&p.spec.material, &p.layout, false).unwrap();
        let chain = SchurChain::build(&s1, coeffs).unwrap();

        // pattern: S3 = S2_pt - S2_p4 diag^-1 S2_4p, nothing else
        let s2 = dense_of(&chain.s2.matrix);
        let nf = p.layout.len(Block::InterfaceFlux);
        let n = s2.nrows();
        let a44 = s2.view((0, 0), (nf, nf)).into_owned();
        let dinv = nalgebra::DMatrix::from_diagonal(&a44.diagonal().map(|v| 1.0 / v));
        let expect = s2.view((nf, nf), (n - nf, n - nf)).into_owned()
            - s2.view((nf, 0), (n - nf, nf)) * dinv * s2.view((0, nf), (nf, n - nf));
        let s3 = dense_of(&chain.s3.matrix);
        assert!((&s3 - &expect).abs().max() <= 1e-12 * (1.0 + expect.abs().max()));
        for i in 0..s3.nrows() {
            for j in 0..s3.ncols() {
                if expect[(i, j)] == 0.0 {
                    assert_eq!(s3[(i, j)], 0.0);
                }
            }
        }

        let exact = dense_of(&exact_s3(&chain.s2).unwrap().matrix);
        let gap = (&s3 - &exact).norm() / exact.norm();
        assert!(gap.is_finite() && gap < 1.0, "{dim}D gap {gap:e}");

        let np = p.layout.len(Block::Pressure);
        let pc = PtPreconditioner::setup(PtVariant::Cpr, &chain.s3.matrix, np, &AmgConfig::default()).unwrap();
        let b = random_vec(chain.s3.matrix.n_rows(), 3);
        let (_, report) = gmres(&chain.s3.matrix, &pc, &b, &KrylovConfig::default()).unwrap();
        assert!(report.converged, "{dim}D: {} iterations", report.iterations);
    }
}

#[test]
fn exact_second_complement_matches_dense() {
    let p = generate(&ProblemSpec::with_fractions(2, 6, 0.3, 0.3, 4).unwrap()).unwrap();
    let s1 = form_s1(&apply_transform(&p.matrix, &p.layout).unwrap()).unwrap();
    let mech = s1.span(Block::InterfaceDisplacement, Block::Displacement).len();
    let expect = schur_of_leading(&dense_of(&s1.matrix), mech);
    let s2 = exact_s2(&s1).unwrap();
    assert!((dense_of(&s2.matrix) - &expect).abs().max() <= 1e-10 * (1.0 + expect.abs().max()));
    let (_, ilu) = build_s3(&s2).unwrap();
    assert_eq!(ilu.nnz(), s2.block(Block::InterfaceFlux, Block::InterfaceFlux).nnz());
}
