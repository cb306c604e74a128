mod common;

use common::{diff_norm, laplacian_2d, norm, random_vec};
use thmpc::krylov::{fgmres, gmres, InnerKrylov, KrylovConfig};
use thmpc::operator::Identity;
use thmpc::subsolvers::{AmgConfig, AmgHierarchy};
use thmpc::{generate, AssembledPreconditioner, LinearOperator, PreconditionerConfig, ProblemSpec};

#[test]
fn cycle_estimates_track_true_residuals() {
    for flexible in [false, true] {
        let p = generate(&ProblemSpec::with_fractions(2, 12, 0.3, 0.3, 1).unwrap()).unwrap();
        let pc = AssembledPreconditioner::setup(&p.matrix, &p.layout, &p.spec.material, &PreconditionerConfig::default()).unwrap();
        let cfg = KrylovConfig { restart: 5, flexible, ..KrylovConfig::default() };
        let a = &pc.transformed.j_tilde;
        let (x, report) = if flexible { fgmres(a, &pc, &p.rhs, &cfg) } else { gmres(a, &pc, &p.rhs, &cfg) }.unwrap();
        assert!(report.converged);
        assert!(report.cycles.len() >= 2);
        for c in &report.cycles {
            assert!((c.estimated - c.true_residual).abs() <= 1e-8, "{c:?}");
        }
        let r: Vec<f64> = a.spmv(&x).unwrap().iter().zip(&p.rhs).map(|(u, v)| u - v).collect();
        let last = report.cycles.last().unwrap();
        assert!((norm(&r) / norm(&p.rhs) - last.true_residual).abs() <= 1e-14);
        assert_eq!(report.residual_history.len(), report.iterations + 1);
    }
}

#[test]
fn plain_gmres_needs_many_more_iterations_than_amg() {
    let a = laplacian_2d(32);
    let b = random_vec(1024, 2);
    let cfg = KrylovConfig { rtol: 1e-8, max_iters: 1000, ..KrylovConfig::default() };
    let amg = AmgHierarchy::setup(&a, &AmgConfig { strong_threshold: 0.25, ..AmgConfig::default() }).unwrap();
    let (x1, with) = gmres(&a, &amg, &b, &cfg).unwrap();
    let (x2, without) = gmres(&a, &Identity(1024), &b, &cfg).unwrap();
    assert!(with.converged && without.converged);
    assert!(without.iterations > 4 * with.iterations, "{} vs {}", without.iterations, with.iterations);
    assert!(diff_norm(&x1, &x2) <= 1e-6 * norm(&x1));
}

#[test]
fn flexible_outer_with_inner_solver_matches_rigid() {
    let a = laplacian_2d(24);
    let b = random_vec(576, 3);
    let cfg = KrylovConfig { flexible: true, ..KrylovConfig::default() };
    let amg = AmgHierarchy::setup(&a, &AmgConfig { strong_threshold: 0.25, ..AmgConfig::default() }).unwrap();
    let inner = InnerKrylov { matrix: a.clone(), preconditioner: &amg, config: cfg.inner() };
    let (x, report) = fgmres(&a, &inner, &b, &cfg).unwrap();
    assert!(report.converged);
    let (y, _) = gmres(&a, &amg, &b, &KrylovConfig::default()).unwrap();
    assert!(diff_norm(&x, &y) <= 1e-9 * norm(&y));
    assert_eq!(inner.dim(), 576);
}

#[test]
fn zero_right_hand_side_returns_zero() {
    let a = laplacian_2d(8);
    let (x, report) = gmres(&a, &Identity(64), &vec![0.0; 64], &KrylovConfig::default()).unwrap();
    assert!(report.converged);
    assert_eq!(report.iterations, 0);
    assert!(x.iter().all(|&v| v == 0.0));
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let a = laplacian_2d(32);
    let cfg = KrylovConfig { max_iters: 7, ..KrylovConfig::default() };
    let (_, report) = gmres(&a, &Identity(1024), &random_vec(1024, 1), &cfg).unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations, 7);
}
