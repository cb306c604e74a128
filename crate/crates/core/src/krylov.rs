//! Right-preconditioned restarted GMRES and flexible GMRES.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operator::vecops::{axpy, dot, norm2};
use crate::operator::{ensure_finite, LinearOperator};
use crate::precond::PreconditionerReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovConfig {
    pub restart: usize,
    pub max_iters: usize,
    pub rtol: f64,
    pub flexible: bool,
    /// Tolerance of the inner Krylov solves that accelerate each subsolver
    /// when `flexible` is set.
    pub inner_rtol: f64,
    pub inner_max_iters: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            restart: 30,
            max_iters: 120,
            rtol: 1e-12,
            flexible: false,
            inner_rtol: 1e-5,
            inner_max_iters: 100,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 {
            return Err(Error::InvalidConfig("restart must be at least 1".into()));
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::InvalidConfig(format!("rtol must lie in (0, 1), got {}", self.rtol)));
        }
        if self.flexible && !(self.inner_rtol > 0.0 && self.inner_rtol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "inner_rtol must lie in (0, 1), got {}",
                self.inner_rtol
            )));
        }
        Ok(())
    }

    /// Settings for an inner solve at `inner_rtol`.
    pub fn inner(&self) -> KrylovConfig {
        KrylovConfig {
            restart: self.restart,
            max_iters: self.inner_max_iters,
            rtol: self.inner_rtol,
            flexible: false,
            inner_rtol: self.inner_rtol,
            inner_max_iters: self.inner_max_iters,
        }
    }
}

/// Least-squares and true relative residual at the end of one restart cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleResidual {
    pub iterations: usize,
    pub estimated: f64,
    pub true_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Relative residual after each iteration, starting with the initial one.
    /// Entries inside a cycle are least-squares estimates; the entry closing
    /// a cycle is the recomputed true residual.
    pub residual_history: Vec<f64>,
    pub cycles: Vec<CycleResidual>,
    pub final_relative_residual: f64,
    pub lucky_breakdown: bool,
    pub config: KrylovConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preconditioner: Option<PreconditionerReport>,
    /// Wall-clock milliseconds per stage. Not reproducible.
    #[serde(default)]
    pub timings_ms: BTreeMap<String, f64>,
}

struct Givens {
    c: f64,
    s: f64,
}

/// Solves `A x = b` by GMRES on `A M^{-1} y = b`, `x = M^{-1} y`, from `x = 0`.
pub fn gmres(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    run(a, m, b, cfg, false)
}

/// Flexible variant: stores the preconditioned directions, so `m` may change
/// between applications.
pub fn fgmres(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    run(a, m, b, cfg, true)
}

fn run(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    cfg: &KrylovConfig,
    flexible: bool,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let n = a.dim();
    check_len("Krylov rhs", n, b.len())?;
    check_len("Krylov preconditioner", n, m.dim())?;
    ensure_finite("right-hand side", b)?;
    let mut report = SolveReport {
        converged: false,
        iterations: 0,
        residual_history: Vec::new(),
        cycles: Vec::new(),
        final_relative_residual: 0.0,
        lucky_breakdown: false,
        config: KrylovConfig { flexible, ..cfg.clone() },
        preconditioner: None,
        timings_ms: BTreeMap::new(),
    };
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.converged = true;
        report.residual_history.push(0.0);
        return Ok((x, report));
    }
    report.residual_history.push(1.0);

    let k = cfg.restart;
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(if flexible { k } else { 0 });
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut rot: Vec<Givens> = Vec::with_capacity(k);
    let mut g = vec![0.0; k + 1];
    let mut w = vec![0.0; n];
    let mut zj = vec![0.0; n];
    let mut r = b.to_vec();
    let mut beta = bnorm;

    loop {
        v.clear();
        z.clear();
        h.clear();
        rot.clear();
        g.iter_mut().for_each(|e| *e = 0.0);
        g[0] = beta;
        v.push(r.iter().map(|e| e / beta).collect());
        let mut breakdown = false;

        while h.len() < k && report.iterations < cfg.max_iters {
            let j = h.len();
            m.apply_into(&v[j], &mut zj)?;
            ensure_finite("preconditioner", &zj)?;
            a.apply_into(&zj, &mut w)?;
            ensure_finite("operator", &w)?;
            if flexible {
                z.push(zj.clone());
            }
            let before = norm2(&w);
            let mut col = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                col[i] = hij;
                axpy(-hij, vi, &mut w);
            }
            let mut after = norm2(&w);
            if after > 0.0 {
                let loss = v.iter().map(|vi| dot(&w, vi).abs()).fold(0.0, f64::max) / after;
                if loss > 1e-8 {
                    for (i, vi) in v.iter().enumerate() {
                        let hij = dot(&w, vi);
                        col[i] += hij;
                        axpy(-hij, vi, &mut w);
                    }
                    after = norm2(&w);
                }
            }
            col[j + 1] = after;
            for (i, gv) in rot.iter().enumerate() {
                let t = gv.c * col[i] + gv.s * col[i + 1];
                col[i + 1] = -gv.s * col[i] + gv.c * col[i + 1];
                col[i] = t;
            }
            let rr = col[j].hypot(col[j + 1]);
            let gv = if rr == 0.0 {
                Givens { c: 1.0, s: 0.0 }
            } else {
                Givens {
                    c: col[j] / rr,
                    s: col[j + 1] / rr,
                }
            };
            col[j] = rr;
            col[j + 1] = 0.0;
            g[j + 1] = -gv.s * g[j];
            g[j] *= gv.c;
            rot.push(gv);
            h.push(col);
            report.iterations += 1;
            let est = g[j + 1].abs() / bnorm;
            report.residual_history.push(est);

            if after <= f64::EPSILON * before || after == 0.0 {
                breakdown = true;
                break;
            }
            if est <= cfg.rtol {
                break;
            }
            v.push(w.iter().map(|e| e / after).collect());
        }

        // y = R^{-1} g
        let kk = h.len();
        let mut y = vec![0.0; kk];
        for i in (0..kk).rev() {
            let mut s = g[i];
            for (l, yl) in y.iter().enumerate().skip(i + 1) {
                s -= h[l][i] * yl;
            }
            if h[i][i] == 0.0 {
                return Err(Error::NonFinite { stage: "GMRES least-squares (singular Hessenberg)" });
            }
            y[i] = s / h[i][i];
        }
        if flexible {
            for (yi, zi) in y.iter().zip(&z) {
                axpy(*yi, zi, &mut x);
            }
        } else {
            let mut u = vec![0.0; n];
            for (yi, vi) in y.iter().zip(&v) {
                axpy(*yi, vi, &mut u);
            }
            m.apply_into(&u, &mut zj)?;
            ensure_finite("preconditioner", &zj)?;
            axpy(1.0, &zj, &mut x);
        }
        r.copy_from_slice(b);
        a.apply_into(&x, &mut w)?;
        ensure_finite("operator", &w)?;
        axpy(-1.0, &w, &mut r);
        beta = norm2(&r);
        let true_rel = beta / bnorm;
        let estimated = g[kk].abs() / bnorm;
        report.cycles.push(CycleResidual {
            iterations: report.iterations,
            estimated,
            true_residual: true_rel,
        });
        *report.residual_history.last_mut().expect("non-empty") = true_rel;
        report.final_relative_residual = true_rel;
        report.lucky_breakdown |= breakdown;
        if true_rel <= cfg.rtol {
            report.converged = true;
            break;
        }
        if report.iterations >= cfg.max_iters || beta == 0.0 {
            break;
        }
    }
    Ok((x, report))
}

/// A subsolver accelerated by an inner GMRES solve on its own operator. The
/// result depends on the inner convergence, so it must be used with FGMRES.
pub struct InnerKrylov<M> {
    pub matrix: crate::sparse::CsrMatrix,
    pub preconditioner: M,
    pub config: KrylovConfig,
}

impl<M: LinearOperator> LinearOperator for InnerKrylov<M> {
    fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let (sol, _) = gmres(&self.matrix, &self.preconditioner, x, &self.config)?;
        y.copy_from_slice(&sol);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Identity;
    use crate::sparse::CsrMatrix;
    use crate::subsolvers::{AmgConfig, AmgHierarchy, Ilu0};

    fn lap2d(m: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for y in 0..m {
            for x in 0..m {
                let i = y * m + x;
                t.push((i, i, 4.0));
                for (ok, j) in [(x > 0, i.wrapping_sub(1)), (x + 1 < m, i + 1), (y > 0, i.wrapping_sub(m)), (y + 1 < m, i + m)] {
                    if ok {
                        t.push((i, j, -1.0));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(&t, m * m, m * m).unwrap()
    }

    fn convdiff(m: usize) -> CsrMatrix {
        let l = lap2d(m);
        let mut t = Vec::new();
        for i in 0..l.n_rows() {
            let (c, v) = l.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push((i, j, x));
            }
            t.push((i, i, 1.0));
            if i % m > 0 {
                t.push((i, i - 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(&t, m * m, m * m).unwrap()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = vec![1.0, 2.0, -3.0];
        let (x, rep) = gmres(&Identity(3), &Identity(3), &b, &KrylovConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for (a, b) in x.iter().zip(&b) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rhs() {
        let (x, rep) = fgmres(&Identity(4), &Identity(4), &[0.0; 4], &KrylovConfig::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
        assert!(!rep.residual_history.is_empty());
    }

    #[test]
    fn preconditioning_reduces_iterations() {
        let a = lap2d(32);
        let b: Vec<f64> = (0..a.n_rows()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let cfg = KrylovConfig {
            max_iters: 2000,
            rtol: 1e-8,
            ..KrylovConfig::default()
        };
        let (_, plain) = gmres(&a, &Identity(a.n_rows()), &b, &cfg).unwrap();
        let amg = AmgHierarchy::setup(&a, &AmgConfig { strong_threshold: 0.25, ..AmgConfig::default() }).unwrap();
        let (x, pre) = gmres(&a, &amg, &b, &cfg).unwrap();
        assert!(pre.converged && plain.converged);
        assert!(pre.iterations < plain.iterations, "{} vs {}", pre.iterations, plain.iterations);
        let mut r = b.clone();
        a.sub_spmv_into(&x, &mut r).unwrap();
        assert!(norm2(&r) / norm2(&b) <= 1e-8);
    }

    #[test]
    fn residual_is_monotone_within_cycles_and_estimate_matches() {
        let a = convdiff(20);
        let b: Vec<f64> = (0..a.n_rows()).map(|i| (i as f64 * 0.1).sin()).collect();
        let cfg = KrylovConfig {
            restart: 10,
            max_iters: 400,
            rtol: 1e-10,
            ..KrylovConfig::default()
        };
        let ilu = Ilu0::factor(&a).unwrap();
        let (_, rep) = gmres(&a, &ilu, &b, &cfg).unwrap();
        assert!(rep.converged);
        let mut start = 0;
        for c in &rep.cycles {
            let seg = &rep.residual_history[start..c.iterations];
            for w in seg.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
            assert!((c.estimated - c.true_residual).abs() <= 1e-8 * c.true_residual.max(1e-4), "{c:?}");
            start = c.iterations;
        }
        assert!(*rep.residual_history.last().unwrap() <= cfg.rtol);
    }

    #[test]
    fn flexible_matches_standard_for_fixed_preconditioner() {
        let a = convdiff(16);
        let b: Vec<f64> = (0..a.n_rows()).map(|i| 1.0 + (i % 3) as f64).collect();
        let ilu = Ilu0::factor(&a).unwrap();
        let cfg = KrylovConfig {
            restart: 8,
            ..KrylovConfig::default()
        };
        let (x1, r1) = gmres(&a, &ilu, &b, &cfg).unwrap();
        let (x2, r2) = fgmres(&a, &ilu, &b, &cfg).unwrap();
        assert_eq!(r1.iterations, r2.iterations);
        for (p, q) in r1.residual_history.iter().zip(&r2.residual_history) {
            assert!((p - q).abs() <= 1e-12);
        }
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() <= 1e-12 * norm2(&x1));
        }
    }

    #[test]
    fn deterministic_history() {
        let a = convdiff(24);
        let b: Vec<f64> = (0..a.n_rows()).map(|i| (i as f64).sqrt()).collect();
        let ilu = Ilu0::factor(&a).unwrap();
        let cfg = KrylovConfig::default();
        let (_, r1) = gmres(&a, &ilu, &b, &cfg).unwrap();
        let (_, r2) = gmres(&a, &ilu, &b, &cfg).unwrap();
        let bits = |r: &SolveReport| r.residual_history.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&r1), bits(&r2));
    }

    #[test]
    fn non_finite_operator_is_an_error() {
        struct Bad;
        impl LinearOperator for Bad {
            fn dim(&self) -> usize {
                2
            }
            fn apply_into(&self, _: &[f64], y: &mut [f64]) -> Result<()> {
                y.fill(f64::NAN);
                Ok(())
            }
        }
        assert!(matches!(
            gmres(&Bad, &Identity(2), &[1.0, 1.0], &KrylovConfig::default()),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn max_iters_stops_unconverged() {
        let a = lap2d(16);
        let b = vec![1.0; 256];
        let cfg = KrylovConfig {
            max_iters: 5,
            ..KrylovConfig::default()
        };
        let (_, rep) = gmres(&a, &Identity(256), &b, &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 5);
        assert!(rep.final_relative_residual > cfg.rtol);
    }

    #[test]
    fn inner_acceleration_solves_to_inner_tolerance() {
        let a = lap2d(12);
        let ilu = Ilu0::factor(&a).unwrap();
        let inner = InnerKrylov {
            matrix: a.clone(),
            preconditioner: ilu,
            config: KrylovConfig::default().inner(),
        };
        let b = vec![1.0; 144];
        let x = inner.apply(&b).unwrap();
        let mut r = b.clone();
        a.sub_spmv_into(&x, &mut r).unwrap();
        assert!(norm2(&r) / norm2(&b) <= 1e-5);
    }
}
