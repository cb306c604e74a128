//! The full block preconditioner: contact elimination, mechanics, interface
//! fluxes and the pressure-temperature subsystem applied as one block
//! upper-triangular solve.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::contact::{apply_transform, form_s1, recover_solution, ReducedSystem, TransformedSystem};
use crate::error::{check_len, Error, Result};
use crate::krylov::{fgmres, gmres, InnerKrylov, KrylovConfig, SolveReport};
use crate::operator::vecops::norm2;
use crate::operator::{ensure_finite, LinearOperator};
use crate::problem::MaterialParams;
use crate::pt::{pt_amg_config, PtPreconditioner, PtVariant};
use crate::schur::{exact_s2, exact_s3, FixedStressCoeffs, SchurChain};
use crate::sparse::{Block, BlockLayout, CsrMatrix, DenseLu};
use crate::subsolvers::{AmgConfig, AmgHierarchy, Coarsening, HierarchyStats, Smoother};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechSmoother {
    Sor,
    BlockIlu0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreconditionerConfig {
    pub pt_variant: PtVariant,
    /// Dense exact Schur complements and direct solves everywhere.
    pub exact_mode: bool,
    /// `None`: SOR in 2D, point-block ILU(0) in 3D.
    pub mech_smoother: Option<MechSmoother>,
    pub amg_threshold: f64,
    /// Threshold of the pressure-temperature AMG; `None` reuses `amg_threshold`.
    pub pt_amg_threshold: Option<f64>,
    pub thermal_stab: bool,
    pub n_smooth: usize,
    pub coarse_cap: usize,
    pub dense_cap: usize,
}

impl Default for PreconditionerConfig {
    fn default() -> Self {
        Self {
            pt_variant: PtVariant::Cpr,
            exact_mode: false,
            mech_smoother: None,
            amg_threshold: 0.7,
            pt_amg_threshold: None,
            thermal_stab: false,
            n_smooth: 2,
            coarse_cap: 64,
            dense_cap: 2000,
        }
    }
}

impl PreconditionerConfig {
    pub fn exact() -> Self {
        Self {
            pt_variant: PtVariant::ExactDense,
            exact_mode: true,
            ..Self::default()
        }
    }

    pub fn with_pt(pt_variant: PtVariant) -> Self {
        Self {
            pt_variant,
            ..Self::default()
        }
    }

    fn mech_amg(&self, dim: usize) -> AmgConfig {
        let smoother = match self.mech_smoother.unwrap_or(if dim == 2 { MechSmoother::Sor } else { MechSmoother::BlockIlu0 }) {
            MechSmoother::Sor => Smoother::Sor {
                omega: 1.0,
                symmetric: false,
            },
            MechSmoother::BlockIlu0 => Smoother::BlockIlu0 { block_size: dim },
        };
        AmgConfig {
            strong_threshold: self.amg_threshold,
            smoother,
            n_smooth: self.n_smooth,
            coarsening: Coarsening::SharedComponent { block_size: dim },
            coarse_cap: self.coarse_cap,
            dense_cap: self.dense_cap,
            max_interp_elements: Some(2),
            ..AmgConfig::default()
        }
    }

    fn pt_amg(&self) -> AmgConfig {
        AmgConfig {
            n_smooth: self.n_smooth,
            coarse_cap: self.coarse_cap,
            dense_cap: self.dense_cap,
            ..pt_amg_config(self.pt_amg_threshold.unwrap_or(self.amg_threshold))
        }
    }
}

/// Setup summary echoed into the solve report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreconditionerReport {
    pub config: PreconditionerConfig,
    pub coefficients: FixedStressCoeffs,
    /// Largest 1-norm condition number of a regularized contact cell block.
    pub contact_condition: f64,
    pub mech_amg: Option<HierarchyStats>,
    pub pt_amg: Option<HierarchyStats>,
    pub s3_nnz: usize,
    /// `||b - J x|| / ||b||` against the untransformed Jacobian.
    pub original_relative_residual: Option<f64>,
}

/// Immutable after setup; `apply` is reentrant.
pub struct AssembledPreconditioner {
    pub transformed: TransformedSystem,
    pub s1: ReducedSystem,
    pub s2: ReducedSystem,
    pub s3: ReducedSystem,
    /// The approximate chain (absent in exact mode).
    pub chain: Option<SchurChain>,
    /// `[S1_22 J23; S1_32 J33]`.
    pub mech_matrix: CsrMatrix,
    mech: Box<dyn LinearOperator>,
    flux: Box<dyn LinearOperator>,
    pt: Box<dyn LinearOperator>,
    s2_flux_to_pt: CsrMatrix,
    s1_mech_to_rest: CsrMatrix,
    contact_to_rest: CsrMatrix,
    pub report: PreconditionerReport,
    pub timings_ms: BTreeMap<String, f64>,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

impl AssembledPreconditioner {
    pub fn setup(j: &CsrMatrix, layout: &BlockLayout, material: &MaterialParams, cfg: &PreconditionerConfig) -> Result<Self> {
        Self::setup_with_inner(j, layout, material, cfg, None)
    }

    /// With `inner = Some(..)` the mechanics and pressure-temperature stages
    /// are each accelerated by an inner GMRES solve (use with FGMRES).
    pub fn setup_with_inner(
        j: &CsrMatrix,
        layout: &BlockLayout,
        material: &MaterialParams,
        cfg: &PreconditionerConfig,
        inner: Option<KrylovConfig>,
    ) -> Result<Self> {
        let n = layout.n();
        check_len("Jacobian rows vs layout", n, j.n_rows())?;
        check_len("Jacobian cols vs layout", n, j.n_cols())?;
        if material.dim != layout.dim() {
            return Err(Error::InvalidConfig(format!(
                "material dimension {} differs from layout dimension {}",
                material.dim,
                layout.dim()
            )));
        }
        if cfg.exact_mode && n > cfg.dense_cap {
            return Err(Error::InvalidConfig(format!(
                "exact mode needs n <= {} (dense cap), got {n}",
                cfg.dense_cap
            )));
        }
        let mut timings = BTreeMap::new();

        let t = Instant::now();
        let ts = apply_transform(j, layout).map_err(|e| e.at_stage("contact transform"))?;
        let s1 = form_s1(&ts).map_err(|e| e.at_stage("S1"))?;
        timings.insert("setup_transform".to_string(), elapsed_ms(t));

        let t = Instant::now();
        let coeffs = FixedStressCoeffs::from_material(material, layout, cfg.thermal_stab).map_err(|e| e.at_stage("coefficients"))?;
        let (chain, s2, s3) = if cfg.exact_mode {
            let s2 = exact_s2(&s1).map_err(|e| e.at_stage("exact S2"))?;
            let s3 = exact_s3(&s2).map_err(|e| e.at_stage("exact S3"))?;
            (None, s2, s3)
        } else {
            let chain = SchurChain::build(&s1, coeffs)?;
            let (s2, s3) = (chain.s2.clone(), chain.s3.clone());
            (Some(chain), s2, s3)
        };
        timings.insert("setup_schur".to_string(), elapsed_ms(t));

        let mech_span = s1.span(Block::InterfaceDisplacement, Block::Displacement);
        let rest_span = s1.span(Block::InterfaceFlux, Block::Temperature);
        let mech_matrix = s1.matrix.submatrix(mech_span.clone(), mech_span.clone());
        let s1_mech_to_rest = s1.matrix.submatrix(mech_span, rest_span);
        let flux = s2.range(Block::InterfaceFlux);
        let s2_flux_to_pt = s2.matrix.submatrix(flux.clone(), s2.span(Block::Pressure, Block::Temperature));
        let c1 = layout.range(Block::Contact);
        let contact_to_rest = ts.j_tilde.submatrix(c1, layout.span(Block::InterfaceDisplacement, Block::Temperature));
        let n_pressure = layout.len(Block::Pressure);

        let t = Instant::now();
        let (mech, mech_stats): (Box<dyn LinearOperator>, _) = if cfg.exact_mode {
            (Box::new(DenseLu::factor(&mech_matrix.to_dense()).map_err(|e| e.at_stage("dense mechanics"))?), None)
        } else {
            let h = AmgHierarchy::setup(&mech_matrix, &cfg.mech_amg(layout.dim())).map_err(|e| e.at_stage("mechanics AMG"))?;
            let stats = h.stats();
            (Box::new(h), Some(stats))
        };
        timings.insert("setup_mechanics".to_string(), elapsed_ms(t));

        let t = Instant::now();
        let flux_op: Box<dyn LinearOperator> = match &chain {
            Some(c) => Box::new(c.ilu_j44.clone()),
            None => {
                let j44 = s2.matrix.submatrix(flux.clone(), flux);
                Box::new(DenseLu::factor(&j44.to_dense()).map_err(|e| e.at_stage("dense interface flux"))?)
            }
        };
        let variant = if cfg.exact_mode { PtVariant::ExactDense } else { cfg.pt_variant };
        let pt = PtPreconditioner::setup(variant, &s3.matrix, n_pressure, &cfg.pt_amg()).map_err(|e| e.at_stage("pressure-temperature"))?;
        let pt_stats = pt.stats.clone();
        timings.insert("setup_pt".to_string(), elapsed_ms(t));

        let (mech, pt): (Box<dyn LinearOperator>, Box<dyn LinearOperator>) = match inner {
            Some(ic) => (
                Box::new(InnerKrylov {
                    matrix: mech_matrix.clone(),
                    preconditioner: mech,
                    config: ic.clone(),
                }),
                Box::new(InnerKrylov {
                    matrix: s3.matrix.clone(),
                    preconditioner: pt,
                    config: ic,
                }),
            ),
            None => (mech, Box::new(pt)),
        };

        let report = PreconditionerReport {
            config: PreconditionerConfig {
                pt_variant: variant,
                ..cfg.clone()
            },
            coefficients: coeffs,
            contact_condition: ts.contact_condition,
            mech_amg: mech_stats,
            pt_amg: pt_stats,
            s3_nnz: s3.matrix.nnz(),
            original_relative_residual: None,
        };
        Ok(Self {
            transformed: ts,
            s1,
            s2,
            s3,
            chain,
            mech_matrix,
            mech,
            flux: flux_op,
            pt,
            s2_flux_to_pt,
            s1_mech_to_rest,
            contact_to_rest,
            report,
            timings_ms: timings,
        })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.transformed.layout
    }
}

impl LinearOperator for AssembledPreconditioner {
    fn dim(&self) -> usize {
        self.layout().n()
    }

    /// Back substitution through the block upper-triangular approximation:
    /// pressure-temperature, interface fluxes, mechanics, contact.
    fn apply_into(&self, r: &[f64], v: &mut [f64]) -> Result<()> {
        let l = self.layout();
        check_len("preconditioner rhs", l.n(), r.len())?;
        check_len("preconditioner output", l.n(), v.len())?;
        let pt = l.span(Block::Pressure, Block::Temperature);
        let flux = l.range(Block::InterfaceFlux);
        let mech = l.span(Block::InterfaceDisplacement, Block::Displacement);
        let rest = l.span(Block::InterfaceFlux, Block::Temperature);
        let after_contact = l.span(Block::InterfaceDisplacement, Block::Temperature);
        let contact = l.range(Block::Contact);

        self.pt.apply_into(&r[pt.clone()], &mut v[pt.clone()])?;
        ensure_finite("pressure-temperature stage", &v[pt.clone()])?;

        let mut rhs = r[flux.clone()].to_vec();
        self.s2_flux_to_pt.sub_spmv_into(&v[pt], &mut rhs)?;
        self.flux.apply_into(&rhs, &mut v[flux.clone()])?;
        ensure_finite("interface flux stage", &v[flux])?;

        let mut rhs = r[mech.clone()].to_vec();
        let tail = v[rest].to_vec();
        self.s1_mech_to_rest.sub_spmv_into(&tail, &mut rhs)?;
        self.mech.apply_into(&rhs, &mut v[mech.clone()])?;
        ensure_finite("mechanics stage", &v[mech])?;

        let mut rhs = r[contact.clone()].to_vec();
        let tail = v[after_contact].to_vec();
        self.contact_to_rest.sub_spmv_into(&tail, &mut rhs)?;
        self.transformed.j11_tilde_inv.apply_into(&rhs, &mut v[contact.clone()])?;
        ensure_finite("contact stage", &v[contact])?;
        Ok(())
    }
}

/// Solves `J x = rhs` by (F)GMRES on `J Q_r P^{-1}` and recovers `x = Q_r P^{-1} y`.
pub fn solve(
    j: &CsrMatrix,
    layout: &BlockLayout,
    material: &MaterialParams,
    cfg: &PreconditionerConfig,
    krylov: &KrylovConfig,
    rhs: &[f64],
) -> Result<(Vec<f64>, SolveReport)> {
    krylov.validate()?;
    check_len("right-hand side", layout.n(), rhs.len())?;
    let inner = krylov.flexible.then(|| krylov.inner());
    let pc = AssembledPreconditioner::setup_with_inner(j, layout, material, cfg, inner)?;
    let t = Instant::now();
    let a = &pc.transformed.j_tilde;
    let (xt, mut report) = if krylov.flexible {
        fgmres(a, &pc, rhs, krylov)
    } else {
        gmres(a, &pc, rhs, krylov)
    }
    .map_err(|e| e.at_stage("Krylov"))?;
    let solve_ms = elapsed_ms(t);
    let x = recover_solution(&pc.transformed, &xt)?;

    let mut res = rhs.to_vec();
    j.sub_spmv_into(&x, &mut res)?;
    let bnorm = norm2(rhs);
    let mut pre = pc.report.clone();
    pre.original_relative_residual = Some(if bnorm > 0.0 { norm2(&res) / bnorm } else { 0.0 });
    report.preconditioner = Some(pre);
    report.timings_ms = pc.timings_ms.clone();
    report.timings_ms.insert("krylov".to_string(), solve_ms);
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate, ContactState, ProblemSpec};

    #[test]
    fn zero_rhs_gives_zero() {
        let p = generate(&ProblemSpec::uniform(2, 6, ContactState::Stick)).unwrap();
        let pc = AssembledPreconditioner::setup(&p.matrix, &p.layout, &p.spec.material, &PreconditionerConfig::default()).unwrap();
        let n = p.layout.n();
        assert_eq!(pc.apply(&vec![0.0; n]).unwrap(), vec![0.0; n]);
    }

    #[test]
    fn pressure_temperature_free_rhs_leaves_them_zero() {
        let p = generate(&ProblemSpec::uniform(2, 6, ContactState::Slide)).unwrap();
        let pc = AssembledPreconditioner::setup(&p.matrix, &p.layout, &p.spec.material, &PreconditionerConfig::default()).unwrap();
        let mut r = p.rhs.clone();
        let pt = p.layout.span(Block::Pressure, Block::Temperature);
        r[pt.clone()].fill(0.0);
        let v = pc.apply(&r).unwrap();
        assert!(v[pt].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn exact_mode_refuses_large_systems() {
        let p = generate(&ProblemSpec::uniform(2, 6, ContactState::Open)).unwrap();
        let cfg = PreconditionerConfig {
            dense_cap: 10,
            ..PreconditionerConfig::exact()
        };
        assert!(matches!(
            AssembledPreconditioner::setup(&p.matrix, &p.layout, &p.spec.material, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let p = generate(&ProblemSpec::with_fractions(2, 8, 0.4, 0.3, 3).unwrap()).unwrap();
        let (x, rep) = solve(
            &p.matrix,
            &p.layout,
            &p.spec.material,
            &PreconditionerConfig::default(),
            &KrylovConfig::default(),
            &p.rhs,
        )
        .unwrap();
        assert!(rep.converged, "{rep:?}");
        let err: Vec<f64> = x.iter().zip(&p.x_true).map(|(a, b)| a - b).collect();
        assert!(norm2(&err) <= 1e-8 * norm2(&p.x_true), "{}", norm2(&err));
    }
}
