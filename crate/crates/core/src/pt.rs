//! Pressure-temperature subsolvers on S^3: two-stage CPR, System-AMG on the
//! coupled matrix, and a dense direct oracle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;
use crate::sparse::{CsrMatrix, DenseLu, Permutation};
use crate::subsolvers::{AmgConfig, AmgHierarchy, BlockIlu0, Coarsening, HierarchyStats, Smoother};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PtVariant {
    Cpr,
    SystemAmg,
    ExactDense,
}

impl fmt::Display for PtVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PtVariant::Cpr => "cpr",
            PtVariant::SystemAmg => "samg",
            PtVariant::ExactDense => "exact",
        })
    }
}

impl FromStr for PtVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cpr" => Ok(PtVariant::Cpr),
            "samg" | "system_amg" | "system-amg" => Ok(PtVariant::SystemAmg),
            "exact" | "exact_dense" => Ok(PtVariant::ExactDense),
            other => Err(Error::InvalidConfig(format!("unknown pressure-temperature solver {other:?}"))),
        }
    }
}

/// Maps physics order `[p_0..p_{n-1}, T_0..T_{n-1}]` to cellwise order
/// `[p_0, T_0, p_1, T_1, ...]`: `p_i -> 2i`, `T_i -> 2i + 1`.
pub fn interleave_permutation(n_pressure: usize, n_temperature: usize) -> Result<Permutation> {
    if n_pressure != n_temperature {
        return Err(Error::Layout(format!(
            "interleaving needs equal pressure and temperature counts, got {n_pressure} and {n_temperature}"
        )));
    }
    let n = n_pressure;
    let forward = (0..n).map(|i| 2 * i).chain((0..n).map(|i| 2 * i + 1)).collect();
    Permutation::from_forward(forward)
}

/// A local-stage operator that runs an interleaved solver on physics-ordered vectors.
pub struct Interleaved<M> {
    pub perm: Permutation,
    pub inner: M,
}

impl<M: LinearOperator> LinearOperator for Interleaved<M> {
    fn dim(&self) -> usize {
        self.perm.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let mut xp = vec![0.0; x.len()];
        self.perm.apply_into(x, &mut xp)?;
        let mut yp = vec![0.0; x.len()];
        self.inner.apply_into(&xp, &mut yp)?;
        self.perm.apply_inverse_into(&yp, y)
    }
}

/// Two-stage preconditioner `M^{-1} = M_G^{-1} + M_L^{-1} (I - A M_G^{-1})`
/// whose global stage acts on the pressure rows only.
pub struct Cpr {
    s3: CsrMatrix,
    n_pressure: usize,
    global: Box<dyn LinearOperator>,
    local: Box<dyn LinearOperator>,
}

impl Cpr {
    /// Default stages: one AMG V-cycle on `S3_55`, point-block ILU(0) with
    /// block size 2 on the interleaved `S3`.
    pub fn setup(s3: &CsrMatrix, n_pressure: usize, amg: &AmgConfig) -> Result<(Self, HierarchyStats)> {
        let n_t = s3.n_rows() - n_pressure;
        let perm = interleave_permutation(n_pressure, n_t)?;
        let s55 = s3.submatrix(0..n_pressure, 0..n_pressure);
        let h = AmgHierarchy::setup(&s55, amg).map_err(|e| e.at_stage("CPR pressure AMG"))?;
        let stats = h.stats();
        let ilu = BlockIlu0::factor(&s3.permute_symmetric(&perm)?, 2).map_err(|e| e.at_stage("CPR block ILU(0)"))?;
        let local = Interleaved { perm, inner: ilu };
        Ok((Self::with_stages(s3.clone(), n_pressure, Box::new(h), Box::new(local))?, stats))
    }

    /// Custom stages; `global` acts on pressure vectors, `local` on full
    /// physics-ordered vectors.
    pub fn with_stages(
        s3: CsrMatrix,
        n_pressure: usize,
        global: Box<dyn LinearOperator>,
        local: Box<dyn LinearOperator>,
    ) -> Result<Self> {
        check_len("CPR global stage", n_pressure, global.dim())?;
        check_len("CPR local stage", s3.n_rows(), local.dim())?;
        Ok(Self {
            s3,
            n_pressure,
            global,
            local,
        })
    }
}

impl LinearOperator for Cpr {
    fn dim(&self) -> usize {
        self.s3.n_rows()
    }

    fn apply_into(&self, r: &[f64], v: &mut [f64]) -> Result<()> {
        check_len("CPR rhs", self.dim(), r.len())?;
        let np = self.n_pressure;
        let mut vg = vec![0.0; r.len()];
        self.global.apply_into(&r[..np], &mut vg[..np])?;
        let mut res = r.to_vec();
        self.s3.sub_spmv_into(&vg, &mut res)?;
        self.local.apply_into(&res, v)?;
        for (vi, gi) in v.iter_mut().zip(&vg) {
            *vi += gi;
        }
        Ok(())
    }
}

/// One V-cycle of unknown-based AMG on the interleaved coupled matrix.
pub fn samg_setup(s3: &CsrMatrix, n_pressure: usize, amg: &AmgConfig) -> Result<(Interleaved<AmgHierarchy>, HierarchyStats)> {
    let perm = interleave_permutation(n_pressure, s3.n_rows() - n_pressure)?;
    let ids = (0..s3.n_rows()).map(|i| i % 2).collect();
    let cfg = AmgConfig {
        coarsening: Coarsening::Unknowns(ids),
        ..amg.clone()
    };
    let h = AmgHierarchy::setup(&s3.permute_symmetric(&perm)?, &cfg).map_err(|e| e.at_stage("System-AMG"))?;
    let stats = h.stats();
    Ok((Interleaved { perm, inner: h }, stats))
}

/// Default AMG settings of the pressure-temperature stage: symmetric SOR, two sweeps.
pub fn pt_amg_config(threshold: f64) -> AmgConfig {
    AmgConfig {
        strong_threshold: threshold,
        smoother: Smoother::Sor {
            omega: 1.0,
            symmetric: true,
        },
        max_interp_elements: Some(4),
        ..AmgConfig::default()
    }
}

/// The configured pressure-temperature solver.
pub struct PtPreconditioner {
    pub variant: PtVariant,
    pub op: Box<dyn LinearOperator>,
    pub stats: Option<HierarchyStats>,
}

impl PtPreconditioner {
    pub fn setup(variant: PtVariant, s3: &CsrMatrix, n_pressure: usize, amg: &AmgConfig) -> Result<Self> {
        let (op, stats): (Box<dyn LinearOperator>, _) = match variant {
            PtVariant::Cpr => {
                let (c, s) = Cpr::setup(s3, n_pressure, amg)?;
                (Box::new(c), Some(s))
            }
            PtVariant::SystemAmg => {
                let (h, s) = samg_setup(s3, n_pressure, amg)?;
                (Box::new(h), Some(s))
            }
            PtVariant::ExactDense => (
                Box::new(DenseLu::factor(&s3.to_dense()).map_err(|e| e.at_stage("dense S3"))?),
                None,
            ),
        };
        Ok(Self { variant, op, stats })
    }
}

impl LinearOperator for PtPreconditioner {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.op.apply_into(x, y)
    }
}
