//! Experiment plumbing: generated runs, parameter sweeps and CSV records.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{KrylovConfig, SolveReport};
use crate::precond::{solve, PreconditionerConfig};
use crate::problem::{generate, ContactState, ProblemSpec};
use crate::pt::PtVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Refine,
    StateFraction,
    Peclet,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Refine => "refine",
            SweepAxis::StateFraction => "state_fraction",
            SweepAxis::Peclet => "peclet",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "refine" => Ok(SweepAxis::Refine),
            "state_fraction" | "states" => Ok(SweepAxis::StateFraction),
            "peclet" => Ok(SweepAxis::Peclet),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis {other:?}"))),
        }
    }
}

/// Fractions of stick and slide cells; the rest are open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMix {
    pub stick: f64,
    pub slide: f64,
}

impl StateMix {
    pub fn open(&self) -> f64 {
        (1.0 - self.stick - self.slide).max(0.0)
    }
}

impl FromStr for StateMix {
    type Err = Error;

    /// `stick:0.5,slide:0.5` (missing states count as zero).
    fn from_str(s: &str) -> Result<Self> {
        let mut mix = StateMix { stick: 0.0, slide: 0.0 };
        let mut open = 0.0;
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (name, frac) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidConfig(format!("state entry {part:?} is not name:fraction")))?;
            let frac: f64 = frac
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad fraction in {part:?}")))?;
            if !(0.0..=1.0).contains(&frac) {
                return Err(Error::InvalidConfig(format!("fraction {frac} outside [0, 1]")));
            }
            match name.parse::<ContactState>()? {
                ContactState::Stick => mix.stick += frac,
                ContactState::Slide => mix.slide += frac,
                ContactState::Open => open += frac,
            }
        }
        let total = mix.stick + mix.slide + open;
        if total == 0.0 || total > 1.0 + 1e-9 {
            return Err(Error::InvalidConfig(format!("state fractions in {s:?} must sum to (0, 1]")));
        }
        Ok(mix)
    }
}

/// One generated solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dim: usize,
    pub refine: usize,
    pub states: StateMix,
    pub peclet: f64,
    pub seed: u64,
    pub precond: PreconditionerConfig,
    pub krylov: KrylovConfig,
}

impl RunSpec {
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let mut spec = ProblemSpec::with_fractions(self.dim, self.refine, self.states.stick, self.states.slide, self.seed)?;
        spec.peclet_scale = self.peclet;
        Ok(spec)
    }
}

/// A CSV row. Every row carries the configuration needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: String,
    pub exact_mode: bool,
    pub dim: Option<usize>,
    pub refine: Option<usize>,
    pub seed: Option<u64>,
    pub n: usize,
    pub nnz: usize,
    pub n_stick: usize,
    pub n_slide: usize,
    pub n_open: usize,
    pub peclet_scale: Option<f64>,
    pub thermal_stab: bool,
    pub flexible: bool,
    pub restart: usize,
    pub max_iters: usize,
    pub rtol: f64,
    pub amg_theta: f64,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub final_rres: Option<f64>,
    pub growth_ratio: Option<f64>,
    pub status: String,
    pub wall_ms_setup: Option<f64>,
    pub wall_ms_krylov: Option<f64>,
}

impl RunRecord {
    /// Record of a finished solve; `problem` carries (dim, refine, seed, peclet) for generated systems.
    #[allow(clippy::too_many_arguments)]
    pub fn from_report(
        precond: &PreconditionerConfig,
        krylov: &KrylovConfig,
        n: usize,
        nnz: usize,
        states: &[ContactState],
        problem: Option<(usize, usize, u64, f64)>,
        result: &Result<SolveReport>,
    ) -> Self {
        let count = |s| states.iter().filter(|&&x| x == s).count();
        let (iterations, converged, final_rres, status, setup, kry) = match result {
            Ok(r) => {
                let setup: f64 = r.timings_ms.iter().filter(|(k, _)| k.starts_with("setup")).map(|(_, v)| v).sum();
                (
                    Some(r.iterations),
                    r.converged,
                    Some(r.final_relative_residual),
                    if r.converged { "converged" } else { "not_converged" }.to_string(),
                    Some(setup),
                    r.timings_ms.get("krylov").copied(),
                )
            }
            Err(e) => (None, false, None, format!("error: {e}"), None, None),
        };
        let variant = if precond.exact_mode { PtVariant::ExactDense } else { precond.pt_variant };
        Self {
            variant: variant.to_string(),
            exact_mode: precond.exact_mode,
            dim: problem.map(|p| p.0),
            refine: problem.map(|p| p.1),
            seed: problem.map(|p| p.2),
            n,
            nnz,
            n_stick: count(ContactState::Stick),
            n_slide: count(ContactState::Slide),
            n_open: count(ContactState::Open),
            peclet_scale: problem.map(|p| p.3),
            thermal_stab: precond.thermal_stab,
            flexible: krylov.flexible,
            restart: krylov.restart,
            max_iters: krylov.max_iters,
            rtol: krylov.rtol,
            amg_theta: precond.amg_threshold,
            iterations,
            converged,
            final_rres,
            growth_ratio: None,
            status,
            wall_ms_setup: setup,
            wall_ms_krylov: kry,
        }
    }

    pub fn without_timings(mut self) -> Self {
        self.wall_ms_setup = None;
        self.wall_ms_krylov = None;
        self
    }
}

/// Generates and solves one problem. Failures are recorded, not returned.
pub fn run_generated(spec: &RunSpec) -> (RunRecord, Result<SolveReport>) {
    let problem = spec.problem_spec().and_then(|s| generate(&s));
    match problem {
        Ok(p) => {
            let result = solve(&p.matrix, &p.layout, &p.spec.material, &spec.precond, &spec.krylov, &p.rhs).map(|(_, r)| r);
            let rec = RunRecord::from_report(
                &spec.precond,
                &spec.krylov,
                p.layout.n(),
                p.matrix.nnz(),
                &p.spec.states,
                Some((spec.dim, spec.refine, spec.seed, spec.peclet)),
                &result,
            );
            (rec, result)
        }
        Err(e) => {
            let result = Err(e);
            let rec = RunRecord::from_report(
                &spec.precond,
                &spec.krylov,
                0,
                0,
                &[],
                Some((spec.dim, spec.refine, spec.seed, spec.peclet)),
                &result,
            );
            (rec, result)
        }
    }
}

/// The grid of a sweep: one spec per (value, variant), values outermost.
pub fn sweep_points(base: &RunSpec, axis: SweepAxis, values: &[f64], variants: &[PtVariant]) -> Result<Vec<RunSpec>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one axis value".into()));
    }
    if variants.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one variant".into()));
    }
    let mut out = Vec::with_capacity(values.len() * variants.len());
    for &v in values {
        for &variant in variants {
            let mut s = base.clone();
            s.precond.pt_variant = variant;
            match axis {
                SweepAxis::Refine => {
                    if v < 2.0 || v.fract() != 0.0 {
                        return Err(Error::InvalidConfig(format!("refinement must be an integer >= 2, got {v}")));
                    }
                    s.refine = v as usize;
                }
                SweepAxis::StateFraction => {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::InvalidConfig(format!("sliding fraction {v} outside [0, 1]")));
                    }
                    s.states = StateMix { stick: 1.0 - v, slide: v };
                }
                SweepAxis::Peclet => {
                    if !(v > 0.0) {
                        return Err(Error::InvalidConfig(format!("peclet scale must be positive, got {v}")));
                    }
                    s.peclet = v;
                }
            }
            out.push(s);
        }
    }
    Ok(out)
}

/// Runs every sweep point (in parallel when enabled) and fills the growth
/// ratio relative to the first point of each variant. Row order follows
/// [`sweep_points`].
pub fn sweep(base: &RunSpec, axis: SweepAxis, values: &[f64], variants: &[PtVariant]) -> Result<Vec<RunRecord>> {
    let points = sweep_points(base, axis, values, variants)?;
    #[cfg(feature = "parallel")]
    let mut records: Vec<RunRecord> = {
        use rayon::prelude::*;
        points.par_iter().map(|p| run_generated(p).0).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut records: Vec<RunRecord> = points.iter().map(|p| run_generated(p).0).collect();

    for (vi, _) in variants.iter().enumerate() {
        let base_iters = records[vi].iterations.filter(|&i| i > 0);
        for k in 0..values.len() {
            let r = &mut records[k * variants.len() + vi];
            r.growth_ratio = match (base_iters, r.iterations) {
                (Some(b), Some(i)) => Some(i as f64 / b as f64),
                _ => None,
            };
        }
    }
    Ok(records)
}

/// Writes records as CSV with a header.
pub fn write_csv(records: &[RunRecord], out: impl Write, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends to a CSV file, writing the header only when the file is new or empty.
pub fn append_csv(records: &[RunRecord], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    write_csv(records, f, fresh)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidConfig(format!("CSV serialization failed: {other:?}")),
    }
}
