//! Classical Ruge-Stuben algebraic multigrid with direct interpolation and
//! Galerkin coarse operators.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::ilu::BlockIlu0;
use super::sor::Sor;
use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;
use crate::sparse::{CsrMatrix, DenseLu};

/// Relaxation used on every level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Smoother {
    /// Gauss-Seidel type sweeps; non-symmetric runs forward before and
    /// backward after the coarse correction.
    Sor { omega: f64, symmetric: bool },
    /// Point-block ILU(0) used as a stationary smoother.
    BlockIlu0 { block_size: usize },
}

/// How coarse grids are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coarsening {
    /// Plain scalar coarsening on all couplings.
    Scalar,
    /// Unknown-based: strength and interpolation only between unknowns that
    /// carry the same function id.
    Unknowns(Vec<usize>),
    /// Unknowns are interleaved per node in groups of `block_size`; grids are
    /// built from the first component and shared by all components.
    SharedComponent { block_size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmgConfig {
    pub strong_threshold: f64,
    pub smoother: Smoother,
    /// Pre- and post-smoothing sweeps.
    pub n_smooth: usize,
    pub coarsening: Coarsening,
    /// Levels at or below this size are solved directly.
    pub coarse_cap: usize,
    /// Largest level that may fall back to a dense solve.
    pub dense_cap: usize,
    pub max_levels: usize,
    /// Keep at most this many weights per interpolation row (largest
    /// magnitude, rescaled to the original row sum). `None` keeps all.
    #[serde(default)]
    pub max_interp_elements: Option<usize>,
}

impl Default for AmgConfig {
    fn default() -> Self {
        Self {
            strong_threshold: 0.7,
            smoother: Smoother::Sor {
                omega: 1.0,
                symmetric: true,
            },
            n_smooth: 2,
            coarsening: Coarsening::Scalar,
            coarse_cap: 64,
            dense_cap: 2000,
            max_levels: 25,
            max_interp_elements: None,
        }
    }
}

#[derive(Debug, Clone)]
enum LevelSmoother {
    Sor(Sor),
    Ilu(BlockIlu0),
}

impl LevelSmoother {
    fn new(a: &CsrMatrix, s: Smoother) -> Result<Self> {
        Ok(match s {
            Smoother::Sor { omega, symmetric } => LevelSmoother::Sor(Sor::new(a, omega, symmetric)?),
            Smoother::BlockIlu0 { block_size } => LevelSmoother::Ilu(BlockIlu0::factor(a, block_size)?),
        })
    }

    fn pre(&self, a: &CsrMatrix, x: &mut [f64], b: &[f64], work: &mut [f64]) -> Result<()> {
        match self {
            LevelSmoother::Sor(s) => s.sweep(a, x, b),
            LevelSmoother::Ilu(f) => ilu_step(f, a, x, b, work)?,
        }
        Ok(())
    }

    fn post(&self, a: &CsrMatrix, x: &mut [f64], b: &[f64], work: &mut [f64]) -> Result<()> {
        match self {
            LevelSmoother::Sor(s) if !s.symmetric => s.backward(a, x, b),
            _ => self.pre(a, x, b, work)?,
        }
        Ok(())
    }
}

fn ilu_step(f: &BlockIlu0, a: &CsrMatrix, x: &mut [f64], b: &[f64], work: &mut [f64]) -> Result<()> {
    let mut r = b.to_vec();
    a.sub_spmv_into(x, &mut r)?;
    f.solve_into(&r, work)?;
    for (xi, wi) in x.iter_mut().zip(work.iter()) {
        *xi += wi;
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Level {
    a: CsrMatrix,
    p: CsrMatrix,
    r: CsrMatrix,
    smoother: LevelSmoother,
}

#[derive(Debug, Clone)]
enum Coarse {
    Dense(DenseLu),
    SmoothOnly(LevelSmoother),
}

/// Per-level sizes and complexity, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyStats {
    pub level_sizes: Vec<usize>,
    pub level_nnz: Vec<usize>,
    pub operator_complexity: f64,
    pub coarse_solver: String,
    pub warnings: Vec<String>,
}

/// Setup product: one V-cycle per application.
#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarse_a: CsrMatrix,
    coarse: Coarse,
    config: AmgConfig,
    warnings: Vec<String>,
}

/// Strong connections `|a_ij| >= theta max_k |a_ik|` among unknowns accepted by `same`.
pub fn strength(a: &CsrMatrix, theta: f64, same: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    (0..a.n_rows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let max = cols
                .iter()
                .zip(vals)
                .filter(|&(&j, _)| j != i && same(i, j))
                .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
            if max == 0.0 {
                return Vec::new();
            }
            cols.iter()
                .zip(vals)
                .filter(|&(&j, &v)| j != i && same(i, j) && v != 0.0 && v.abs() >= theta * max)
                .map(|(&j, _)| j)
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    Undecided,
    C,
    F,
}

/// Ruge-Stuben C/F splitting: greedy first pass on the influence measure,
/// then every F point with strong connections but no strong C neighbour is
/// promoted to C.
pub fn rs_split(s: &[Vec<usize>]) -> Vec<bool> {
    let n = s.len();
    let mut st: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, si) in s.iter().enumerate() {
        for &j in si {
            st[j].push(i);
        }
    }
    let mut lambda: Vec<usize> = st.iter().map(Vec::len).collect();
    let mut mark = vec![Mark::Undecided; n];
    let mut heap = BinaryHeap::new();
    for i in 0..n {
        if s[i].is_empty() && st[i].is_empty() {
            mark[i] = Mark::F;
        } else {
            heap.push((lambda[i], Reverse(i)));
        }
    }
    while let Some((l, Reverse(i))) = heap.pop() {
        if mark[i] != Mark::Undecided || l != lambda[i] {
            continue;
        }
        if l == 0 {
            mark[i] = Mark::F;
            continue;
        }
        mark[i] = Mark::C;
        for &j in &st[i] {
            if mark[j] == Mark::Undecided {
                mark[j] = Mark::F;
                for &k in &s[j] {
                    if mark[k] == Mark::Undecided {
                        lambda[k] += 1;
                        heap.push((lambda[k], Reverse(k)));
                    }
                }
            }
        }
        for &j in &s[i] {
            if mark[j] == Mark::Undecided && lambda[j] > 0 {
                lambda[j] -= 1;
                heap.push((lambda[j], Reverse(j)));
            }
        }
    }
    for i in 0..n {
        if mark[i] == Mark::F && !s[i].is_empty() && s[i].iter().all(|&j| mark[j] != Mark::C) {
            mark[i] = Mark::C;
        }
    }
    mark.into_iter().map(|m| m == Mark::C).collect()
}

/// Direct interpolation with separate scaling of negative and positive couplings.
pub fn direct_interpolation(
    a: &CsrMatrix,
    s: &[Vec<usize>],
    is_c: &[bool],
    same: impl Fn(usize, usize) -> bool,
) -> CsrMatrix {
    let n = a.n_rows();
    let mut cidx = vec![usize::MAX; n];
    let mut nc = 0;
    for i in 0..n {
        if is_c[i] {
            cidx[i] = nc;
            nc += 1;
        }
    }
    let rows = (0..n)
        .map(|i| {
            if is_c[i] {
                return (vec![cidx[i]], vec![1.0]);
            }
            let ci: Vec<usize> = s[i].iter().copied().filter(|&j| is_c[j]).collect();
            if ci.is_empty() {
                return (Vec::new(), Vec::new());
            }
            let (cols, vals) = a.row(i);
            let (mut diag, mut neg, mut pos, mut neg_c, mut pos_c) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    diag += v;
                } else if same(i, j) {
                    let in_c = ci.binary_search(&j).is_ok();
                    if v < 0.0 {
                        neg += v;
                        if in_c {
                            neg_c += v;
                        }
                    } else {
                        pos += v;
                        if in_c {
                            pos_c += v;
                        }
                    }
                }
            }
            let alpha = if neg_c != 0.0 { neg / neg_c } else { 0.0 };
            let beta = if pos_c != 0.0 { pos / pos_c } else { 0.0 };
            if neg_c == 0.0 {
                diag += neg;
            }
            if pos_c == 0.0 {
                diag += pos;
            }
            let mut out_c = Vec::with_capacity(ci.len());
            let mut out_v = Vec::with_capacity(ci.len());
            for &j in &ci {
                let v = a.get(i, j);
                let w = if v < 0.0 { -alpha * v / diag } else { -beta * v / diag };
                if w != 0.0 && w.is_finite() {
                    out_c.push(cidx[j]);
                    out_v.push(w);
                }
            }
            (out_c, out_v)
        })
        .collect();
    CsrMatrix::from_sorted_rows(n, nc, rows)
}

/// Drops all but the `k` largest-magnitude weights of each row of `p` and
/// rescales the survivors so every row sum is unchanged.
pub fn truncate_interpolation(p: &CsrMatrix, k: usize) -> CsrMatrix {
    let rows = (0..p.n_rows())
        .map(|i| {
            let (cols, vals) = p.row(i);
            if cols.len() <= k || k == 0 {
                return (cols.to_vec(), vals.to_vec());
            }
            let mut order: Vec<usize> = (0..cols.len()).collect();
            order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()).then(a.cmp(&b)));
            let mut keep = order[..k].to_vec();
            keep.sort_unstable();
            let total: f64 = vals.iter().sum();
            let kept: f64 = keep.iter().map(|&t| vals[t]).sum();
            let f = if kept != 0.0 { total / kept } else { 1.0 };
            (keep.iter().map(|&t| cols[t]).collect(), keep.iter().map(|&t| vals[t] * f).collect())
        })
        .collect();
    CsrMatrix::from_sorted_rows(p.n_rows(), p.n_cols(), rows)
}

/// `P kron I_b`.
fn expand_interpolation(p0: &CsrMatrix, b: usize) -> CsrMatrix {
    let rows = (0..p0.n_rows() * b)
        .map(|i| {
            let (cols, vals) = p0.row(i / b);
            (cols.iter().map(|&c| c * b + i % b).collect(), vals.to_vec())
        })
        .collect();
    CsrMatrix::from_sorted_rows(p0.n_rows() * b, p0.n_cols() * b, rows)
}

/// Interpolation for one level; returns `P` and the function ids on the coarse grid.
fn interpolation(a: &CsrMatrix, config: &AmgConfig, mode: &Coarsening) -> Result<(CsrMatrix, Coarsening)> {
    let theta = config.strong_threshold;
    let trunc = |p: CsrMatrix| match config.max_interp_elements {
        Some(k) => truncate_interpolation(&p, k),
        None => p,
    };
    Ok(match mode {
        Coarsening::Scalar => {
            let s = strength(a, theta, |_, _| true);
            let c = rs_split(&s);
            (trunc(direct_interpolation(a, &s, &c, |_, _| true)), Coarsening::Scalar)
        }
        Coarsening::Unknowns(ids) => {
            check_len("AMG function ids", a.n_rows(), ids.len())?;
            let same = |i: usize, j: usize| ids[i] == ids[j];
            let s = strength(a, theta, same);
            let c = rs_split(&s);
            let p = trunc(direct_interpolation(a, &s, &c, same));
            let coarse_ids = ids.iter().zip(&c).filter(|(_, &c)| c).map(|(&id, _)| id).collect();
            (p, Coarsening::Unknowns(coarse_ids))
        }
        Coarsening::SharedComponent { block_size } => {
            let b = *block_size;
            if b == 0 || a.n_rows() % b != 0 {
                return Err(Error::Layout(format!(
                    "AMG: size {} not divisible by component count {b}",
                    a.n_rows()
                )));
            }
            let idx: Vec<usize> = (0..a.n_rows() / b).map(|k| k * b).collect();
            let a0 = a.select(&idx, &idx);
            let s = strength(&a0, theta, |_, _| true);
            let c = rs_split(&s);
            let p0 = trunc(direct_interpolation(&a0, &s, &c, |_, _| true));
            (expand_interpolation(&p0, b), mode.clone())
        }
    })
}

impl AmgHierarchy {
    pub fn setup(a: &CsrMatrix, config: &AmgConfig) -> Result<Self> {
        check_len("AMG (square)", a.n_rows(), a.n_cols())?;
        if !(config.strong_threshold > 0.0 && config.strong_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "strong threshold must lie in (0, 1], got {}",
                config.strong_threshold
            )));
        }
        let mut levels = Vec::new();
        let mut warnings = Vec::new();
        let mut current = a.clone();
        let mut mode = config.coarsening.clone();
        let coarse = loop {
            let n = current.n_rows();
            if n <= config.coarse_cap {
                break Coarse::Dense(DenseLu::factor(&current.to_dense())?);
            }
            let (p, next_mode) = if levels.len() + 1 >= config.max_levels {
                (CsrMatrix::zeros(n, n), mode.clone())
            } else {
                interpolation(&current, config, &mode)?
            };
            let nc = p.n_cols();
            if nc == 0 || nc >= n {
                if n <= config.dense_cap {
                    break Coarse::Dense(DenseLu::factor(&current.to_dense())?);
                }
                let msg = format!("coarsening stagnated at level {} (n = {n}); smoothing only", levels.len());
                log::warn!("{msg}");
                warnings.push(msg);
                break Coarse::SmoothOnly(LevelSmoother::new(&current, config.smoother)?);
            }
            let r = p.transpose();
            let ac = r.matmul(&current.matmul(&p)?)?;
            let smoother = LevelSmoother::new(&current, config.smoother)?;
            levels.push(Level {
                a: std::mem::replace(&mut current, ac),
                p,
                r,
                smoother,
            });
            mode = next_mode;
        };
        Ok(Self {
            levels,
            coarse_a: current,
            coarse,
            config: config.clone(),
            warnings,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    /// Operator of level `k` (0 is the finest).
    pub fn level_matrix(&self, k: usize) -> &CsrMatrix {
        self.levels.get(k).map(|l| &l.a).unwrap_or(&self.coarse_a)
    }

    pub fn interpolation(&self, k: usize) -> Option<&CsrMatrix> {
        self.levels.get(k).map(|l| &l.p)
    }

    pub fn restriction(&self, k: usize) -> Option<&CsrMatrix> {
        self.levels.get(k).map(|l| &l.r)
    }

    pub fn config(&self) -> &AmgConfig {
        &self.config
    }

    pub fn stats(&self) -> HierarchyStats {
        let mats: Vec<&CsrMatrix> = (0..self.n_levels()).map(|k| self.level_matrix(k)).collect();
        let nnz0 = mats[0].nnz().max(1) as f64;
        HierarchyStats {
            level_sizes: mats.iter().map(|m| m.n_rows()).collect(),
            level_nnz: mats.iter().map(|m| m.nnz()).collect(),
            operator_complexity: mats.iter().map(|m| m.nnz() as f64).sum::<f64>() / nnz0,
            coarse_solver: match self.coarse {
                Coarse::Dense(_) => "dense".into(),
                Coarse::SmoothOnly(_) => "smoother".into(),
            },
            warnings: self.warnings.clone(),
        }
    }

    fn cycle(&self, k: usize, b: &[f64], x: &mut [f64]) -> Result<()> {
        let n_smooth = self.config.n_smooth;
        let Some(level) = self.levels.get(k) else {
            return match &self.coarse {
                Coarse::Dense(lu) => lu.solve_into(b, x),
                Coarse::SmoothOnly(s) => {
                    x.iter_mut().for_each(|v| *v = 0.0);
                    let mut work = vec![0.0; x.len()];
                    for _ in 0..n_smooth.max(1) {
                        s.pre(&self.coarse_a, x, b, &mut work)?;
                        s.post(&self.coarse_a, x, b, &mut work)?;
                    }
                    Ok(())
                }
            };
        };
        let a = &level.a;
        let mut work = vec![0.0; x.len()];
        x.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..n_smooth {
            level.smoother.pre(a, x, b, &mut work)?;
        }
        let mut r = b.to_vec();
        a.sub_spmv_into(x, &mut r)?;
        let rc = level.r.spmv(&r)?;
        let mut ec = vec![0.0; rc.len()];
        self.cycle(k + 1, &rc, &mut ec)?;
        let corr = level.p.spmv(&ec)?;
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi += ci;
        }
        for _ in 0..n_smooth {
            level.smoother.post(a, x, b, &mut work)?;
        }
        Ok(())
    }

    /// One V-cycle from a zero initial guess.
    pub fn vcycle(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; r.len()];
        self.apply_into(r, &mut x)?;
        Ok(x)
    }
}

impl LinearOperator for AmgHierarchy {
    fn dim(&self) -> usize {
        self.level_matrix(0).n_rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len("AMG rhs", self.dim(), x.len())?;
        check_len("AMG output", self.dim(), y.len())?;
        self.cycle(0, x, y)
    }
}
