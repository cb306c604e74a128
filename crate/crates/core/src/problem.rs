//! Synthetic 6x6-block Jacobians for desk-scale experiments.
//!
//! The generator assembles structural surrogates on a Cartesian grid with one
//! planar fracture: graph Laplacians for elasticity, Darcy flow and heat
//! conduction, first-order upwind convection, and per-cell contact blocks
//! whose rank follows the contact state. Everything is emitted in scaled
//! units where the matrix-cell fixed-stress increment `rho V / dt * L_pm`
//! equals one; the conversion factor is carried in the layout
//! (`fs_unit_scale`).
//!
//! Block ordering: contact traction, interface displacement (two sides per
//! fracture cell), matrix displacement, interface fluxes (mass, advective
//! energy, diffusive energy per interface), pressure, temperature. Pressure
//! and temperature hold the matrix cells followed by the fracture cells.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::schur::{fixed_stress_frac, fixed_stress_pm, inverse_biot_modulus};
use crate::sparse::{BlockLayout, CellKind, CsrMatrix};

/// Contact regime of one fracture cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactState {
    Stick,
    Slide,
    Open,
}

impl fmt::Display for ContactState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContactState::Stick => "stick",
            ContactState::Slide => "slide",
            ContactState::Open => "open",
        })
    }
}

impl FromStr for ContactState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stick" => Ok(ContactState::Stick),
            "slide" => Ok(ContactState::Slide),
            "open" => Ok(ContactState::Open),
            other => Err(Error::InvalidConfig(format!("unknown contact state {other:?}"))),
        }
    }
}

/// Physical constants. Defaults are the reference material of the
/// thermo-poromechanics benchmark (granite-like rock saturated with water).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Lamé's first parameter [Pa].
    pub lame_lambda: f64,
    /// Shear modulus [Pa].
    pub shear_modulus: f64,
    pub biot: f64,
    /// Fluid compressibility [1/Pa].
    pub compressibility: f64,
    pub porosity_ref: f64,
    /// Volumetric solid thermal expansion [1/K].
    pub solid_thermal_expansion: f64,
    /// Reference fluid density [kg/m^3].
    pub fluid_density: f64,
    /// Time step [s].
    pub dt: f64,
    /// Representative cell volume [m^3].
    pub cell_volume: f64,
    /// Ambient spatial dimension.
    pub dim: usize,
    /// Normal displacement jump across the fracture [m].
    pub normal_jump: f64,
    pub fracture_porosity: f64,
    /// Unit-less multiplier of the thermal stabilization.
    pub thermal_const: f64,
    pub friction: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            lame_lambda: 1.2e10,
            shear_modulus: 1.2e10,
            biot: 0.47,
            compressibility: 4.559e-10,
            porosity_ref: 1.3e-2,
            solid_thermal_expansion: 9.66e-6,
            fluid_density: 998.2,
            dt: 1.0,
            cell_volume: 1.0,
            dim: 2,
            normal_jump: 1e-3,
            fracture_porosity: 1.0,
            thermal_const: 1.0,
            friction: 0.577,
        }
    }
}

impl MaterialParams {
    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("material: {m}")));
        if !(self.lame_lambda > 0.0 && self.shear_modulus > 0.0) {
            return bad("Lamé parameters must be positive");
        }
        if !(self.biot > 0.0 && self.biot <= 1.0) {
            return bad("Biot coefficient must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.porosity_ref) {
            return bad("reference porosity must lie in [0, 1)");
        }
        if !(self.compressibility > 0.0) {
            return bad("fluid compressibility must be positive");
        }
        if !(self.dt > 0.0 && self.cell_volume > 0.0 && self.fluid_density > 0.0) {
            return bad("dt, cell volume and density must be positive");
        }
        if self.dim != 2 && self.dim != 3 {
            return bad("dim must be 2 or 3");
        }
        if !(self.normal_jump >= 0.0) {
            return bad("normal jump must be non-negative");
        }
        if !(self.fracture_porosity > 0.0 && self.solid_thermal_expansion >= 0.0 && self.thermal_const >= 0.0) {
            return bad("fracture porosity must be positive, thermal constants non-negative");
        }
        Ok(())
    }

    /// Drained bulk-like modulus `2G/D + Lambda` used by the fixed-stress terms.
    pub fn drained_modulus(&self) -> f64 {
        2.0 * self.shear_modulus / self.dim as f64 + self.lame_lambda
    }

    /// `rho V / dt`.
    pub fn mass_rate_scale(&self) -> f64 {
        self.fluid_density * self.cell_volume / self.dt
    }
}

/// Inputs of [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Grid cells per side.
    pub refinement: usize,
    pub n_fracture_cells: usize,
    pub states: Vec<ContactState>,
    pub material: MaterialParams,
    /// Ratio of convective to diffusive magnitude in the energy block.
    pub peclet_scale: f64,
    pub seed: u64,
}

impl ProblemSpec {
    /// Default fracture size (half the grid width in each in-plane direction),
    /// every cell in `state`.
    pub fn uniform(dim: usize, refinement: usize, state: ContactState) -> Self {
        let half = (refinement / 2).max(1);
        let nf = if dim == 3 { half * half } else { half };
        Self {
            refinement,
            n_fracture_cells: nf,
            states: vec![state; nf],
            material: MaterialParams::with_dim(dim),
            peclet_scale: 1.0,
            seed: 0,
        }
    }

    /// Default fracture size with states drawn to match `stick`/`slide`
    /// fractions (the remainder is open). Counts are rounded and the
    /// placement is shuffled with `seed`.
    pub fn with_fractions(dim: usize, refinement: usize, stick: f64, slide: f64, seed: u64) -> Result<Self> {
        let mut spec = Self::uniform(dim, refinement, ContactState::Open);
        spec.seed = seed;
        spec.states = assign_states(spec.n_fracture_cells, stick, slide, seed)?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.material.dim
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.refinement < 2 {
            return bad(format!("refinement must be at least 2, got {}", self.refinement));
        }
        if self.n_fracture_cells == 0 {
            return bad(if self.states.is_empty() {
                "at least one fracture cell is required".into()
            } else {
                format!("zero fracture cells but {} contact states given", self.states.len())
            });
        }
        let plane = self.refinement.pow(self.dim() as u32 - 1);
        if self.n_fracture_cells > plane {
            return bad(format!(
                "{} fracture cells do not fit a fracture plane of {plane} faces",
                self.n_fracture_cells
            ));
        }
        check_len("contact states", self.n_fracture_cells, self.states.len())?;
        if !(self.peclet_scale > 0.0 && self.peclet_scale.is_finite()) {
            return bad(format!("peclet_scale must be positive, got {}", self.peclet_scale));
        }
        Ok(())
    }
}

/// Draws `round(stick n)` stick and `round(slide n)` slide cells, rest open.
pub fn assign_states(n: usize, stick: f64, slide: f64, seed: u64) -> Result<Vec<ContactState>> {
    if !(stick >= 0.0 && slide >= 0.0 && stick + slide <= 1.0 + 1e-12) {
        return Err(Error::InvalidConfig(format!(
            "state fractions stick={stick}, slide={slide} must be non-negative and sum to at most 1"
        )));
    }
    let n_stick = ((stick * n as f64).round() as usize).min(n);
    let n_slide = ((slide * n as f64).round() as usize).min(n - n_stick);
    let mut states = vec![ContactState::Open; n];
    states[..n_stick].fill(ContactState::Stick);
    states[n_stick..n_stick + n_slide].fill(ContactState::Slide);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_57a7e);
    states.shuffle(&mut rng);
    Ok(states)
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub matrix: CsrMatrix,
    pub layout: BlockLayout,
    pub rhs: Vec<f64>,
    /// The manufactured solution behind `rhs`.
    pub x_true: Vec<f64>,
    pub spec: ProblemSpec,
}

/// Dimensionless modelling constants of the surrogate. The contact coupling
/// strength relative to the contact block is not derivable from material
/// data; these values are a choice and are echoed in every solve report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurrogateConstants {
    pub interface_spring: f64,
    pub interface_tangential: f64,
    pub interface_perturbation: f64,
    pub displacement_cross_coupling: f64,
    pub traction_to_force: f64,
    pub jump_to_contact: f64,
    pub matrix_transmissibility: f64,
    pub fracture_transmissibility: f64,
    pub interface_transmissibility: f64,
    pub thermal_accumulation: f64,
    pub fracture_thermal_accumulation: f64,
    pub conductivity: f64,
    pub interface_conductivity: f64,
    pub advective_enthalpy: f64,
    pub pressure_thermal_coupling: f64,
    pub convective_pressure_coupling: f64,
}

pub const SURROGATE: SurrogateConstants = SurrogateConstants {
    interface_spring: 2.0,
    interface_tangential: 0.5,
    interface_perturbation: 0.1,
    displacement_cross_coupling: 0.2,
    traction_to_force: 1.0,
    jump_to_contact: 1.0,
    matrix_transmissibility: 10.0,
    fracture_transmissibility: 100.0,
    interface_transmissibility: 10.0,
    thermal_accumulation: 1.0,
    fracture_thermal_accumulation: 0.1,
    conductivity: 1.0,
    interface_conductivity: 1.0,
    advective_enthalpy: 0.5,
    pressure_thermal_coupling: 0.05,
    convective_pressure_coupling: 0.01,
};

struct Grid {
    n: usize,
    dim: usize,
    /// In-plane positions of fracture faces (coordinates along axes 0..dim-1).
    frac_pos: Vec<[usize; 2]>,
    /// Plane index `m`: fracture lies between layers m-1 and m along the last axis.
    plane: usize,
}

impl Grid {
    fn new(n: usize, dim: usize, nf: usize) -> Self {
        let plane = n / 2;
        let frac_pos = if dim == 2 {
            let x0 = (n - nf) / 2;
            (0..nf).map(|k| [x0 + k, 0]).collect()
        } else {
            let side = (nf as f64).sqrt().ceil() as usize;
            let side = side.min(n);
            let x0 = (n - side) / 2;
            let y0 = (n - nf.div_ceil(side)) / 2;
            (0..nf).map(|k| [x0 + k % side, y0 + k / side]).collect()
        };
        Self { n, dim, frac_pos, plane }
    }

    fn n_cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn coords(&self, c: usize) -> [usize; 3] {
        let n = self.n;
        [c % n, (c / n) % n, c / (n * n)]
    }

    fn index(&self, x: [usize; 3]) -> usize {
        x[0] + self.n * (x[1] + self.n * x[2])
    }

    fn neighbor(&self, c: usize, axis: usize, up: bool) -> Option<usize> {
        let mut x = self.coords(c);
        if up {
            if x[axis] + 1 >= self.n {
                return None;
            }
            x[axis] += 1;
        } else {
            if x[axis] == 0 {
                return None;
            }
            x[axis] -= 1;
        }
        Some(self.index(x))
    }

    /// Cells on the two sides of fracture face `f`: (below, above).
    fn sides(&self, f: usize) -> (usize, usize) {
        let p = self.frac_pos[f];
        let mut below = [p[0], p[1], 0];
        below[self.dim - 1] = self.plane - 1;
        if self.dim == 2 {
            below[1] = self.plane - 1;
        }
        let mut above = below;
        above[self.dim - 1] = self.plane;
        (self.index(below), self.index(above))
    }

    fn is_cut(&self, c: usize, d: usize, cut: &std::collections::HashSet<(usize, usize)>) -> bool {
        cut.contains(&(c.min(d), c.max(d)))
    }

    fn fracture_neighbors(&self) -> Vec<Vec<usize>> {
        let mut map = std::collections::HashMap::new();
        for (f, p) in self.frac_pos.iter().enumerate() {
            map.insert(*p, f);
        }
        self.frac_pos
            .iter()
            .map(|p| {
                let mut nb = Vec::new();
                let axes = if self.dim == 3 { 2 } else { 1 };
                for a in 0..axes {
                    for delta in [-1i64, 1] {
                        let mut q = *p;
                        let v = q[a] as i64 + delta;
                        if v < 0 {
                            continue;
                        }
                        q[a] = v as usize;
                        if let Some(&g) = map.get(&q) {
                            nb.push(g);
                        }
                    }
                }
                nb.sort_unstable();
                nb
            })
            .collect()
    }
}

struct Triplets {
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    fn push(&mut self, r: usize, c: usize, v: f64) {
        self.entries.push((r, c, v));
    }
}

/// Builds the block Jacobian, layout and a manufactured right-hand side.
pub fn generate(spec: &ProblemSpec) -> Result<GeneratedProblem> {
    spec.validate()?;
    let m = &spec.material;
    let k = &SURROGATE;
    let dim = m.dim;
    let n = spec.refinement;
    let nf = spec.n_fracture_cells;
    let pe = spec.peclet_scale;
    let grid = Grid::new(n, dim, nf);
    let nc = grid.n_cells();
    let n_if = 2 * nf;
    let normal = dim - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let lengths = [nf * dim, n_if * dim, nc * dim, n_if * 3, nc + nf, nc + nf];
    let mut off = [0usize; 7];
    for b in 0..6 {
        off[b + 1] = off[b] + lengths[b];
    }
    let n_total = off[6];
    let lam = |f: usize, d: usize| off[0] + f * dim + d;
    let uj = |i: usize, d: usize| off[1] + i * dim + d;
    let ui = |c: usize, d: usize| off[2] + c * dim + d;
    let xi = |i: usize, q: usize| off[3] + i * 3 + q;
    let pr = |c: usize| off[4] + c;
    let te = |c: usize| off[5] + c;

    // scaled coefficients
    let l_pm = fixed_stress_pm(m);
    let storage = (m.porosity_ref * m.compressibility + inverse_biot_modulus(m)) / l_pm;
    let aperture = m.normal_jump.max(1e-4);
    let h = m.cell_volume.powf(1.0 / dim as f64);
    let frac_storage = aperture / h * m.fracture_porosity * m.compressibility / l_pm;
    let frac_ratio = (fixed_stress_frac(m) / l_pm).max(1e-6);
    let pressure_force = 1.0;
    let aperture_rate = k.interface_spring * frac_ratio;
    let thermal_ratio = m.solid_thermal_expansion / m.biot;

    let mut t = Triplets { entries: Vec::new() };

    let mut cut = std::collections::HashSet::new();
    let mut side_cells = Vec::with_capacity(nf);
    for f in 0..nf {
        let (a, b) = grid.sides(f);
        cut.insert((a.min(b), a.max(b)));
        side_cells.push((a, b));
    }
    // interface 2f sits on the lower side, 2f+1 on the upper side
    let if_cell = |i: usize| if i % 2 == 0 { side_cells[i / 2].0 } else { side_cells[i / 2].1 };

    // --- block 3: matrix elasticity (Dirichlet vector Laplacian + intra-cell coupling)
    let mut spring_count = vec![0usize; nc];
    for &(a, b) in &side_cells {
        spring_count[a] += 1;
        spring_count[b] += 1;
    }
    for c in 0..nc {
        let mut diag = 0.0;
        let mut links = Vec::new();
        for axis in 0..dim {
            for up in [false, true] {
                match grid.neighbor(c, axis, up) {
                    Some(d) if grid.is_cut(c, d, &cut) => {}
                    Some(d) => {
                        diag += 1.0;
                        links.push(d);
                    }
                    None => diag += 1.0,
                }
            }
        }
        diag += k.interface_spring * spring_count[c] as f64;
        let cross = k.displacement_cross_coupling * rng.gen_range(-1.0..1.0);
        for d in 0..dim {
            t.push(ui(c, d), ui(c, d), diag);
            for &nb in &links {
                t.push(ui(c, d), ui(nb, d), -1.0);
            }
            let e = (d + 1) % dim;
            if dim == 2 && d == 1 {
                continue;
            }
            // [[|c|, c], [c, |c|]] per component pair keeps the block SPD
            t.push(ui(c, d), ui(c, e), cross);
            t.push(ui(c, e), ui(c, d), cross);
            t.push(ui(c, d), ui(c, d), cross.abs());
            t.push(ui(c, e), ui(c, e), cross.abs());
        }
    }

    // --- block 2: interface displacement
    let frac_nb = grid.fracture_neighbors();
    for i in 0..n_if {
        let f = i / 2;
        let nbs = &frac_nb[f];
        let base = k.interface_spring + k.interface_tangential * nbs.len() as f64;
        let mut blk = vec![0.0; dim * dim];
        for d in 0..dim {
            blk[d * dim + d] = base * (1.0 + k.interface_perturbation * rng.gen_range(-1.0..1.0));
        }
        for d in 0..dim {
            for e in d + 1..dim {
                let v = k.interface_perturbation * k.interface_spring * rng.gen_range(-1.0..1.0);
                blk[d * dim + e] = v;
                blk[e * dim + d] = v;
            }
        }
        for d in 0..dim {
            for e in 0..dim {
                if blk[d * dim + e] != 0.0 {
                    t.push(uj(i, d), uj(i, e), blk[d * dim + e]);
                }
            }
            for &g in nbs {
                t.push(uj(i, d), uj(2 * g + i % 2, d), -k.interface_tangential);
            }
            let c = if_cell(i);
            t.push(uj(i, d), ui(c, d), -k.interface_spring);
            t.push(ui(c, d), uj(i, d), -k.interface_spring);
        }
    }

    // --- blocks 1/2 coupling and contact
    for f in 0..nf {
        let (lo, hi) = (2 * f, 2 * f + 1);
        for d in 0..dim {
            t.push(uj(lo, d), lam(f, d), -k.traction_to_force);
            t.push(uj(hi, d), lam(f, d), k.traction_to_force);
        }
        match spec.states[f] {
            ContactState::Open => {
                for d in 0..dim {
                    t.push(lam(f, d), lam(f, d), 1.0);
                }
            }
            ContactState::Stick => {
                for d in 0..dim {
                    t.push(lam(f, d), uj(lo, d), -k.jump_to_contact);
                    t.push(lam(f, d), uj(hi, d), k.jump_to_contact);
                }
            }
            ContactState::Slide => {
                t.push(lam(f, normal), uj(lo, normal), -k.jump_to_contact);
                t.push(lam(f, normal), uj(hi, normal), k.jump_to_contact);
                let weight = rng.gen_range(0.5..1.5);
                let slip: Vec<f64> = if dim == 2 {
                    vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }]
                } else {
                    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    vec![phi.cos(), phi.sin()]
                };
                // tangential rows: lambda_t - F tau lambda_n
                for (d, tau) in slip.iter().enumerate() {
                    t.push(lam(f, d), lam(f, d), weight);
                    t.push(lam(f, d), lam(f, normal), -weight * m.friction * tau);
                }
            }
        }
    }

    // --- mechanics / flow / heat couplings through the cell gradient
    for c in 0..nc {
        for axis in 0..dim {
            for (up, sign) in [(true, 0.5), (false, -0.5)] {
                if let Some(d) = grid.neighbor(c, axis, up) {
                    if grid.is_cut(c, d, &cut) {
                        continue;
                    }
                    t.push(ui(c, axis), pr(d), sign);
                    t.push(pr(d), ui(c, axis), -sign);
                    t.push(ui(c, axis), te(d), thermal_ratio * sign);
                    t.push(te(d), ui(c, axis), -thermal_ratio * sign);
                }
            }
        }
    }
    for f in 0..nf {
        let (lo, hi) = (2 * f, 2 * f + 1);
        let pf = pr(nc + f);
        let tf = te(nc + f);
        t.push(uj(lo, normal), pf, pressure_force);
        t.push(uj(hi, normal), pf, -pressure_force);
        t.push(pf, uj(lo, normal), -aperture_rate);
        t.push(pf, uj(hi, normal), aperture_rate);
        t.push(uj(lo, normal), tf, thermal_ratio * pressure_force);
        t.push(uj(hi, normal), tf, -thermal_ratio * pressure_force);
        t.push(tf, uj(lo, normal), -thermal_ratio * aperture_rate);
        t.push(tf, uj(hi, normal), thermal_ratio * aperture_rate);
    }

    // --- block 5/6: flow and heat in matrix cells
    for c in 0..nc {
        let mut diff_diag = 0.0;
        let mut diff_links = Vec::new();
        let mut conv_diag = 0.0;
        let mut upstream = Vec::new();
        for axis in 0..dim {
            for up in [false, true] {
                match grid.neighbor(c, axis, up) {
                    Some(d) if grid.is_cut(c, d, &cut) => {}
                    Some(d) => {
                        diff_diag += 1.0;
                        diff_links.push(d);
                    }
                    None => diff_diag += 1.0,
                }
            }
            // velocity points towards +axis: inflow from the lower neighbour
            conv_diag += 1.0;
            if let Some(d) = grid.neighbor(c, axis, false) {
                upstream.push(d);
            }
        }
        t.push(pr(c), pr(c), storage + k.matrix_transmissibility * diff_diag);
        t.push(te(c), te(c), k.thermal_accumulation + k.conductivity * diff_diag + pe * k.conductivity * conv_diag);
        for &d in &diff_links {
            t.push(pr(c), pr(d), -k.matrix_transmissibility);
            t.push(te(c), te(d), -k.conductivity);
        }
        let cp = k.convective_pressure_coupling * pe;
        t.push(te(c), pr(c), cp * upstream.len() as f64);
        for &d in &upstream {
            t.push(te(c), te(d), -pe * k.conductivity);
            t.push(te(c), pr(d), -cp);
        }
        t.push(pr(c), te(c), -k.pressure_thermal_coupling);
    }

    // --- fracture cells: flow and heat along the fracture
    for f in 0..nf {
        let (pf, tf) = (pr(nc + f), te(nc + f));
        let nbs = &frac_nb[f];
        t.push(pf, pf, frac_storage + k.fracture_transmissibility * nbs.len() as f64);
        t.push(tf, tf, k.fracture_thermal_accumulation + k.conductivity * nbs.len() as f64 + pe * k.conductivity);
        for &g in nbs {
            t.push(pf, pr(nc + g), -k.fracture_transmissibility);
            t.push(tf, te(nc + g), -k.conductivity);
        }
        // along-fracture flow towards +x
        if let Some(&g) = nbs.iter().find(|&&g| grid.frac_pos[g][0] + 1 == grid.frac_pos[f][0] && grid.frac_pos[g][1] == grid.frac_pos[f][1]) {
            t.push(tf, te(nc + g), -pe * k.conductivity);
        }
        t.push(pf, tf, -k.pressure_thermal_coupling);
    }

    // --- block 4: interface fluxes (mass, advective energy, diffusive energy)
    for i in 0..n_if {
        let c = if_cell(i);
        let f = i / 2;
        let (pf, tf) = (pr(nc + f), te(nc + f));
        let (v, w, q) = (xi(i, 0), xi(i, 1), xi(i, 2));
        t.push(v, v, 1.0 / k.interface_transmissibility);
        t.push(v, pr(c), -1.0);
        t.push(v, pf, 1.0);
        t.push(w, w, 1.0);
        t.push(w, v, -k.advective_enthalpy);
        t.push(w, te(c), -pe * k.advective_enthalpy);
        t.push(q, q, 1.0 / k.interface_conductivity);
        t.push(q, te(c), -1.0);
        t.push(q, tf, 1.0);

        t.push(pr(c), v, 1.0);
        t.push(pf, v, -1.0);
        for flux in [w, q] {
            t.push(te(c), flux, 1.0);
            t.push(tf, flux, -1.0);
        }
    }

    let matrix = CsrMatrix::from_triplets(&t.entries, n_total, n_total)?;

    let mut kinds = vec![CellKind::Matrix; nc];
    kinds.extend(std::iter::repeat(CellKind::Fracture).take(nf));
    let layout = BlockLayout::new(dim, lengths, spec.states.clone())?
        .with_cell_kinds(kinds)?
        .with_fs_unit_scale(1.0 / (m.mass_rate_scale() * l_pm))?;

    let x_true = unit_random_vector(n_total, spec.seed);
    let rhs = matrix.spmv(&x_true)?;
    Ok(GeneratedProblem {
        matrix,
        layout,
        rhs,
        x_true,
        spec: spec.clone(),
    })
}

/// Pseudo-random vector with unit Euclidean norm.
pub fn unit_random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    x
}

/// `J x_true`.
pub fn reference_rhs(problem: &GeneratedProblem, x_true: &[f64]) -> Result<Vec<f64>> {
    problem.matrix.spmv(x_true)
}
