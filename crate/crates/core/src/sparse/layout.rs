use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::problem::ContactState;

/// The six physics blocks of the Jacobian, in row/column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    /// Contact traction on fracture cells.
    Contact = 1,
    /// Displacement on matrix-fracture interfaces.
    InterfaceDisplacement = 2,
    /// Displacement in the porous matrix.
    Displacement = 3,
    /// Interface fluid mass and energy fluxes.
    InterfaceFlux = 4,
    Pressure = 5,
    Temperature = 6,
}

impl Block {
    pub const ALL: [Block; 6] = [
        Block::Contact,
        Block::InterfaceDisplacement,
        Block::Displacement,
        Block::InterfaceFlux,
        Block::Pressure,
        Block::Temperature,
    ];

    pub fn from_id(id: usize) -> Result<Block> {
        Block::ALL.get(id.wrapping_sub(1)).copied().ok_or(Error::InvalidBlock(id))
    }

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::Contact => "contact",
            Block::InterfaceDisplacement => "interface_displacement",
            Block::Displacement => "displacement",
            Block::InterfaceFlux => "interface_flux",
            Block::Pressure => "pressure",
            Block::Temperature => "temperature",
        }
    }

    fn from_name(name: &str) -> Option<Block> {
        Block::ALL.into_iter().find(|b| b.name() == name)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which subdomain a pressure/temperature cell belongs to. Drives the
/// per-cell fixed-stress coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Matrix,
    Fracture,
    Intersection,
}

/// Row partition of a 6x6-block Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    dim: usize,
    ranges: [Range<usize>; 6],
    states: Vec<ContactState>,
    interface_sides: usize,
    cell_kinds: Vec<CellKind>,
    fs_unit_scale: f64,
}

impl BlockLayout {
    /// Builds a layout from the six block lengths.
    pub fn new(dim: usize, lengths: [usize; 6], states: Vec<ContactState>) -> Result<Self> {
        let mut start = 0;
        let ranges = lengths.map(|len| {
            let r = start..start + len;
            start += len;
            r
        });
        let kinds = vec![CellKind::Matrix; lengths[4]];
        Self::from_parts(dim, ranges, states, 2, kinds, 1.0)
    }

    pub fn from_parts(
        dim: usize,
        ranges: [Range<usize>; 6],
        states: Vec<ContactState>,
        interface_sides: usize,
        cell_kinds: Vec<CellKind>,
        fs_unit_scale: f64,
    ) -> Result<Self> {
        let layout = Self {
            dim,
            ranges,
            states,
            interface_sides,
            cell_kinds,
            fs_unit_scale,
        };
        layout.validate()?;
        Ok(layout)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Layout(m));
        if self.dim != 2 && self.dim != 3 {
            return bad(format!("dim must be 2 or 3, got {}", self.dim));
        }
        let mut expect = 0;
        for (b, r) in Block::ALL.iter().zip(&self.ranges) {
            if r.start != expect || r.end < r.start {
                return bad(format!("block {b} range {r:?} is not contiguous after {expect}"));
            }
            expect = r.end;
        }
        for b in [Block::Contact, Block::InterfaceDisplacement, Block::Displacement] {
            if self.len(b) % self.dim != 0 {
                return bad(format!("block {b} length {} not divisible by cell size {}", self.len(b), self.dim));
            }
        }
        if self.interface_sides == 0 {
            return bad("interface_sides must be positive".into());
        }
        if self.len(Block::InterfaceDisplacement) != self.interface_sides * self.len(Block::Contact) {
            return bad(format!(
                "interface displacement block length {} must be {} x contact block length {}",
                self.len(Block::InterfaceDisplacement),
                self.interface_sides,
                self.len(Block::Contact)
            ));
        }
        if self.states.len() != self.fracture_cells() {
            return bad(format!(
                "{} contact states for {} fracture cells",
                self.states.len(),
                self.fracture_cells()
            ));
        }
        if self.cell_kinds.len() != self.len(Block::Pressure) {
            return bad(format!(
                "{} cell kinds for pressure block of length {}",
                self.cell_kinds.len(),
                self.len(Block::Pressure)
            ));
        }
        if !(self.fs_unit_scale.is_finite() && self.fs_unit_scale > 0.0) {
            return bad(format!("fs_unit_scale must be positive, got {}", self.fs_unit_scale));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Point-block size of blocks 1-3 (equals the spatial dimension).
    pub fn cell_block_size(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.ranges[5].end
    }

    pub fn range(&self, b: Block) -> Range<usize> {
        self.ranges[b.id() - 1].clone()
    }

    pub fn len(&self, b: Block) -> usize {
        self.range(b).len()
    }

    /// Union of consecutive blocks `first..=last`.
    pub fn span(&self, first: Block, last: Block) -> Range<usize> {
        self.range(first).start..self.range(last).end
    }

    /// Cell counts for the point-blocked blocks 1-3.
    pub fn cells_per_block(&self) -> [usize; 3] {
        [
            self.len(Block::Contact) / self.dim,
            self.len(Block::InterfaceDisplacement) / self.dim,
            self.len(Block::Displacement) / self.dim,
        ]
    }

    pub fn fracture_cells(&self) -> usize {
        self.len(Block::Contact) / self.dim
    }

    pub fn states(&self) -> &[ContactState] {
        &self.states
    }

    pub fn interface_sides(&self) -> usize {
        self.interface_sides
    }

    pub fn cell_kinds(&self) -> &[CellKind] {
        &self.cell_kinds
    }

    /// Unit conversion applied on top of `rho V / dt` when forming the
    /// fixed-stress diagonal (accounts for row/column scaling of the system).
    pub fn fs_unit_scale(&self) -> f64 {
        self.fs_unit_scale
    }

    pub fn with_fs_unit_scale(mut self, s: f64) -> Result<Self> {
        self.fs_unit_scale = s;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cell_kinds(mut self, kinds: Vec<CellKind>) -> Result<Self> {
        self.cell_kinds = kinds;
        self.validate()?;
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = LayoutFile {
            dim: self.dim,
            blocks: Block::ALL
                .iter()
                .map(|&b| BlockEntry {
                    name: b.name().to_string(),
                    start: self.range(b).start,
                    end: self.range(b).end,
                })
                .collect(),
            fracture_cells: self.fracture_cells(),
            states: self.states.clone(),
            interface_sides: Some(self.interface_sides),
            cell_kinds: Some(self.cell_kinds.clone()),
            fs_unit_scale: Some(self.fs_unit_scale),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayoutFile = serde_json::from_str(text)?;
        if file.blocks.len() != 6 {
            return Err(Error::Layout(format!("expected 6 blocks, found {}", file.blocks.len())));
        }
        let mut ranges: [Range<usize>; 6] = Default::default();
        for (k, (entry, expected)) in file.blocks.iter().zip(Block::ALL).enumerate() {
            match Block::from_name(&entry.name) {
                Some(b) if b == expected => {}
                _ => {
                    return Err(Error::Layout(format!(
                        "block #{k} is named {:?}, expected {:?}",
                        entry.name,
                        expected.name()
                    )))
                }
            }
            ranges[k] = entry.start..entry.end;
        }
        let n_p = ranges[4].len();
        let layout = Self::from_parts(
            file.dim,
            ranges,
            file.states,
            file.interface_sides.unwrap_or(2),
            file.cell_kinds.unwrap_or_else(|| vec![CellKind::Matrix; n_p]),
            file.fs_unit_scale.unwrap_or(1.0),
        )?;
        if layout.fracture_cells() != file.fracture_cells {
            return Err(Error::Layout(format!(
                "fracture_cells = {} disagrees with contact block ({} cells)",
                file.fracture_cells,
                layout.fracture_cells()
            )));
        }
        Ok(layout)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct BlockEntry {
    name: String,
    start: usize,
    end: usize,
}

#[derive(Serialize, Deserialize)]
struct LayoutFile {
    dim: usize,
    blocks: Vec<BlockEntry>,
    fracture_cells: usize,
    states: Vec<ContactState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interface_sides: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cell_kinds: Option<Vec<CellKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fs_unit_scale: Option<f64>,
}

/// Submatrix `A_ij` in local indices; block ids run 1..=6.
pub fn extract_block(a: &CsrMatrix, layout: &BlockLayout, i: usize, j: usize) -> Result<CsrMatrix> {
    let (bi, bj) = (Block::from_id(i)?, Block::from_id(j)?);
    if a.n_rows() != layout.n() || a.n_cols() != layout.n() {
        return Err(Error::DimensionMismatch {
            context: "extract_block",
            expected: layout.n(),
            got: a.n_rows(),
        });
    }
    Ok(a.submatrix(layout.range(bi), layout.range(bj)))
}

/// Shorthand for [`extract_block`] with typed block names.
pub fn block(a: &CsrMatrix, layout: &BlockLayout, bi: Block, bj: Block) -> CsrMatrix {
    a.submatrix(layout.range(bi), layout.range(bj))
}
