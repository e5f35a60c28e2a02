// SPDX-License-Identifier: Apache-2.0

//! Placements and the placement file format.
//!
//! ```text
//! # footprint <width_um> <height_um> <num_tiers>
//! # seed <u64>
//! # config_hash <hex>
//! # hpwl_um <f64>
//! # cut_nets <count>
//! cell <id> <x_um> <y_um> <tier>
//! ```
//!
//! Only the `footprint` header line is required when reading.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{CellIdx, Netlist};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loc {
    pub x: f64,
    pub y: f64,
    pub tier: usize,
}

impl Loc {
    pub fn new(x: f64, y: f64, tier: usize) -> Self {
        Self { x, y, tier }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("placement file has no `# footprint <w> <h> <tiers>` header")]
    MissingFootprint,
    #[error("cell `{0}` is not placed")]
    Unplaced(String),
    #[error("placement names unknown cell `{0}`")]
    UnknownCell(String),
    #[error("cell `{0}` is placed twice")]
    Duplicate(String),
    #[error(
        "cell `{cell}` at ({x}, {y}) tier {tier} lies outside the {width} x {height} footprint with {tiers} tier(s)"
    )]
    OutOfBounds {
        cell: String,
        x: f64,
        y: f64,
        tier: usize,
        width: f64,
        height: f64,
        tiers: usize,
    },
    #[error("tier {tier} holds {area} µm² of cells on a {capacity} µm² footprint")]
    Overfull { tier: usize, area: f64, capacity: f64 },
    #[error("invalid footprint: {0}")]
    Footprint(String),
}

/// Per-cell `(x, y, tier)` coordinates on a rectangular footprint shared by
/// all tiers. Indexed like the cells of the netlist it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub width: f64,
    pub height: f64,
    pub num_tiers: usize,
    locs: Vec<Option<Loc>>,
}

impl Placement {
    pub fn new(width: f64, height: f64, num_tiers: usize, num_cells: usize) -> Self {
        Self {
            width,
            height,
            num_tiers,
            locs: vec![None; num_cells],
        }
    }

    pub fn set(&mut self, cell: CellIdx, loc: Loc) {
        self.locs[cell] = Some(loc);
    }

    pub fn get(&self, cell: CellIdx) -> Option<Loc> {
        self.locs.get(cell).copied().flatten()
    }

    pub fn locs(&self) -> &[Option<Loc>] {
        &self.locs
    }

    pub fn footprint_area(&self) -> f64 {
        self.width * self.height
    }

    pub fn loc(&self, nl: &Netlist, cell: CellIdx) -> Result<Loc, PlacementError> {
        self.get(cell)
            .ok_or_else(|| PlacementError::Unplaced(nl.cell(cell).id.clone()))
    }

    /// Per-tier sum of placed cell area.
    pub fn tier_areas(&self, nl: &Netlist) -> Vec<f64> {
        let mut areas = vec![0.0; self.num_tiers];
        for (i, l) in self.locs.iter().enumerate() {
            if let Some(l) = l {
                if l.tier < self.num_tiers {
                    areas[l.tier] += nl.cell(i).area;
                }
            }
        }
        areas
    }

    /// Checks coverage, bounds, tier range and per-tier utilization.
    pub fn validate(&self, nl: &Netlist) -> Result<(), PlacementError> {
        if !(self.width > 0.0 && self.height > 0.0 && self.num_tiers >= 1) {
            return Err(PlacementError::Footprint(format!(
                "{} x {} with {} tiers",
                self.width, self.height, self.num_tiers
            )));
        }
        if self.locs.len() != nl.num_cells() {
            return Err(PlacementError::Footprint(format!(
                "placement has {} entries for {} cells",
                self.locs.len(),
                nl.num_cells()
            )));
        }
        const EPS: f64 = 1e-9;
        for (i, l) in self.locs.iter().enumerate() {
            let l = l.ok_or_else(|| PlacementError::Unplaced(nl.cell(i).id.clone()))?;
            if !(l.x >= -EPS
                && l.x <= self.width + EPS
                && l.y >= -EPS
                && l.y <= self.height + EPS
                && l.tier < self.num_tiers)
            {
                return Err(PlacementError::OutOfBounds {
                    cell: nl.cell(i).id.clone(),
                    x: l.x,
                    y: l.y,
                    tier: l.tier,
                    width: self.width,
                    height: self.height,
                    tiers: self.num_tiers,
                });
            }
        }
        let capacity = self.footprint_area();
        for (tier, area) in self.tier_areas(nl).into_iter().enumerate() {
            if area > capacity * (1.0 + 1e-12) {
                return Err(PlacementError::Overfull { tier, area, capacity });
            }
        }
        Ok(())
    }

    /// Renders the placement file with the given header metadata.
    pub fn to_file(&self, nl: &Netlist, header: &PlacementHeader) -> String {
        let mut out = String::new();
        out.push_str("# stack3d placement\n");
        let _ = writeln!(out, "# footprint {} {} {}", self.width, self.height, self.num_tiers);
        if let Some(seed) = header.seed {
            let _ = writeln!(out, "# seed {seed}");
        }
        if let Some(h) = &header.config_hash {
            let _ = writeln!(out, "# config_hash {h}");
        }
        if let Some(w) = header.hpwl_um {
            let _ = writeln!(out, "# hpwl_um {w}");
        }
        if let Some(c) = header.cut_nets {
            let _ = writeln!(out, "# cut_nets {c}");
        }
        for (i, l) in self.locs.iter().enumerate() {
            if let Some(l) = l {
                let _ = writeln!(out, "cell {} {} {} {}", nl.cell(i).id, l.x, l.y, l.tier);
            }
        }
        out
    }

    /// Binds a parsed placement file to a netlist.
    pub fn from_file(file: &PlacementFile, nl: &Netlist) -> Result<Self, PlacementError> {
        let h = &file.header;
        let mut p = Placement::new(h.width, h.height, h.num_tiers, nl.num_cells());
        for (id, loc) in &file.entries {
            let idx = nl
                .cell_index(id)
                .ok_or_else(|| PlacementError::UnknownCell(id.clone()))?;
            if p.locs[idx].is_some() {
                return Err(PlacementError::Duplicate(id.clone()));
            }
            p.locs[idx] = Some(*loc);
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlacementHeader {
    pub width: f64,
    pub height: f64,
    pub num_tiers: usize,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub hpwl_um: Option<f64>,
    pub cut_nets: Option<usize>,
}

/// A placement file as read from text, before binding to a netlist.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementFile {
    pub header: PlacementHeader,
    pub entries: Vec<(String, Loc)>,
}

impl PlacementFile {
    pub fn parse(text: &str) -> Result<Self, PlacementError> {
        let mut header = PlacementHeader::default();
        let mut have_footprint = false;
        let mut entries = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();

        for (lno, raw) in text.lines().enumerate() {
            let line = lno + 1;
            let syntax = |msg: String| PlacementError::Syntax { line, msg };
            let trimmed = raw.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                let toks: Vec<&str> = comment.split_whitespace().collect();
                let num = |t: &str| -> Result<f64, PlacementError> {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| syntax(format!("expected a number, got `{t}`")))
                };
                match toks.as_slice() {
                    ["footprint", w, h, t] => {
                        header.width = num(w)?;
                        header.height = num(h)?;
                        header.num_tiers = t.parse().map_err(|_| syntax(format!("bad tier count `{t}`")))?;
                        if !(header.width > 0.0 && header.height > 0.0 && header.num_tiers >= 1) {
                            return Err(syntax("footprint must be positive".into()));
                        }
                        have_footprint = true;
                    }
                    ["seed", s] => header.seed = Some(s.parse().map_err(|_| syntax(format!("bad seed `{s}`")))?),
                    ["config_hash", h] => header.config_hash = Some(h.to_string()),
                    ["hpwl_um", v] => header.hpwl_um = Some(num(v)?),
                    ["cut_nets", c] => {
                        header.cut_nets = Some(c.parse().map_err(|_| syntax(format!("bad cut count `{c}`")))?)
                    }
                    _ => {}
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            match toks.as_slice() {
                ["cell", id, x, y, tier] => {
                    let x: f64 = x
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| syntax(format!("bad x `{x}`")))?;
                    let y: f64 = y
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| syntax(format!("bad y `{y}`")))?;
                    let tier: usize = tier.parse().map_err(|_| syntax(format!("bad tier `{tier}`")))?;
                    if seen.insert(id.to_string(), line).is_some() {
                        return Err(PlacementError::Duplicate(id.to_string()));
                    }
                    entries.push((id.to_string(), Loc { x, y, tier }));
                }
                _ => return Err(syntax("expected `cell <id> <x> <y> <tier>`".into())),
            }
        }
        if !have_footprint {
            return Err(PlacementError::MissingFootprint);
        }
        Ok(Self { header, entries })
    }
}
