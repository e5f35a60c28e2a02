// SPDX-License-Identifier: Apache-2.0

//! Netlist data model.
//!
//! A [`Netlist`] is a flat set of point-like cells, multi-pin nets over those
//! cells, and an ordered list of declared timing paths. Cells and nets are
//! addressed by their position in the netlist (`CellIdx`) once constructed;
//! the string ids are kept for I/O.

mod parse;
mod placement;
pub mod synth;
mod wirelength;

use std::collections::HashMap;

use thiserror::Error;

pub use parse::{parse_netlist, serialize_netlist};
pub use placement::{Loc, Placement, PlacementError, PlacementFile, PlacementHeader};
pub use wirelength::{hpwl, hpwl_with_via, net_hpwl, path_length, path_length_with_via};

/// Index of a cell inside its [`Netlist`].
pub type CellIdx = usize;

/// Immovable location of an I/O anchor cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPos {
    pub x: f64,
    pub y: f64,
    pub tier: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    /// µm²
    pub area: f64,
    /// Intrinsic gate delay in ns.
    pub delay: f64,
    pub fixed: Option<FixedPos>,
}

impl Cell {
    pub fn new(id: impl Into<String>, area: f64, delay: f64) -> Self {
        Self {
            id: id.into(),
            area,
            delay,
            fixed: None,
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.fixed.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub id: String,
    pub pins: Vec<CellIdx>,
}

/// A declared timing path: an ordered chain of cells in which each
/// consecutive pair shares at least one net.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingPathSpec {
    pub id: String,
    pub cells: Vec<CellIdx>,
    /// ns
    pub required_time: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid {kind} id `{id}`: ids are non-empty and contain no whitespace or '#'")]
    InvalidId { kind: &'static str, id: String },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("`{owner}` references unknown cell `{cell}`")]
    DanglingPin { owner: String, cell: String },
    #[error("net `{net}` has fewer than two pins")]
    TooFewPins { net: String },
    #[error("net `{net}` lists cell `{cell}` more than once")]
    RepeatedPin { net: String, cell: String },
    #[error("cell `{cell}`: {msg}")]
    InvalidCell { cell: String, msg: String },
    #[error("path `{path}`: {msg}")]
    InvalidPath { path: String, msg: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<NetlistError>,
    },
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
}

impl NetlistError {
    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            e @ (NetlistError::Syntax { .. } | NetlistError::AtLine { .. }) => e,
            e => NetlistError::AtLine {
                line,
                source: Box::new(e),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    cells: Vec<Cell>,
    nets: Vec<Net>,
    paths: Vec<TimingPathSpec>,
    by_id: HashMap<String, CellIdx>,
    cell_nets: Vec<Vec<usize>>,
}

impl Netlist {
    /// Builds a netlist and checks every invariant of the data model.
    pub fn new(cells: Vec<Cell>, nets: Vec<Net>, paths: Vec<TimingPathSpec>) -> Result<Self, NetlistError> {
        let mut by_id = HashMap::with_capacity(cells.len());
        for (i, c) in cells.iter().enumerate() {
            validate_cell(c)?;
            if by_id.insert(c.id.clone(), i).is_some() {
                return Err(NetlistError::DuplicateId {
                    kind: "cell",
                    id: c.id.clone(),
                });
            }
        }

        let mut cell_nets = vec![Vec::new(); cells.len()];
        let mut net_ids = HashMap::with_capacity(nets.len());
        for (ni, n) in nets.iter().enumerate() {
            if net_ids.insert(n.id.as_str(), ni).is_some() {
                return Err(NetlistError::DuplicateId {
                    kind: "net",
                    id: n.id.clone(),
                });
            }
            validate_net(n, &cells)?;
            for &p in &n.pins {
                cell_nets[p].push(ni);
            }
        }

        let mut path_ids = HashMap::with_capacity(paths.len());
        for p in &paths {
            if path_ids.insert(p.id.as_str(), ()).is_some() {
                return Err(NetlistError::DuplicateId {
                    kind: "path",
                    id: p.id.clone(),
                });
            }
            validate_path(p, &cells, &nets, &cell_nets)?;
        }

        Ok(Self {
            cells,
            nets,
            paths,
            by_id,
            cell_nets,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn paths(&self) -> &[TimingPathSpec] {
        &self.paths
    }

    pub fn cell(&self, idx: CellIdx) -> &Cell {
        &self.cells[idx]
    }

    pub fn cell_index(&self, id: &str) -> Option<CellIdx> {
        self.by_id.get(id).copied()
    }

    /// Nets incident to a cell, in net declaration order.
    pub fn nets_of(&self, idx: CellIdx) -> &[usize] {
        &self.cell_nets[idx]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Indices of nets containing both cells.
    pub fn connecting_nets(&self, a: CellIdx, b: CellIdx) -> impl Iterator<Item = usize> + '_ {
        self.cell_nets[a]
            .iter()
            .copied()
            .filter(move |&n| self.nets[n].pins.contains(&b))
    }

    pub fn share_net(&self, a: CellIdx, b: CellIdx) -> bool {
        self.connecting_nets(a, b).next().is_some()
    }
}

pub(crate) fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(|ch| ch.is_whitespace() || ch == '#')
}

fn validate_cell(c: &Cell) -> Result<(), NetlistError> {
    let bad = |msg: &str| NetlistError::InvalidCell {
        cell: c.id.clone(),
        msg: msg.to_string(),
    };
    if !valid_id(&c.id) {
        return Err(NetlistError::InvalidId {
            kind: "cell",
            id: c.id.clone(),
        });
    }
    if !(c.area.is_finite() && c.area > 0.0) {
        return Err(bad("area must be positive"));
    }
    if !(c.delay.is_finite() && c.delay >= 0.0) {
        return Err(bad("delay must be non-negative"));
    }
    if let Some(f) = c.fixed {
        if !(f.x.is_finite() && f.y.is_finite() && f.x >= 0.0 && f.y >= 0.0) {
            return Err(bad("fixed position must be finite and non-negative"));
        }
    }
    Ok(())
}

fn validate_net(n: &Net, cells: &[Cell]) -> Result<(), NetlistError> {
    if !valid_id(&n.id) {
        return Err(NetlistError::InvalidId {
            kind: "net",
            id: n.id.clone(),
        });
    }
    if n.pins.len() < 2 {
        return Err(NetlistError::TooFewPins { net: n.id.clone() });
    }
    for (i, &p) in n.pins.iter().enumerate() {
        if p >= cells.len() {
            return Err(NetlistError::DanglingPin {
                owner: n.id.clone(),
                cell: format!("#{p}"),
            });
        }
        if n.pins[..i].contains(&p) {
            return Err(NetlistError::RepeatedPin {
                net: n.id.clone(),
                cell: cells[p].id.clone(),
            });
        }
    }
    Ok(())
}

fn validate_path(
    p: &TimingPathSpec,
    cells: &[Cell],
    nets: &[Net],
    cell_nets: &[Vec<usize>],
) -> Result<(), NetlistError> {
    let bad = |msg: String| NetlistError::InvalidPath {
        path: p.id.clone(),
        msg,
    };
    if !valid_id(&p.id) {
        return Err(NetlistError::InvalidId {
            kind: "path",
            id: p.id.clone(),
        });
    }
    if p.cells.is_empty() {
        return Err(bad("a path needs at least one cell".into()));
    }
    if !(p.required_time.is_finite() && p.required_time > 0.0) {
        return Err(bad("required time must be positive".into()));
    }
    if let Some(&c) = p.cells.iter().find(|&&c| c >= cells.len()) {
        return Err(NetlistError::DanglingPin {
            owner: p.id.clone(),
            cell: format!("#{c}"),
        });
    }
    for w in p.cells.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !cell_nets[a].iter().any(|&n| nets[n].pins.contains(&b)) {
            return Err(bad(format!(
                "consecutive cells `{}` and `{}` share no net",
                cells[a].id, cells[b].id
            )));
        }
    }
    Ok(())
}
