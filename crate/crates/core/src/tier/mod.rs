// SPDX-License-Identifier: Apache-2.0

//! Tier partitioning, multi-tier co-placement, legalization and 3D-via
//! accounting.

mod anneal;
mod fm;
mod legalize;

use serde::Serialize;
use thiserror::Error;

use crate::netlist::{CellIdx, Netlist, Placement, PlacementError};

pub use anneal::{coplace, coplace_detailed, place_2d, place_2d_detailed, AnnealOutcome, MoveRecord};
pub use fm::{fm_bipartition, fm_bipartition_with, FmOptions, FmTrace};
pub use legalize::{legalize, overlaps};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TierError {
    #[error("netlist has no cells")]
    Empty,
    #[error("partitioning needs at least 2 movable cells, found {0}")]
    TooFewCells(usize),
    #[error("no partition keeps tier 0 area within [{lo}, {hi}] µm² (largest movable cell {max_cell} µm²)")]
    InfeasibleBalance { lo: f64, hi: f64, max_cell: f64 },
    #[error("tier {tier} needs {area} µm² but the footprint holds {capacity} µm²")]
    Overflow { tier: usize, area: f64, capacity: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("assignment does not match the netlist: {0}")]
    BadAssignment(String),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

/// Cell-to-tier map with its cut and area statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierAssignment {
    /// Indexed by cell.
    pub tier_of: Vec<usize>,
    pub num_tiers: usize,
    pub cut_nets: usize,
    /// Area fraction per tier.
    pub balance: Vec<f64>,
    pub trace: FmTrace,
}

impl TierAssignment {
    /// Builds an assignment from explicit tiers and computes its statistics.
    pub fn from_tiers(nl: &Netlist, tier_of: Vec<usize>, num_tiers: usize) -> Result<Self, TierError> {
        if tier_of.len() != nl.num_cells() {
            return Err(TierError::BadAssignment(format!(
                "{} tiers for {} cells",
                tier_of.len(),
                nl.num_cells()
            )));
        }
        if let Some(i) = tier_of.iter().position(|&t| t >= num_tiers) {
            return Err(TierError::BadAssignment(format!(
                "cell `{}` on tier {} of {num_tiers}",
                nl.cell(i).id,
                tier_of[i]
            )));
        }
        let cut = cut_size(nl, &tier_of);
        Ok(Self {
            balance: balance(nl, &tier_of, num_tiers),
            cut_nets: cut,
            tier_of,
            num_tiers,
            trace: FmTrace {
                initial_cut: cut,
                initial_balanced: true,
                pass_cuts: Vec::new(),
            },
        })
    }

    /// Tier of the cell named `id`.
    pub fn tier_of_id(&self, nl: &Netlist, id: &str) -> Option<usize> {
        nl.cell_index(id).map(|i| self.tier_of[i])
    }

    pub fn is_balanced(&self, tol: f64) -> bool {
        let target = 1.0 / self.num_tiers as f64;
        self.balance.iter().all(|f| (f - target).abs() <= tol + 1e-9)
    }
}

/// Number of nets with pins on more than one tier.
pub fn cut_size(nl: &Netlist, tier_of: &[usize]) -> usize {
    nl.nets()
        .iter()
        .filter(|n| n.pins.iter().any(|&p| tier_of[p] != tier_of[n.pins[0]]))
        .count()
}

/// Area fraction on each tier.
pub fn balance(nl: &Netlist, tier_of: &[usize], num_tiers: usize) -> Vec<f64> {
    let mut areas = vec![0.0; num_tiers];
    for (i, &t) in tier_of.iter().enumerate() {
        areas[t] += nl.cell(i).area;
    }
    let total = nl.total_area();
    areas.iter().map(|a| a / total).collect()
}

/// Placement and annealing parameters shared by the 2D and 3D flows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaceConfig {
    /// 3D footprint area over 2D footprint area.
    pub footprint_scale: f64,
    pub num_tiers: usize,
    pub seed: u64,
    /// Cell area over footprint area for the 2D footprint.
    pub utilization: f64,
    /// Starting temperature; `None` picks one from sampled uphill moves.
    pub t0: Option<f64>,
    pub cooling: f64,
    /// Moves per temperature as a multiple of the movable cell count.
    pub moves_per_cell: f64,
    /// Annealing stops once a temperature accepts fewer moves than this.
    pub stop_acceptance: f64,
    pub max_temperatures: usize,
    /// Allowed deviation of each tier's area fraction from `1 / num_tiers`.
    pub balance_tol: f64,
    /// µm added per tier boundary spanned by a net.
    pub via_penalty: f64,
    /// Probability that a 3D move targets another tier.
    pub tier_move_prob: f64,
    pub fm_starts: usize,
    /// Keep a log of accepted moves for auditing.
    pub record_moves: bool,
}

impl Default for PlaceConfig {
    fn default() -> Self {
        Self {
            footprint_scale: 0.5,
            num_tiers: 2,
            seed: 1,
            utilization: 0.7,
            t0: None,
            cooling: 0.95,
            moves_per_cell: 100.0,
            stop_acceptance: 0.01,
            max_temperatures: 1000,
            balance_tol: 0.05,
            via_penalty: 0.0,
            tier_move_prob: 0.2,
            fm_starts: 4,
            record_moves: false,
        }
    }
}

impl PlaceConfig {
    pub fn validate(&self) -> Result<(), TierError> {
        let bad = |m: String| Err(TierError::InvalidConfig(m));
        if !(self.footprint_scale > 0.0 && self.footprint_scale <= 1.0) {
            return bad(format!("footprint_scale {} must lie in (0, 1]", self.footprint_scale));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return bad(format!("cooling {} must lie in (0, 1)", self.cooling));
        }
        if !(self.utilization > 0.0 && self.utilization <= 1.0) {
            return bad(format!("utilization {} must lie in (0, 1]", self.utilization));
        }
        if self.num_tiers == 0 {
            return bad("num_tiers must be at least 1".into());
        }
        if let Some(t) = self.t0 {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("t0 {t} must be positive"));
            }
        }
        if !(self.moves_per_cell > 0.0 && self.moves_per_cell.is_finite()) {
            return bad(format!("moves_per_cell {} must be positive", self.moves_per_cell));
        }
        if !(0.0..1.0).contains(&self.stop_acceptance) {
            return bad(format!("stop_acceptance {} must lie in [0, 1)", self.stop_acceptance));
        }
        if !(self.balance_tol >= 0.0 && self.balance_tol < 1.0) {
            return bad(format!("balance_tol {} must lie in [0, 1)", self.balance_tol));
        }
        if !(self.via_penalty >= 0.0 && self.via_penalty.is_finite()) {
            return bad(format!("via_penalty {} must be non-negative", self.via_penalty));
        }
        if !(0.0..=1.0).contains(&self.tier_move_prob) {
            return bad(format!("tier_move_prob {} must lie in [0, 1]", self.tier_move_prob));
        }
        if self.fm_starts == 0 {
            return bad("fm_starts must be at least 1".into());
        }
        Ok(())
    }

    /// 2D footprint side for a netlist, square, in µm.
    pub fn side_2d(&self, nl: &Netlist) -> f64 {
        (nl.total_area() / self.utilization).sqrt()
    }
}

/// Σ over nets of (highest tier − lowest tier).
pub fn count_3d_vias(nl: &Netlist, pl: &Placement) -> Result<usize, PlacementError> {
    let mut total = 0;
    for n in nl.nets() {
        let mut lo = usize::MAX;
        let mut hi = 0;
        for &p in &n.pins {
            let t = pl.loc(nl, p)?.tier;
            lo = lo.min(t);
            hi = hi.max(t);
        }
        total += hi - lo;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViaCheck {
    /// Connections the footprint supports at the given pitch.
    pub supply: f64,
    pub utilization: f64,
    pub pass: bool,
}

/// Compares via demand with the connection supply of a square grid at
/// `pitch_um` over `footprint_mm2`.
pub fn via_density_check(via_count: usize, footprint_mm2: f64, pitch_um: f64) -> Result<ViaCheck, TierError> {
    if !(footprint_mm2 > 0.0 && footprint_mm2.is_finite()) {
        return Err(TierError::InvalidConfig(format!(
            "footprint {footprint_mm2} mm² must be positive"
        )));
    }
    if !(pitch_um > 0.0 && pitch_um.is_finite()) {
        return Err(TierError::InvalidConfig(format!(
            "pitch {pitch_um} µm must be positive"
        )));
    }
    let supply = footprint_mm2 * 1e6 / (pitch_um * pitch_um);
    let utilization = via_count as f64 / supply;
    Ok(ViaCheck {
        supply,
        utilization,
        pass: utilization <= 1.0,
    })
}

pub(crate) fn movable(nl: &Netlist) -> Vec<CellIdx> {
    (0..nl.num_cells()).filter(|&i| !nl.cell(i).is_fixed()).collect()
}
