// SPDX-License-Identifier: Apache-2.0

//! Half-perimeter wirelength (HPWL).
//!
//! A net's HPWL is the half perimeter of the bounding box of its pins. Cells
//! are points, so pins sit at the cell location. Each tier boundary crossed
//! by the net's vertical extent adds `via_penalty` µm.

use super::{Netlist, Placement, PlacementError, TimingPathSpec};

/// Total HPWL over all nets with no via penalty.
pub fn hpwl(nl: &Netlist, pl: &Placement) -> Result<f64, PlacementError> {
    hpwl_with_via(nl, pl, 0.0)
}

pub fn hpwl_with_via(nl: &Netlist, pl: &Placement, via_penalty: f64) -> Result<f64, PlacementError> {
    let mut total = 0.0;
    for n in 0..nl.nets().len() {
        total += net_hpwl(nl, pl, n, via_penalty)?;
    }
    Ok(total)
}

pub fn net_hpwl(nl: &Netlist, pl: &Placement, net: usize, via_penalty: f64) -> Result<f64, PlacementError> {
    let pins = &nl.nets()[net].pins;
    let first = pl.loc(nl, pins[0])?;
    let (mut x0, mut x1, mut y0, mut y1) = (first.x, first.x, first.y, first.y);
    let (mut t0, mut t1) = (first.tier, first.tier);
    for &p in &pins[1..] {
        let l = pl.loc(nl, p)?;
        x0 = x0.min(l.x);
        x1 = x1.max(l.x);
        y0 = y0.min(l.y);
        y1 = y1.max(l.y);
        t0 = t0.min(l.tier);
        t1 = t1.max(l.tier);
    }
    Ok((x1 - x0) + (y1 - y0) + via_penalty * (t1 - t0) as f64)
}

/// Path length with no via penalty.
pub fn path_length(path: &TimingPathSpec, nl: &Netlist, pl: &Placement) -> Result<f64, PlacementError> {
    path_length_with_via(path, nl, pl, 0.0)
}

/// Sum of pin-to-pin HPWL over consecutive cells of a timing path: the
/// bounding box of the two connected pins for every hop.
pub fn path_length_with_via(
    path: &TimingPathSpec,
    nl: &Netlist,
    pl: &Placement,
    via_penalty: f64,
) -> Result<f64, PlacementError> {
    let mut total = 0.0;
    let mut prev = pl.loc(nl, path.cells[0])?;
    for &c in &path.cells[1..] {
        let l = pl.loc(nl, c)?;
        total += (l.x - prev.x).abs() + (l.y - prev.y).abs() + via_penalty * l.tier.abs_diff(prev.tier) as f64;
        prev = l;
    }
    Ok(total)
}
