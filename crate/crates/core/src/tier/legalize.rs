// SPDX-License-Identifier: Apache-2.0

//! Row legalization. Each tier has rows of height `row_pitch`; a cell of
//! area `a` occupies `a / row_pitch` µm of one row. Locations are cell
//! centers.

use super::TierError;
use crate::netlist::{CellIdx, Loc, Netlist, Placement};

const EPS: f64 = 1e-9;

/// Snaps movable cells to non-overlapping row sites, tier by tier.
///
/// Cells in x order (then index) each join the row with spare capacity
/// that minimizes their displacement, judged against the right end of the
/// row so far. Each row is then packed in x order to minimize squared
/// displacement. Coordinates that move by less than 1e-9 µm are left as
/// they were, so a legal placement comes back unchanged. Fixed cells keep
/// their location and do not block rows.
pub fn legalize(nl: &Netlist, pl: &Placement, row_pitch: f64) -> Result<Placement, TierError> {
    if !(row_pitch > 0.0 && row_pitch.is_finite()) {
        return Err(TierError::InvalidConfig(format!(
            "row pitch {row_pitch} must be positive"
        )));
    }
    pl.validate(nl)?;
    let rows = (pl.height / row_pitch + EPS).floor() as usize;
    if rows == 0 {
        return Err(TierError::InvalidConfig(format!(
            "footprint height {} is below one row pitch {row_pitch}",
            pl.height
        )));
    }
    let width = |c: CellIdx| nl.cell(c).area / row_pitch;
    let mut out = pl.clone();
    for tier in 0..pl.num_tiers {
        let mut cells: Vec<(CellIdx, Loc)> = (0..nl.num_cells())
            .filter(|&i| !nl.cell(i).is_fixed())
            .map(|i| (i, pl.get(i).expect("validated")))
            .filter(|(_, l)| l.tier == tier)
            .collect();
        cells.sort_by(|a, b| a.1.x.total_cmp(&b.1.x).then(a.0.cmp(&b.0)));
        let mut row_end = vec![0.0f64; rows];
        let mut row_load = vec![0.0f64; rows];
        let mut row_cells: Vec<Vec<(CellIdx, Loc)>> = vec![Vec::new(); rows];
        for (c, l) in cells {
            let w = width(c);
            let e = l.x - w / 2.0;
            let mut best: Option<(f64, usize)> = None;
            for r in 0..rows {
                if row_load[r] + w > pl.width + EPS {
                    continue;
                }
                let push = (row_end[r] - e).max(0.0);
                let push = if push <= EPS { 0.0 } else { push };
                let cost = push + ((r as f64 + 0.5) * row_pitch - l.y).abs();
                if best.is_none_or(|b| cost < b.0) {
                    best = Some((cost, r));
                }
            }
            let Some((_, r)) = best else {
                return Err(TierError::Overflow {
                    tier,
                    area: pl.tier_areas(nl)[tier],
                    capacity: rows as f64 * row_pitch * pl.width,
                });
            };
            row_end[r] = row_end[r].max(e) + w;
            row_load[r] += w;
            row_cells[r].push((c, l));
        }
        for (r, cells) in row_cells.iter().enumerate() {
            let items: Vec<(f64, f64)> = cells.iter().map(|&(c, l)| (l.x - width(c) / 2.0, width(c))).collect();
            let lefts = pack_row(&items, pl.width);
            let yc = (r as f64 + 0.5) * row_pitch;
            for (&(c, l), left) in cells.iter().zip(lefts) {
                let x = left + width(c) / 2.0;
                let x = if (x - l.x).abs() <= EPS { l.x } else { x };
                let y = if (yc - l.y).abs() <= EPS { l.y } else { yc };
                out.set(c, Loc::new(x, y, tier));
            }
        }
    }
    Ok(out)
}

/// Left edges for cells `(desired_left, width)` in a row `[0, row_width]`,
/// order preserved, minimizing Σ (left − desired_left)². Overlapping cells
/// merge into clusters placed at their mean desired offset.
fn pack_row(items: &[(f64, f64)], row_width: f64) -> Vec<f64> {
    struct Cluster {
        first: usize,
        /// Σ (desired_left_i − offset_i within the cluster)
        q: f64,
        n: f64,
        width: f64,
        left: f64,
    }
    let place = |c: &mut Cluster| {
        c.left = (c.q / c.n).min(row_width - c.width).max(0.0);
    };
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, &(e, w)) in items.iter().enumerate() {
        let clamped = e.min(row_width - w).max(0.0);
        let fits = clusters.last().is_none_or(|c| c.left + c.width <= clamped + EPS);
        if fits {
            clusters.push(Cluster {
                first: i,
                q: clamped,
                n: 1.0,
                width: w,
                left: clamped,
            });
            continue;
        }
        let last = clusters.last_mut().expect("non-empty");
        last.q += e - last.width;
        last.n += 1.0;
        last.width += w;
        place(last);
        while clusters.len() > 1 {
            let k = clusters.len() - 1;
            if clusters[k - 1].left + clusters[k - 1].width <= clusters[k].left + EPS {
                break;
            }
            let tail = clusters.pop().expect("len > 1");
            let head = clusters.last_mut().expect("len > 0");
            head.q += tail.q - tail.n * head.width;
            head.n += tail.n;
            head.width += tail.width;
            place(head);
        }
    }
    let mut lefts = vec![0.0; items.len()];
    for (k, c) in clusters.iter().enumerate() {
        let end = clusters.get(k + 1).map_or(items.len(), |n| n.first);
        let mut x = c.left;
        for i in c.first..end {
            lefts[i] = x;
            x += items[i].1;
        }
    }
    lefts
}

/// Pairs of movable cells whose row footprints overlap, assuming cells sit
/// on row centers.
pub fn overlaps(nl: &Netlist, pl: &Placement, row_pitch: f64) -> Vec<(CellIdx, CellIdx)> {
    let mut boxes: Vec<(usize, i64, f64, f64, CellIdx)> = (0..nl.num_cells())
        .filter(|&i| !nl.cell(i).is_fixed())
        .filter_map(|i| pl.get(i).map(|l| (i, l)))
        .map(|(i, l)| {
            let w = nl.cell(i).area / row_pitch;
            (
                l.tier,
                (l.y / row_pitch).floor() as i64,
                l.x - w / 2.0,
                l.x + w / 2.0,
                i,
            )
        })
        .collect();
    boxes.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    let mut found = Vec::new();
    for (k, a) in boxes.iter().enumerate() {
        for b in &boxes[k + 1..] {
            if (b.0, b.1) != (a.0, a.1) || b.2 >= a.3 - EPS {
                break;
            }
            found.push((a.4.min(b.4), a.4.max(b.4)));
        }
    }
    found
}
