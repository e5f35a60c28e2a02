// SPDX-License-Identifier: Apache-2.0

//! Path-sum delay over placed netlists and 2D/3D path statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{path_length, Netlist, Placement, PlacementError};

/// Wire delay default: on synthetic benches the median path then spends
/// about as long in wire as in gates.
pub const DEFAULT_WIRE_DELAY_PER_UM: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimingError {
    #[error("invalid delay model: {0}")]
    InvalidModel(String),
    #[error("no path records for the {0} design")]
    Empty(&'static str),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    /// ns per µm of pin-to-pin wire.
    pub wire_delay_per_um: f64,
    /// ns per tier boundary crossed between consecutive path cells.
    pub tier_hop_delay: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        Self {
            wire_delay_per_um: DEFAULT_WIRE_DELAY_PER_UM,
            tier_hop_delay: 0.0,
        }
    }
}

impl DelayModel {
    pub fn validate(&self) -> Result<(), TimingError> {
        for (name, v) in [
            ("wire_delay_per_um", self.wire_delay_per_um),
            ("tier_hop_delay", self.tier_hop_delay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TimingError::InvalidModel(format!("{name} {v} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub path_id: String,
    pub n_cells: usize,
    #[serde(rename = "length_um")]
    pub length: f64,
    #[serde(rename = "delay_ns")]
    pub delay: f64,
    #[serde(rename = "slack_ns")]
    pub slack: f64,
}

/// Delay and slack of every declared path, worst slack first. Ties keep
/// declaration order.
pub fn evaluate_paths(nl: &Netlist, pl: &Placement, model: &DelayModel) -> Result<Vec<PathRecord>, TimingError> {
    model.validate()?;
    let mut out = Vec::with_capacity(nl.paths().len());
    for p in nl.paths() {
        let length = path_length(p, nl, pl)?;
        let mut crossings = 0usize;
        let mut prev = pl.loc(nl, p.cells[0])?.tier;
        for &c in &p.cells[1..] {
            let t = pl.loc(nl, c)?.tier;
            crossings += t.abs_diff(prev);
            prev = t;
        }
        let gates: f64 = p.cells.iter().map(|&c| nl.cell(c).delay).sum();
        let delay = gates + model.wire_delay_per_um * length + model.tier_hop_delay * crossings as f64;
        out.push(PathRecord {
            path_id: p.id.clone(),
            n_cells: p.cells.len(),
            length,
            delay,
            slack: p.required_time - delay,
        });
    }
    out.sort_by(|a, b| a.slack.total_cmp(&b.slack));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignStats {
    pub paths: usize,
    pub max_length_um: f64,
    pub mean_length_um: f64,
    /// Population standard deviation.
    pub stddev_length_um: f64,
    /// Paths with negative slack.
    pub failing: usize,
    pub worst_slack_ns: f64,
}

impl DesignStats {
    fn of(records: &[PathRecord]) -> Self {
        let n = records.len() as f64;
        let mean = records.iter().map(|r| r.length).sum::<f64>() / n;
        let var = records.iter().map(|r| (r.length - mean).powi(2)).sum::<f64>() / n;
        Self {
            paths: records.len(),
            max_length_um: records.iter().map(|r| r.length).fold(f64::NEG_INFINITY, f64::max),
            mean_length_um: mean,
            stddev_length_um: var.sqrt(),
            failing: records.iter().filter(|r| r.slack < 0.0).count(),
            worst_slack_ns: records.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
        }
    }
}

/// Aggregate over paths with the same cell count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub design: String,
    pub n_cells: usize,
    pub paths: usize,
    pub mean_length_um: f64,
    pub max_length_um: f64,
    pub min_slack_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub design_2d: DesignStats,
    pub design_3d: DesignStats,
    /// 3D minus 2D.
    pub delta_max_length_um: f64,
    pub delta_failing: i64,
    pub delta_stddev_length_um: f64,
    pub buckets: Vec<Bucket>,
}

pub fn path_stats(records_2d: &[PathRecord], records_3d: &[PathRecord]) -> Result<PathStats, TimingError> {
    if records_2d.is_empty() {
        return Err(TimingError::Empty("2d"));
    }
    if records_3d.is_empty() {
        return Err(TimingError::Empty("3d"));
    }
    let d2 = DesignStats::of(records_2d);
    let d3 = DesignStats::of(records_3d);
    let mut buckets = Vec::new();
    for (design, recs) in [("2d", records_2d), ("3d", records_3d)] {
        let mut by_size: BTreeMap<usize, Vec<&PathRecord>> = BTreeMap::new();
        for r in recs {
            by_size.entry(r.n_cells).or_default().push(r);
        }
        for (n_cells, rs) in by_size {
            buckets.push(Bucket {
                design: design.to_string(),
                n_cells,
                paths: rs.len(),
                mean_length_um: rs.iter().map(|r| r.length).sum::<f64>() / rs.len() as f64,
                max_length_um: rs.iter().map(|r| r.length).fold(f64::NEG_INFINITY, f64::max),
                min_slack_ns: rs.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
            });
        }
    }
    Ok(PathStats {
        delta_max_length_um: d3.max_length_um - d2.max_length_um,
        delta_failing: d3.failing as i64 - d2.failing as i64,
        delta_stddev_length_um: d3.stddev_length_um - d2.stddev_length_um,
        design_2d: d2,
        design_3d: d3,
        buckets,
    })
}
