// SPDX-License-Identifier: Apache-2.0

//! Package bumps, current per bump and a resistive-mesh IR-drop estimate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{Netlist, Placement};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdnError {
    #[error("invalid power-delivery input: {0}")]
    Invalid(String),
    #[error("a {footprint} mm² footprint fits no bump at {pitch} µm pitch")]
    NoBump { footprint: f64, pitch: f64 },
    #[error("IR drop needs a mesh sheet resistance")]
    NoResistance,
    #[error("load at ({x}, {y}) mm lies outside the {side} mm footprint")]
    LoadOutside { x: f64, y: f64, side: f64 },
    #[error("mesh solve stopped after {iterations} iterations at residual {residual} A")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdnSpec {
    /// W
    pub total_power: f64,
    /// V
    pub vdd: f64,
    /// mm², square
    pub footprint: f64,
    /// µm
    pub bump_pitch: f64,
    /// Ω per square of the power mesh.
    pub sheet_resistance: Option<f64>,
    /// Fraction of the footprint unavailable to bumps.
    pub keepout: f64,
    /// Mesh nodes per side.
    pub mesh_size: usize,
    /// Relaxation factor of the iterative solver.
    pub damping: f64,
    pub max_iterations: usize,
}

impl PdnSpec {
    pub fn new(total_power: f64, vdd: f64, footprint: f64, bump_pitch: f64) -> Self {
        Self {
            total_power,
            vdd,
            footprint,
            bump_pitch,
            sheet_resistance: None,
            keepout: 0.0,
            mesh_size: 32,
            damping: 0.9,
            max_iterations: 200_000,
        }
    }

    pub fn validate(&self) -> Result<(), PdnError> {
        for (name, v) in [
            ("total_power", self.total_power),
            ("vdd", self.vdd),
            ("footprint", self.footprint),
            ("bump_pitch", self.bump_pitch),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PdnError::Invalid(format!("{name} {v} must be positive")));
            }
        }
        if let Some(r) = self.sheet_resistance {
            if !(r > 0.0 && r.is_finite()) {
                return Err(PdnError::Invalid(format!("sheet_resistance {r} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.keepout) {
            return Err(PdnError::Invalid(format!(
                "keepout {} must lie in [0, 1)",
                self.keepout
            )));
        }
        if self.mesh_size < 2 {
            return Err(PdnError::Invalid(format!(
                "mesh_size {} must be at least 2",
                self.mesh_size
            )));
        }
        if !(self.damping > 0.0 && self.damping < 2.0) {
            return Err(PdnError::Invalid(format!(
                "damping {} must lie in (0, 2)",
                self.damping
            )));
        }
        Ok(())
    }

    /// Side of the square footprint in mm.
    pub fn side(&self) -> f64 {
        self.footprint.sqrt()
    }

    /// Bumps per side of the square bump grid.
    pub fn bumps_per_side(&self) -> Result<usize, PdnError> {
        let usable = self.footprint * (1.0 - self.keepout);
        let per_side = (usable.sqrt() / (self.bump_pitch / 1000.0) + 1e-9).floor() as usize;
        if per_side == 0 {
            return Err(PdnError::NoBump {
                footprint: usable,
                pitch: self.bump_pitch,
            });
        }
        Ok(per_side)
    }
}

/// Bumps on a square grid: `floor(√footprint / pitch)²`.
pub fn bump_count(footprint_mm2: f64, pitch_um: f64) -> Result<u64, PdnError> {
    if !(footprint_mm2 > 0.0 && pitch_um > 0.0 && footprint_mm2.is_finite() && pitch_um.is_finite()) {
        return Err(PdnError::Invalid(format!(
            "footprint {footprint_mm2} mm² and pitch {pitch_um} µm must be positive"
        )));
    }
    let k = PdnSpec::new(1.0, 1.0, footprint_mm2, pitch_um).bumps_per_side()? as u64;
    Ok(k * k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdnReport {
    pub bump_count: u64,
    #[serde(rename = "current_per_bump_A")]
    pub current_per_bump: f64,
    #[serde(rename = "power_density_W_mm2")]
    pub power_density: f64,
    #[serde(rename = "worst_ir_drop_mV")]
    pub worst_ir_drop: Option<f64>,
}

pub fn analyze(spec: &PdnSpec) -> Result<PdnReport, PdnError> {
    spec.validate()?;
    let k = spec.bumps_per_side()? as u64;
    let n = k * k;
    Ok(PdnReport {
        bump_count: n,
        current_per_bump: spec.total_power / (spec.vdd * n as f64),
        power_density: spec.total_power / spec.footprint,
        worst_ir_drop: None,
    })
}

/// `analyze` plus the mesh IR drop for the given loads.
pub fn analyze_with_loads(spec: &PdnSpec, loads: &[PointLoad]) -> Result<(PdnReport, IrDrop), PdnError> {
    let mut report = analyze(spec)?;
    let ir = ir_drop(spec, loads)?;
    report.worst_ir_drop = Some(ir.worst_mv);
    Ok((report, ir))
}

/// Power drawn at a point of the footprint, in mm and W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLoad {
    pub x: f64,
    pub y: f64,
    pub power: f64,
}

/// Spreads `total_power` over the placed cells in proportion to cell area,
/// scaling placement coordinates onto the PDN footprint. All tiers draw
/// through the same footprint.
pub fn loads_from_placement(nl: &Netlist, pl: &Placement, spec: &PdnSpec) -> Result<Vec<PointLoad>, PdnError> {
    pl.validate(nl)
        .map_err(|e| PdnError::Invalid(format!("placement: {e}")))?;
    let side = spec.side();
    let total = nl.total_area();
    Ok(pl
        .locs()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let l = l.expect("validated placement covers every cell");
            PointLoad {
                x: (l.x / pl.width).clamp(0.0, 1.0) * side,
                y: (l.y / pl.height).clamp(0.0, 1.0) * side,
                power: spec.total_power * nl.cell(i).area / total,
            }
        })
        .collect())
}

/// Resistive mesh with `m × m` nodes spanning the footprint corner to
/// corner; each edge is one square of sheet resistance.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub m: usize,
    /// Ω per edge.
    pub resistance: f64,
    /// Nodes held at VDD by a bump.
    pub fixed: Vec<bool>,
    /// Current sunk at each node, A.
    pub current: Vec<f64>,
}

impl Mesh {
    pub fn build(spec: &PdnSpec, loads: &[PointLoad]) -> Result<Self, PdnError> {
        spec.validate()?;
        let r = spec.sheet_resistance.ok_or(PdnError::NoResistance)?;
        let m = spec.mesh_size;
        let side = spec.side();
        let step = side / (m - 1) as f64;
        let nearest = |v: f64| ((v / step).round() as usize).min(m - 1);

        let k = spec.bumps_per_side()?;
        let bump_pitch = side / k as f64;
        let mut fixed = vec![false; m * m];
        for a in 0..k {
            for b in 0..k {
                let (x, y) = ((a as f64 + 0.5) * bump_pitch, (b as f64 + 0.5) * bump_pitch);
                fixed[nearest(y) * m + nearest(x)] = true;
            }
        }
        let mut current = vec![0.0; m * m];
        let tol = side * 1e-9;
        for l in loads {
            if !(l.x >= -tol && l.x <= side + tol && l.y >= -tol && l.y <= side + tol) {
                return Err(PdnError::LoadOutside { x: l.x, y: l.y, side });
            }
            if !(l.power >= 0.0 && l.power.is_finite()) {
                return Err(PdnError::Invalid(format!(
                    "load power {} must be non-negative",
                    l.power
                )));
            }
            current[nearest(l.y.max(0.0)) * m + nearest(l.x.max(0.0))] += l.power / spec.vdd;
        }
        Ok(Self {
            m,
            resistance: r,
            fixed,
            current,
        })
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let m = self.m;
        let (x, y) = (i % m, i / m);
        [
            (x > 0).then(|| i - 1),
            (x + 1 < m).then(|| i + 1),
            (y > 0).then(|| i - m),
            (y + 1 < m).then(|| i + m),
        ]
        .into_iter()
        .flatten()
    }

    /// Largest current imbalance over free nodes for drops `d` (V), in A.
    pub fn residual(&self, d: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.m * self.m {
            if self.fixed[i] {
                continue;
            }
            let out: f64 = self.neighbors(i).map(|j| d[i] - d[j]).sum::<f64>() / self.resistance;
            worst = worst.max((out - self.current[i]).abs());
        }
        worst
    }

    /// Relaxed Gauss–Seidel on node drops, stopping once the residual is
    /// below `rel_tol` times the total current.
    pub fn solve(&self, damping: f64, rel_tol: f64, max_iterations: usize) -> Result<(Vec<f64>, usize), PdnError> {
        let n = self.m * self.m;
        let mut d = vec![0.0; n];
        let total: f64 = self.current.iter().sum();
        if total == 0.0 {
            return Ok((d, 0));
        }
        let target = rel_tol * total;
        let mut residual = f64::INFINITY;
        for it in 1..=max_iterations {
            for i in 0..n {
                if self.fixed[i] {
                    continue;
                }
                let mut sum = 0.0;
                let mut deg = 0.0;
                for j in self.neighbors(i) {
                    sum += d[j];
                    deg += 1.0;
                }
                let gs = (sum + self.resistance * self.current[i]) / deg;
                d[i] += damping * (gs - d[i]);
            }
            if it % 16 == 0 || it == max_iterations {
                residual = self.residual(&d);
                if residual < target {
                    return Ok((d, it));
                }
            }
        }
        Err(PdnError::NoConvergence {
            iterations: max_iterations,
            residual,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrDrop {
    pub m: usize,
    /// Row-major node drops, mV.
    pub node_drops_mv: Vec<f64>,
    pub worst_mv: f64,
    pub iterations: usize,
}

impl IrDrop {
    /// `(i, j, x_mm, y_mm, voltage_V)` per node, row-major.
    pub fn node_voltages(&self, spec: &PdnSpec) -> Vec<(usize, usize, f64, f64, f64)> {
        let step = spec.side() / (self.m - 1) as f64;
        self.node_drops_mv
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let (i, j) = (k % self.m, k / self.m);
                (i, j, i as f64 * step, j as f64 * step, spec.vdd - d / 1000.0)
            })
            .collect()
    }
}

pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

pub fn ir_drop(spec: &PdnSpec, loads: &[PointLoad]) -> Result<IrDrop, PdnError> {
    let mesh = Mesh::build(spec, loads)?;
    let (d, iterations) = mesh.solve(spec.damping, RESIDUAL_TOLERANCE, spec.max_iterations)?;
    let node_drops_mv: Vec<f64> = d.iter().map(|v| v * 1000.0).collect();
    Ok(IrDrop {
        m: mesh.m,
        worst_mv: node_drops_mv.iter().copied().fold(0.0, f64::max),
        node_drops_mv,
        iterations,
    })
}
