// SPDX-License-Identifier: Apache-2.0

//! `pdn`: bumps, current per bump, power density and IR drop of a 2D
//! footprint and of the same design on a smaller 3D footprint.

use serde::Serialize;
use stack3d::pdn::{analyze, analyze_with_loads, IrDrop, PdnReport, PdnSpec, PointLoad};

use crate::config::{Config, ConfigError};
use crate::output::{csv_bytes, json_bytes, table_bytes, Artifacts};
use crate::{CliError, RunContext};

pub const PDN_FIELDS: [&str; 9] = [
    "total_power",
    "vdd",
    "footprint",
    "bump_pitch",
    "keepout",
    "sheet_resistance",
    "mesh_size",
    "damping",
    "max_iterations",
];

/// Keys whose defaults are illustrative rather than taken from a design.
const ILLUSTRATIVE: [&str; 3] = ["total_power", "footprint", "bump_pitch"];

/// Reads a spec from keys `<prefix><field>`. Defaults: 10 W at 1 V on
/// 100 mm² with 1000 µm bump pitch, no keep-out, a 32 × 32 mesh and
/// relaxation factor 0.9.
pub fn pdn_spec(cfg: &Config, prefix: &str, sheet_default: Option<f64>) -> Result<PdnSpec, ConfigError> {
    let k = |f: &str| format!("{prefix}{f}");
    let d = PdnSpec::new(10.0, 1.0, 100.0, 1000.0);
    let sheet_resistance = match cfg.opt::<f64>(&k("sheet_resistance"))? {
        Some(r) => Some(r),
        None => sheet_default,
    };
    let spec = PdnSpec {
        total_power: cfg.positive(&k("total_power"), d.total_power)?,
        vdd: cfg.positive(&k("vdd"), d.vdd)?,
        footprint: cfg.positive(&k("footprint"), d.footprint)?,
        bump_pitch: cfg.positive(&k("bump_pitch"), d.bump_pitch)?,
        sheet_resistance,
        keepout: cfg.number(&k("keepout"), d.keepout)?,
        mesh_size: cfg.get(&k("mesh_size"), d.mesh_size)?,
        damping: cfg.number(&k("damping"), d.damping)?,
        max_iterations: cfg.get(&k("max_iterations"), d.max_iterations)?,
    };
    spec.validate()
        .map_err(|e| cfg.invalid(&k("footprint"), e.to_string()))?;
    spec.bumps_per_side()
        .map_err(|e| cfg.invalid(&k("bump_pitch"), e.to_string()))?;
    Ok(spec)
}

pub fn illustrative(cfg: &Config, prefix: &str) -> bool {
    ILLUSTRATIVE.iter().any(|f| !cfg.contains(&format!("{prefix}{f}")))
}

/// Equal power drawn at every node position of a `k × k` grid.
pub fn uniform_loads(spec: &PdnSpec, k: usize) -> Vec<PointLoad> {
    let step = spec.side() / k as f64;
    let p = spec.total_power / (k * k) as f64;
    (0..k * k)
        .map(|i| PointLoad {
            x: ((i % k) as f64 + 0.5) * step,
            y: ((i / k) as f64 + 0.5) * step,
            power: p,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PdnRow {
    pub design: &'static str,
    pub footprint_mm2: f64,
    pub bump_count: u64,
    #[serde(rename = "current_per_bump_A")]
    pub current_per_bump: f64,
    #[serde(rename = "power_density_W_mm2")]
    pub power_density: f64,
    #[serde(rename = "worst_ir_drop_mV")]
    pub worst_ir_drop: Option<f64>,
    pub illustrative_defaults: bool,
}

impl PdnRow {
    pub fn new(design: &'static str, spec: &PdnSpec, r: &PdnReport, illustrative: bool) -> Self {
        Self {
            design,
            footprint_mm2: spec.footprint,
            bump_count: r.bump_count,
            current_per_bump: r.current_per_bump,
            power_density: r.power_density,
            worst_ir_drop: r.worst_ir_drop,
            illustrative_defaults: illustrative,
        }
    }
}

#[derive(Serialize)]
struct NodeRow {
    i: usize,
    j: usize,
    x_mm: f64,
    y_mm: f64,
    voltage_v: f64,
}

pub fn node_csv(ir: &IrDrop, spec: &PdnSpec) -> Result<Vec<u8>, CliError> {
    let rows: Vec<NodeRow> = ir
        .node_voltages(spec)
        .into_iter()
        .map(|(i, j, x_mm, y_mm, voltage_v)| NodeRow {
            i,
            j,
            x_mm,
            y_mm,
            voltage_v,
        })
        .collect();
    csv_bytes(&rows).map_err(|e| CliError::stage("output", e))
}

/// Report for `spec`, with IR drop when a sheet resistance is set.
pub fn report(
    stage: &'static str,
    spec: &PdnSpec,
    loads: &[PointLoad],
) -> Result<(PdnReport, Option<IrDrop>), CliError> {
    if spec.sheet_resistance.is_some() {
        let (r, ir) = analyze_with_loads(spec, loads).map_err(|e| CliError::stage(stage, e))?;
        Ok((r, Some(ir)))
    } else {
        Ok((analyze(spec).map_err(|e| CliError::stage(stage, e))?, None))
    }
}

pub fn run_pdn(ctx: &RunContext) -> Result<Artifacts, CliError> {
    let cfg = &ctx.config;
    let mut known: Vec<&str> = PDN_FIELDS.to_vec();
    known.extend(["footprint_scale", "dump_nodes"]);
    cfg.expect_keys(&known)?;
    let spec_2d = pdn_spec(cfg, "", None)?;
    let scale = cfg.positive("footprint_scale", 0.5)?;
    if scale > 1.0 {
        return Err(cfg.invalid("footprint_scale", "must not exceed 1").into());
    }
    let spec_3d = PdnSpec {
        footprint: spec_2d.footprint * scale,
        ..spec_2d.clone()
    };
    spec_3d
        .bumps_per_side()
        .map_err(|e| cfg.invalid("footprint_scale", e.to_string()))?;
    let dump = cfg.flag("dump_nodes", false)?;
    if dump && spec_2d.sheet_resistance.is_none() {
        return Err(cfg.invalid("dump_nodes", "needs sheet_resistance").into());
    }
    let note = illustrative(cfg, "");
    let mut out = Artifacts::default();
    let mut rows = Vec::new();
    for (design, stage, spec) in [("2d", "pdn_2d", &spec_2d), ("3d", "pdn_3d", &spec_3d)] {
        let loads = uniform_loads(spec, spec.mesh_size);
        let (r, ir) = report(stage, spec, &loads)?;
        out.add(
            format!("pdn_{design}.json"),
            json_bytes(&r).map_err(|e| CliError::stage("output", e))?,
        );
        if let (true, Some(ir)) = (dump, &ir) {
            out.add(format!("nodes_{design}.csv"), node_csv(ir, spec)?);
        }
        rows.push(PdnRow::new(design, spec, &r, note));
    }
    out.add(
        format!("pdn.{}", ctx.format.ext()),
        table_bytes(&rows, ctx.format).map_err(|e| CliError::stage("output", e))?,
    );
    Ok(out)
}
