// SPDX-License-Identifier: Apache-2.0

//! `cost` and `calibrate`.
//!
//! Node keys take a `ref.` or `new.` prefix: `name`, `d0` (defects/cm²),
//! `alpha` (negative-binomial clustering; omit for Poisson), `wafer_cost`,
//! `wafer_diameter` (mm) and `area_scale`.

use rayon::prelude::*;
use serde::Serialize;
use stack3d::cost::{
    calibrate_shrink, scenario_compare, Calibration, CostOptions, DpwModel, Scenario, ScenarioOptions, ScenarioRow,
    ShrinkBounds, TechNode,
};

use crate::config::{Config, ConfigError};
use crate::output::{json_bytes, sig, table_bytes, Artifacts, Format};
use crate::{CliError, RunContext};

const NODE_FIELDS: [&str; 6] = ["name", "d0", "alpha", "wafer_cost", "wafer_diameter", "area_scale"];

const STACK_KEYS: [&str; 8] = [
    "kgd",
    "bond_yield",
    "assembly_cost",
    "test_cost",
    "repair_floor",
    "dpw_model",
    "hetero_scale",
    "scenarios",
];

const SWEEP_KEYS: [&str; 5] = ["areas", "area_min", "area_max", "area_step", "calibrate_target"];

const CALIBRATE_KEYS: [&str; 5] = [
    "target_saving",
    "total_area",
    "ratio_min",
    "ratio_max",
    "shrink_area_scale",
];

fn keys(extra: &[&[&str]]) -> Vec<String> {
    let mut k: Vec<String> = ["ref", "new"]
        .iter()
        .flat_map(|p| NODE_FIELDS.iter().map(move |f| format!("{p}.{f}")))
        .collect();
    k.extend(STACK_KEYS.iter().map(|s| s.to_string()));
    for e in extra {
        k.extend(e.iter().map(|s| s.to_string()));
    }
    k
}

fn expect(cfg: &Config, known: &[String]) -> Result<(), ConfigError> {
    let refs: Vec<&str> = known.iter().map(String::as_str).collect();
    cfg.expect_keys(&refs)
}

fn node(cfg: &Config, prefix: &str, default: TechNode) -> Result<TechNode, ConfigError> {
    let k = |f: &str| format!("{prefix}.{f}");
    let n = TechNode {
        name: cfg.get(&k("name"), default.name.clone())?,
        d0: cfg.number(&k("d0"), default.d0)?,
        alpha: cfg.get(&k("alpha"), default.alpha)?,
        wafer_cost: cfg.positive(&k("wafer_cost"), default.wafer_cost)?,
        wafer_diameter: cfg.positive(&k("wafer_diameter"), default.wafer_diameter)?,
        area_scale: cfg.positive(&k("area_scale"), default.area_scale)?,
    };
    n.validate().map_err(|e| cfg.invalid(&k("d0"), e.to_string()))?;
    Ok(n)
}

/// Reference and new node defaults: a mature node and an early-ramp node
/// with a higher defect density and dearer wafers.
pub fn default_nodes() -> (TechNode, TechNode) {
    let r = TechNode::new("7nm", 0.15, 1.0);
    let mut n = TechNode::new("5nm", 0.2, 1.3);
    n.area_scale = 0.7;
    (r, n)
}

#[derive(Debug, Clone)]
pub struct CostSetup {
    pub ref_node: TechNode,
    pub new_node: TechNode,
    pub opts: ScenarioOptions,
    pub scenarios: Vec<Scenario>,
}

pub fn cost_setup(cfg: &Config) -> Result<CostSetup, ConfigError> {
    let (r, n) = default_nodes();
    let ref_node = node(cfg, "ref", r)?;
    let new_node = node(cfg, "new", n)?;
    let dpw_model: DpwModel = cfg.get("dpw_model", DpwModel::Gross)?;
    let repair_floor = cfg.number("repair_floor", 0.95)?;
    if !(0.0..=1.0).contains(&repair_floor) {
        return Err(cfg.invalid("repair_floor", "must lie in [0, 1]"));
    }
    let bond_yield = cfg.number("bond_yield", 1.0)?;
    if !(bond_yield > 0.0 && bond_yield <= 1.0) {
        return Err(cfg.invalid("bond_yield", "must lie in (0, 1]"));
    }
    let assembly_cost = cfg.number("assembly_cost", 0.0)?;
    let kgd_test_cost = cfg.number("test_cost", 0.0)?;
    for (k, v) in [("assembly_cost", assembly_cost), ("test_cost", kgd_test_cost)] {
        if v < 0.0 {
            return Err(cfg.invalid(k, "must be non-negative"));
        }
    }
    let hetero_scale = match cfg.raw("hetero_scale") {
        Some("area_scale") => None,
        _ => Some(cfg.positive("hetero_scale", 1.0)?),
    };
    let scenarios = cfg
        .list::<Scenario>("scenarios")?
        .unwrap_or_else(|| Scenario::ALL.to_vec());
    if scenarios.is_empty() {
        return Err(cfg.invalid("scenarios", "no scenarios listed"));
    }
    Ok(CostSetup {
        ref_node,
        new_node,
        opts: ScenarioOptions {
            cost: CostOptions {
                dpw_model,
                repair_floor,
            },
            kgd_tested: cfg.flag("kgd", true)?,
            bond_yield,
            assembly_cost,
            kgd_test_cost,
            hetero_scale,
        },
        scenarios,
    })
}

/// Sweep areas in ascending order: `areas = a, b, ...` or
/// `area_min`/`area_max`/`area_step` (default 100 to 900 by 100).
pub fn sweep_areas(cfg: &Config) -> Result<Vec<f64>, ConfigError> {
    let mut areas = match cfg.list::<f64>("areas")? {
        Some(a) => {
            if ["area_min", "area_max", "area_step"].iter().any(|k| cfg.contains(k)) {
                return Err(cfg.invalid("areas", "give either an area list or a range, not both"));
            }
            a
        }
        None => {
            let lo = cfg.positive("area_min", 100.0)?;
            let hi = cfg.positive("area_max", 900.0)?;
            let step = cfg.positive("area_step", 100.0)?;
            if hi < lo {
                return Err(cfg.invalid("area_max", "below area_min"));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            if n > 100_000 {
                return Err(cfg.invalid("area_step", "too many sweep points"));
            }
            (0..=n).map(|k| lo + k as f64 * step).collect()
        }
    };
    if areas.is_empty() {
        return Err(cfg.invalid("areas", "no areas listed"));
    }
    if let Some(bad) = areas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(cfg.invalid("areas", format!("area {bad} must be positive")));
    }
    areas.sort_by(f64::total_cmp);
    Ok(areas)
}

#[derive(Debug, Clone)]
pub struct CalibrateSetup {
    pub target: f64,
    pub total_area: f64,
    pub bounds: ShrinkBounds,
}

fn calibrate_setup(cfg: &Config, target_key: &str) -> Result<CalibrateSetup, ConfigError> {
    let d = ShrinkBounds::default();
    let target = cfg.number(target_key, 0.13)?;
    if !(-1.0..1.0).contains(&target) {
        return Err(cfg.invalid(target_key, "saving must be a fraction below 1"));
    }
    let bounds = ShrinkBounds {
        ratio_min: cfg.positive("ratio_min", d.ratio_min)?,
        ratio_max: cfg.positive("ratio_max", d.ratio_max)?,
        area_scale: cfg.positive("shrink_area_scale", d.area_scale)?,
    };
    if bounds.ratio_max < bounds.ratio_min {
        return Err(cfg.invalid("ratio_max", "below ratio_min"));
    }
    Ok(CalibrateSetup {
        target,
        total_area: cfg.positive("total_area", 500.0)?,
        bounds,
    })
}

/// Rows in scenario-major order over ascending areas; areas are costed in
/// parallel.
pub fn sweep_parallel(setup: &CostSetup, areas: &[f64]) -> Result<Vec<ScenarioRow>, CliError> {
    let per_area: Vec<Vec<ScenarioRow>> = areas
        .par_iter()
        .map(|&a| scenario_compare(a, &setup.ref_node, &setup.new_node, &setup.scenarios, &setup.opts))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::stage("cost", e))?;
    let mut rows = Vec::with_capacity(areas.len() * setup.scenarios.len());
    for si in 0..setup.scenarios.len() {
        for r in &per_area {
            rows.push(r[si].clone());
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
struct CostJsonRow {
    scenario: &'static str,
    total_area_mm2: f64,
    composite_yield: f64,
    total_cost: f64,
    saving_pct: f64,
}

/// CSV with six significant digits, or a JSON array at full precision.
pub fn cost_table(rows: &[ScenarioRow], format: Format) -> Result<Vec<u8>, CliError> {
    let io = |e: csv::Error| CliError::stage("output", e);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "scenario",
                "total_area_mm2",
                "composite_yield",
                "total_cost",
                "saving_pct",
            ])
            .map_err(io)?;
            for r in rows {
                w.write_record([
                    r.scenario.label().to_string(),
                    sig(r.total_area, 6),
                    sig(r.breakdown.composite_yield, 6),
                    sig(r.breakdown.total, 6),
                    sig(100.0 * r.saving, 6),
                ])
                .map_err(io)?;
            }
            w.into_inner().map_err(|e| CliError::stage("output", e))
        }
        Format::Json => {
            let j: Vec<CostJsonRow> = rows
                .iter()
                .map(|r| CostJsonRow {
                    scenario: r.scenario.label(),
                    total_area_mm2: r.total_area,
                    composite_yield: r.breakdown.composite_yield,
                    total_cost: r.breakdown.total,
                    saving_pct: 100.0 * r.saving,
                })
                .collect();
            json_bytes(&j).map_err(|e| CliError::stage("output", e))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SavingRow {
    pub scenario: &'static str,
    pub saving_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeteroPoint {
    pub hetero_scale: f64,
    pub saving_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub target_saving_pct: f64,
    pub total_area_mm2: f64,
    pub ref_node: String,
    pub new_node: String,
    #[serde(flatten)]
    pub calibration: Calibration,
    pub new_wafer_cost: f64,
    /// Savings of every scenario with the calibrated new node.
    pub savings: Vec<SavingRow>,
    /// 3D-hetero saving as the new-node half's area multiplier varies.
    pub hetero_sensitivity: Vec<HeteroPoint>,
}

pub fn calibrate(setup: &CostSetup, cal: &CalibrateSetup) -> Result<(CalibrationReport, TechNode), CliError> {
    let c = calibrate_shrink(
        cal.target,
        cal.total_area,
        &setup.ref_node,
        &setup.new_node,
        &cal.bounds,
        &setup.opts,
    )
    .map_err(|e| CliError::stage("calibrate", e))?;
    let new_node = c.apply(&setup.ref_node, &setup.new_node);
    let rows = scenario_compare(cal.total_area, &setup.ref_node, &new_node, &Scenario::ALL, &setup.opts)
        .map_err(|e| CliError::stage("calibrate", e))?;
    let hetero_sensitivity = (0..=10)
        .map(|k| {
            let h = (50 + 5 * k) as f64 / 100.0;
            let opts = ScenarioOptions {
                hetero_scale: Some(h),
                ..setup.opts
            };
            scenario_compare(
                cal.total_area,
                &setup.ref_node,
                &new_node,
                &[Scenario::ThreeDHetero],
                &opts,
            )
            .map(|r| HeteroPoint {
                hetero_scale: h,
                saving_pct: 100.0 * r[0].saving,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::stage("calibrate", e))?;
    Ok((
        CalibrationReport {
            target_saving_pct: 100.0 * cal.target,
            total_area_mm2: cal.total_area,
            ref_node: setup.ref_node.name.clone(),
            new_node: new_node.name.clone(),
            new_wafer_cost: new_node.wafer_cost,
            calibration: c,
            savings: rows
                .iter()
                .map(|r| SavingRow {
                    scenario: r.scenario.label(),
                    saving_pct: 100.0 * r.saving,
                })
                .collect(),
            hetero_sensitivity,
        },
        new_node,
    ))
}

pub fn run_cost(ctx: &RunContext) -> Result<Artifacts, CliError> {
    let cfg = &ctx.config;
    expect(cfg, &keys(&[&SWEEP_KEYS, &CALIBRATE_KEYS[1..]]))?;
    let mut setup = cost_setup(cfg)?;
    let areas = sweep_areas(cfg)?;
    let cal = if cfg.contains("calibrate_target") {
        Some(calibrate_setup(cfg, "calibrate_target")?)
    } else {
        for k in &CALIBRATE_KEYS[1..] {
            if cfg.contains(k) {
                return Err(cfg.invalid(k, "only used together with calibrate_target").into());
            }
        }
        None
    };
    let mut out = Artifacts::default();
    if let Some(cal) = cal {
        let (report, node) = calibrate(&setup, &cal)?;
        setup.new_node = node;
        out.add(
            "calibration.json",
            json_bytes(&report).map_err(|e| CliError::stage("output", e))?,
        );
    }
    let rows = sweep_parallel(&setup, &areas)?;
    out.add(format!("cost.{}", ctx.format.ext()), cost_table(&rows, ctx.format)?);
    Ok(out)
}

pub fn run_calibrate(ctx: &RunContext) -> Result<Artifacts, CliError> {
    let cfg = &ctx.config;
    expect(cfg, &keys(&[&CALIBRATE_KEYS]))?;
    let setup = cost_setup(cfg)?;
    let cal = calibrate_setup(cfg, "target_saving")?;
    let (report, _) = calibrate(&setup, &cal)?;
    let mut out = Artifacts::default();
    out.add(
        "calibration.json",
        json_bytes(&report).map_err(|e| CliError::stage("output", e))?,
    );
    out.add(
        format!("calibrated_savings.{}", ctx.format.ext()),
        table_bytes(&report.savings, ctx.format).map_err(|e| CliError::stage("output", e))?,
    );
    Ok(out)
}
