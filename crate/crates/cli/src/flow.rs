// SPDX-License-Identifier: Apache-2.0

//! `flow`: 2D placement against FM tier partitioning plus 3D placement,
//! legalization, path timing and power delivery for both designs.
//!
//! Per seed the run writes `seed_<s>/` with both placements, the path
//! table, `stats.json` and the PDN reports; `flow_summary` has one row per
//! seed in the order the seeds were given.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stack3d::netlist::synth::{generate_synthetic, SynthParams};
use stack3d::netlist::{hpwl, parse_netlist, Netlist, Placement, PlacementHeader};
use stack3d::pdn::{loads_from_placement, PdnReport, PdnSpec};
use stack3d::tier::{
    coplace, count_3d_vias, cut_size, fm_bipartition_with, legalize, place_2d, via_density_check, FmOptions,
    PlaceConfig, ViaCheck,
};
use stack3d::timing::{evaluate_paths, path_stats, DelayModel, PathRecord, PathStats};

use crate::config::Config;
use crate::output::{json_bytes, table_bytes, Artifacts, Format};
use crate::pdn_cmd::{illustrative, node_csv, pdn_spec, report, PdnRow, PDN_FIELDS};
use crate::{read_input, CliError, RunContext};

const FLOW_KEYS: &[&str] = &[
    "netlist",
    "n_cells",
    "rent_exponent",
    "avg_fanout",
    "footprint_scale",
    "utilization",
    "t0",
    "cooling",
    "moves_per_cell",
    "stop_acceptance",
    "max_temperatures",
    "balance_tol",
    "via_penalty",
    "tier_move_prob",
    "fm_starts",
    "legalize",
    "row_pitch",
    "via_pitch",
    "wire_delay_per_um",
    "tier_hop_delay",
    "pdn.dump_nodes",
];

#[derive(Debug, Clone)]
pub enum NetlistSource {
    File {
        path: PathBuf,
        netlist: Netlist,
        text: String,
    },
    Synthetic {
        n_cells: usize,
        rent_exponent: f64,
        avg_fanout: f64,
    },
}

#[derive(Debug, Clone)]
pub struct FlowSetup {
    pub source: NetlistSource,
    pub place: PlaceConfig,
    pub legalize: bool,
    pub row_pitch: Option<f64>,
    /// µm
    pub via_pitch: f64,
    pub delay: DelayModel,
    pub pdn: PdnSpec,
    pub pdn_illustrative: bool,
    pub dump_nodes: bool,
    pub config_hash: String,
}

pub fn flow_setup(cfg: &Config, netlist_flag: Option<&Path>) -> Result<FlowSetup, CliError> {
    let mut known: Vec<String> = FLOW_KEYS.iter().map(|s| s.to_string()).collect();
    known.extend(PDN_FIELDS.iter().map(|f| format!("pdn.{f}")));
    let refs: Vec<&str> = known.iter().map(String::as_str).collect();
    cfg.expect_keys(&refs)?;

    let path = match (netlist_flag, cfg.raw("netlist")) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(p)) => Some(PathBuf::from(p)),
        (None, None) => None,
    };
    let source = match path {
        Some(path) => {
            for k in ["n_cells", "rent_exponent", "avg_fanout"] {
                if cfg.contains(k) {
                    return Err(cfg
                        .invalid(k, "synthetic netlist parameters conflict with a netlist file")
                        .into());
                }
            }
            let text = read_input(&path)?;
            let netlist = parse_netlist(&text).map_err(|e| CliError::Input {
                path: path.clone(),
                msg: e.to_string(),
            })?;
            NetlistSource::File { path, netlist, text }
        }
        None => {
            let n_cells: usize = cfg.get("n_cells", 1000)?;
            let rent_exponent = cfg.number("rent_exponent", 0.6)?;
            let avg_fanout = cfg.number("avg_fanout", 3.0)?;
            SynthParams::new(n_cells, rent_exponent, avg_fanout, 0)
                .validate()
                .map_err(|e| cfg.invalid("n_cells", e.to_string()))?;
            NetlistSource::Synthetic {
                n_cells,
                rent_exponent,
                avg_fanout,
            }
        }
    };

    let d = PlaceConfig::default();
    let place = PlaceConfig {
        footprint_scale: cfg.positive("footprint_scale", d.footprint_scale)?,
        num_tiers: 2,
        seed: 0,
        utilization: cfg.positive("utilization", d.utilization)?,
        t0: cfg.opt("t0")?,
        cooling: cfg.number("cooling", d.cooling)?,
        moves_per_cell: cfg.positive("moves_per_cell", d.moves_per_cell)?,
        stop_acceptance: cfg.number("stop_acceptance", d.stop_acceptance)?,
        max_temperatures: cfg.get("max_temperatures", d.max_temperatures)?,
        balance_tol: cfg.number("balance_tol", d.balance_tol)?,
        via_penalty: cfg.number("via_penalty", d.via_penalty)?,
        tier_move_prob: cfg.number("tier_move_prob", d.tier_move_prob)?,
        fm_starts: cfg.get("fm_starts", d.fm_starts)?,
        record_moves: false,
    };
    place
        .validate()
        .map_err(|e| cfg.invalid("footprint_scale", e.to_string()))?;
    let delay = DelayModel {
        wire_delay_per_um: cfg.number("wire_delay_per_um", DelayModel::default().wire_delay_per_um)?,
        tier_hop_delay: cfg.number("tier_hop_delay", 0.0)?,
    };
    delay
        .validate()
        .map_err(|e| cfg.invalid("wire_delay_per_um", e.to_string()))?;
    let pdn = pdn_spec(cfg, "pdn.", Some(0.02))?;
    PdnSpec {
        footprint: pdn.footprint * place.footprint_scale,
        ..pdn.clone()
    }
    .bumps_per_side()
    .map_err(|e| cfg.invalid("pdn.bump_pitch", format!("3D footprint: {e}")))?;

    let extra = match &source {
        NetlistSource::File { text, .. } => text.as_bytes().to_vec(),
        NetlistSource::Synthetic { .. } => Vec::new(),
    };
    Ok(FlowSetup {
        place,
        legalize: cfg.flag("legalize", true)?,
        row_pitch: cfg
            .opt::<f64>("row_pitch")?
            .map(|p| {
                if p > 0.0 && p.is_finite() {
                    Ok(p)
                } else {
                    Err(cfg.invalid("row_pitch", "must be positive"))
                }
            })
            .transpose()?,
        via_pitch: cfg.positive("via_pitch", 1.0)?,
        delay,
        pdn_illustrative: illustrative(cfg, "pdn."),
        pdn,
        dump_nodes: cfg.flag("pdn.dump_nodes", false)?,
        config_hash: cfg.hash("flow", &extra),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub cells: usize,
    pub nets: usize,
    pub paths: usize,
    pub hpwl_2d_um: f64,
    pub hpwl_3d_um: f64,
    pub cut_nets: usize,
    pub vias: usize,
    pub max_length_2d_um: f64,
    pub max_length_3d_um: f64,
    pub delta_max_length_um: f64,
    pub failing_2d: usize,
    pub failing_3d: usize,
    pub delta_failing: i64,
    pub stddev_length_2d_um: f64,
    pub stddev_length_3d_um: f64,
    pub delta_stddev_length_um: f64,
    #[serde(rename = "worst_ir_drop_2d_mV")]
    pub worst_ir_drop_2d: Option<f64>,
    #[serde(rename = "worst_ir_drop_3d_mV")]
    pub worst_ir_drop_3d: Option<f64>,
}

/// A path record tagged with its design, in the path CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub path_id: String,
    pub n_cells: usize,
    pub length_um: f64,
    pub delay_ns: f64,
    pub slack_ns: f64,
    pub design: String,
}

impl PathRow {
    fn new(r: &PathRecord, design: &str) -> Self {
        Self {
            path_id: r.path_id.clone(),
            n_cells: r.n_cells,
            length_um: r.length,
            delay_ns: r.delay,
            slack_ns: r.slack,
            design: design.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Stats<'a> {
    seed: u64,
    config_hash: &'a str,
    hpwl_2d_um: f64,
    hpwl_3d_um: f64,
    partition_cut_nets: usize,
    cut_nets: usize,
    vias: usize,
    via_check: ViaCheck,
    #[serde(flatten)]
    paths: &'a PathStats,
}

/// Everything computed for one seed.
#[derive(Debug)]
pub struct SeedRun {
    pub summary: SummaryRow,
    pub placement_2d: Placement,
    pub placement_3d: Placement,
    pub stats: PathStats,
    pub pdn_2d: PdnReport,
    pub pdn_3d: PdnReport,
    pub artifacts: Artifacts,
}

/// Row pitch nearest `base` that divides `height` into whole rows.
pub fn fitted_pitch(height: f64, base: f64) -> f64 {
    height / (height / base).round().max(1.0)
}

fn err(stage: &'static str) -> impl Fn(String) -> CliError {
    move |m| CliError::Stage { stage, msg: m }
}

pub fn run_seed(setup: &FlowSetup, seed: u64, format: Format) -> Result<SeedRun, CliError> {
    let synth;
    let nl = match &setup.source {
        NetlistSource::File { netlist, .. } => netlist,
        NetlistSource::Synthetic {
            n_cells,
            rent_exponent,
            avg_fanout,
        } => {
            synth = generate_synthetic(&SynthParams::new(*n_cells, *rent_exponent, *avg_fanout, seed))
                .map_err(|e| CliError::stage("netlist", e))?;
            &synth
        }
    };
    let cfg = PlaceConfig {
        seed,
        ..setup.place.clone()
    };
    let p2 = place_2d(nl, &cfg).map_err(|e| CliError::stage("place_2d", e))?;
    let assignment = fm_bipartition_with(
        nl,
        &FmOptions {
            balance_tol: cfg.balance_tol,
            seed,
            starts: cfg.fm_starts,
            ..FmOptions::default()
        },
    )
    .map_err(|e| CliError::stage("partition", e))?;
    let p3 = coplace(nl, &assignment, &cfg).map_err(|e| CliError::stage("place_3d", e))?;
    let (p2, p3) = if setup.legalize {
        let base = (nl.total_area() / nl.num_cells() as f64).sqrt();
        let pitch = |pl: &Placement| match setup.row_pitch {
            Some(p) => p,
            None => fitted_pitch(pl.height, base),
        };
        (
            legalize(nl, &p2, pitch(&p2)).map_err(|e| CliError::stage("legalize_2d", e))?,
            legalize(nl, &p3, pitch(&p3)).map_err(|e| CliError::stage("legalize_3d", e))?,
        )
    } else {
        (p2, p3)
    };

    let hpwl_2d = hpwl(nl, &p2).map_err(|e| CliError::stage("place_2d", e))?;
    let hpwl_3d = hpwl(nl, &p3).map_err(|e| CliError::stage("place_3d", e))?;
    let vias = count_3d_vias(nl, &p3).map_err(|e| CliError::stage("place_3d", e))?;
    let tiers = (0..nl.num_cells())
        .map(|i| p3.loc(nl, i).map(|l| l.tier))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::stage("place_3d", e))?;
    // the annealer may move cells across tiers, so the final cut can differ from the partition's
    let cut_nets = cut_size(nl, &tiers);
    let via_check = via_density_check(vias, p3.footprint_area() / 1e6, setup.via_pitch)
        .map_err(|e| CliError::stage("place_3d", e))?;
    let r2 = evaluate_paths(nl, &p2, &setup.delay).map_err(|e| CliError::stage("timing_2d", e))?;
    let r3 = evaluate_paths(nl, &p3, &setup.delay).map_err(|e| CliError::stage("timing_3d", e))?;
    let stats = path_stats(&r2, &r3).map_err(|e| CliError::stage("path_stats", e))?;

    let spec_2d = setup.pdn.clone();
    let spec_3d = PdnSpec {
        footprint: spec_2d.footprint * p3.footprint_area() / p2.footprint_area(),
        ..spec_2d.clone()
    };
    let mut artifacts = Artifacts::default();
    let mut pdn = Vec::new();
    for (design, stage, spec, pl) in [("2d", "pdn_2d", &spec_2d, &p2), ("3d", "pdn_3d", &spec_3d, &p3)] {
        let loads = loads_from_placement(nl, pl, spec).map_err(|e| CliError::stage(stage, e))?;
        let (r, ir) = report(stage, spec, &loads)?;
        artifacts.add(format!("pdn_{design}.json"), json_bytes(&r).map_err(err("output"))?);
        if let (true, Some(ir)) = (setup.dump_nodes, &ir) {
            artifacts.add(format!("nodes_{design}.csv"), node_csv(ir, spec)?);
        }
        pdn.push((PdnRow::new(design, spec, &r, setup.pdn_illustrative), r));
    }

    let header = |hp: f64, cut: Option<usize>| PlacementHeader {
        seed: Some(seed),
        config_hash: Some(setup.config_hash.clone()),
        hpwl_um: Some(hp),
        cut_nets: cut,
        ..Default::default()
    };
    artifacts.add("placement_2d.txt", p2.to_file(nl, &header(hpwl_2d, None)).into_bytes());
    artifacts.add(
        "placement_3d.txt",
        p3.to_file(nl, &header(hpwl_3d, Some(cut_nets))).into_bytes(),
    );
    let rows: Vec<PathRow> = r2
        .iter()
        .map(|r| PathRow::new(r, "2d"))
        .chain(r3.iter().map(|r| PathRow::new(r, "3d")))
        .collect();
    artifacts.add(
        format!("paths.{}", format.ext()),
        table_bytes(&rows, format).map_err(err("output"))?,
    );
    let stats_json = Stats {
        seed,
        config_hash: &setup.config_hash,
        hpwl_2d_um: hpwl_2d,
        hpwl_3d_um: hpwl_3d,
        partition_cut_nets: assignment.cut_nets,
        cut_nets,
        vias,
        via_check,
        paths: &stats,
    };
    artifacts.add("stats.json", json_bytes(&stats_json).map_err(err("output"))?);
    let pdn_rows: Vec<&PdnRow> = pdn.iter().map(|(row, _)| row).collect();
    artifacts.add(
        format!("pdn.{}", format.ext()),
        table_bytes(&pdn_rows, format).map_err(err("output"))?,
    );

    let (pdn_2d, pdn_3d) = (pdn[0].1.clone(), pdn[1].1.clone());
    let summary = SummaryRow {
        seed,
        cells: nl.num_cells(),
        nets: nl.nets().len(),
        paths: nl.paths().len(),
        hpwl_2d_um: hpwl_2d,
        hpwl_3d_um: hpwl_3d,
        cut_nets,
        vias,
        max_length_2d_um: stats.design_2d.max_length_um,
        max_length_3d_um: stats.design_3d.max_length_um,
        delta_max_length_um: stats.delta_max_length_um,
        failing_2d: stats.design_2d.failing,
        failing_3d: stats.design_3d.failing,
        delta_failing: stats.delta_failing,
        stddev_length_2d_um: stats.design_2d.stddev_length_um,
        stddev_length_3d_um: stats.design_3d.stddev_length_um,
        delta_stddev_length_um: stats.delta_stddev_length_um,
        worst_ir_drop_2d: pdn_2d.worst_ir_drop,
        worst_ir_drop_3d: pdn_3d.worst_ir_drop,
    };
    Ok(SeedRun {
        summary,
        placement_2d: p2,
        placement_3d: p3,
        stats,
        pdn_2d,
        pdn_3d,
        artifacts,
    })
}

/// Runs every seed on the current worker pool. Results keep seed order and
/// the first failing seed (in that order) decides the error.
pub fn run_seeds(setup: &FlowSetup, seeds: &[u64], format: Format) -> Result<Vec<SeedRun>, CliError> {
    seeds
        .par_iter()
        .map(|&s| run_seed(setup, s, format))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

pub fn run_flow(ctx: &RunContext, netlist: Option<&Path>) -> Result<Artifacts, CliError> {
    let setup = flow_setup(&ctx.config, netlist)?;
    let runs = run_seeds(&setup, &ctx.seeds, ctx.format)?;
    let mut out = Artifacts::default();
    let mut summary = Vec::with_capacity(runs.len());
    for run in runs {
        summary.push(run.summary.clone());
        out.extend(Path::new(&format!("seed_{}", run.summary.seed)), run.artifacts);
    }
    out.add(
        format!("flow_summary.{}", ctx.format.ext()),
        table_bytes(&summary, ctx.format).map_err(err("output"))?,
    );
    Ok(out)
}
