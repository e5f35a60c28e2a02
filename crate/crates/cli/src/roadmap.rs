// SPDX-License-Identifier: Apache-2.0

//! `roadmap`: vertical connection density for a set of 3D interconnect
//! pitches. Config keys are `tech.<label> = <pitch_um>`; labels are listed
//! in key order.

use serde::{Deserialize, Serialize};

use crate::output::{json_bytes, sig, Artifacts, Format};
use crate::{CliError, RunContext};

pub const DENSITY_NOTE: &str =
    "density = (1000 / pitch_um)^2 connections per mm^2, assuming a square grid at the given pitch";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadmapPoint {
    pub technology: String,
    pub pitch_um: f64,
    pub density_per_mm2: f64,
}

/// Microbumps, hybrid bonding and monolithic integration.
pub fn default_points() -> Vec<(String, f64)> {
    vec![
        ("microbump".into(), 40.0),
        ("hybrid_bonding".into(), 10.0),
        ("monolithic".into(), 0.1),
    ]
}

/// One point per technology, coarsest pitch first; equal pitches keep
/// their input order.
pub fn roadmap_table(points: &[(String, f64)]) -> Result<Vec<RoadmapPoint>, String> {
    let mut out = Vec::with_capacity(points.len());
    for (label, pitch) in points {
        if !(*pitch > 0.0 && pitch.is_finite()) {
            return Err(format!("technology `{label}`: pitch {pitch} µm must be positive"));
        }
        let per_mm = 1000.0 / pitch;
        out.push(RoadmapPoint {
            technology: label.clone(),
            pitch_um: *pitch,
            density_per_mm2: per_mm * per_mm,
        });
    }
    out.sort_by(|a, b| b.pitch_um.total_cmp(&a.pitch_um));
    Ok(out)
}

#[derive(Serialize)]
struct RoadmapJson<'a> {
    note: &'static str,
    points: &'a [RoadmapPoint],
}

pub fn roadmap_bytes(points: &[RoadmapPoint], format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| CliError::stage("output", e);
            w.write_record(["technology", "pitch_um", "density_per_mm2"])
                .map_err(err)?;
            for p in points {
                w.write_record([p.technology.clone(), sig(p.pitch_um, 6), sig(p.density_per_mm2, 6)])
                    .map_err(err)?;
            }
            let body = w.into_inner().map_err(|e| CliError::stage("output", e))?;
            let mut out = format!("# {DENSITY_NOTE}\n").into_bytes();
            out.extend(body);
            Ok(out)
        }
        Format::Json => json_bytes(&RoadmapJson {
            note: DENSITY_NOTE,
            points,
        })
        .map_err(|e| CliError::stage("output", e)),
    }
}

pub fn run_roadmap(ctx: &RunContext) -> Result<Artifacts, CliError> {
    let cfg = &ctx.config;
    let mut points = Vec::new();
    for k in cfg.keys() {
        let label = match k.strip_prefix("tech.") {
            Some(l) if !l.is_empty() => l,
            _ => return Err(cfg.unknown(k).into()),
        };
        let pitch: f64 = cfg.get(k, 0.0)?;
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(cfg.invalid(k, format!("pitch {pitch} µm must be positive")).into());
        }
        points.push((label.to_string(), pitch));
    }
    if points.is_empty() {
        points = default_points();
    }
    let table = roadmap_table(&points).map_err(|m| CliError::stage("roadmap", m))?;
    let mut out = Artifacts::default();
    out.add(
        format!("roadmap.{}", ctx.format.ext()),
        roadmap_bytes(&table, ctx.format)?,
    );
    Ok(out)
}
