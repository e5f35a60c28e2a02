// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Deserialize;
use stack3d::netlist::{hpwl, parse_netlist, Placement, PlacementFile};
use stack3d_cli::flow::{PathRow, SummaryRow};
use stack3d_cli::roadmap::RoadmapPoint;
use tempfile::TempDir;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .display()
        .to_string()
}

/// Runs the command line in-process with `--out <dir>/out` appended.
fn run(dir: &TempDir, args: &[&str]) -> (i32, PathBuf) {
    let out = dir.path().join("out");
    let mut argv = vec!["stack3d".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.push("--out".into());
    argv.push(out.display().to_string());
    (stack3d_cli::run(argv), out)
}

fn write_cfg(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn files_under(dir: &Path) -> usize {
    if !dir.exists() {
        return 0;
    }
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() {
                files_under(&p)
            } else {
                1
            }
        })
        .sum()
}

#[derive(Debug, Deserialize)]
struct CostRow {
    scenario: String,
    total_area_mm2: f64,
    composite_yield: f64,
    total_cost: f64,
    saving_pct: f64,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Vec<T> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn roadmap_csv_round_trips() {
    let dir = TempDir::new().unwrap();
    let (code, out) = run(&dir, &["roadmap"]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(out.join("roadmap.csv")).unwrap();
    let (note, body) = text.split_once('\n').unwrap();
    assert!(note.starts_with("# density"), "{note}");
    let rows: Vec<RoadmapPoint> = csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    let got: Vec<(&str, f64)> = rows
        .iter()
        .map(|r| (r.technology.as_str(), r.density_per_mm2))
        .collect();
    let want = [("microbump", 625.0), ("hybrid_bonding", 1e4), ("monolithic", 1e8)];
    assert_eq!(got.len(), 3);
    for ((l, d), (wl, wd)) in got.iter().zip(want) {
        assert_eq!(*l, wl);
        assert!((d / wd - 1.0).abs() < 1e-3, "{l}: {d}");
    }
}

#[test]
fn roadmap_rejects_bad_pitch_and_keys() {
    let dir = TempDir::new().unwrap();
    for text in ["tech.a = 0", "tech.a = -3", "pitch = 5", "tech.a = x"] {
        let cfg = write_cfg(&dir, "r.cfg", text);
        let (code, out) = run(&dir, &["roadmap", "--config", &cfg]);
        assert_eq!(code, 2, "{text}");
        assert_eq!(files_under(&out), 0);
    }
}

#[test]
fn cost_sweep_round_trips() {
    let dir = TempDir::new().unwrap();
    let (code, out) = run(&dir, &["cost", "--config", &data("fig2_cost.cfg")]);
    assert_eq!(code, 0);
    let rows: Vec<CostRow> = read_csv(&out.join("cost.csv"));
    assert_eq!(rows.len(), 4 * 17);
    let mut by_area: BTreeMap<u64, Vec<&CostRow>> = BTreeMap::new();
    for r in &rows {
        assert!(r.composite_yield > 0.0 && r.composite_yield <= 1.0);
        assert!(r.total_cost > 0.0);
        by_area.entry(r.total_area_mm2 as u64).or_default().push(r);
    }
    assert_eq!(by_area.keys().next(), Some(&100));
    assert_eq!(by_area.keys().last(), Some(&900));
    for (area, rs) in &by_area {
        let get = |s: &str| rs.iter().find(|r| r.scenario == s).unwrap();
        assert_eq!(get("2D-ref").saving_pct, 0.0, "{area}");
        assert!(get("3D-split-ref").saving_pct > 0.0, "{area}");
    }
    let cal: serde_json::Value = serde_json::from_slice(&fs::read(out.join("calibration.json")).unwrap()).unwrap();
    let shrink = cal["savings"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["scenario"] == "2D-shrink")
        .unwrap()["saving_pct"]
        .as_f64()
        .unwrap();
    assert!((shrink - 13.0).abs() < 0.1, "{shrink}");
}

#[test]
fn early_node_costs_more_at_equal_area() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(
        &dir,
        "c.cfg",
        "ref.d0 = 0.15\nref.wafer_cost = 1\nnew.d0 = 0.2\nnew.wafer_cost = 1.3\nnew.area_scale = 1\n\
         scenarios = 2D-ref, 2D-shrink\narea_min = 100\narea_max = 900\narea_step = 100\n",
    );
    let (code, out) = run(&dir, &["cost", "--config", &cfg]);
    assert_eq!(code, 0);
    let rows: Vec<CostRow> = read_csv(&out.join("cost.csv"));
    let (old, new): (Vec<&CostRow>, Vec<&CostRow>) = rows.iter().partition(|r| r.scenario == "2D-ref");
    assert_eq!(old.len(), 9);
    for (o, n) in old.iter().zip(&new) {
        assert_eq!(o.total_area_mm2, n.total_area_mm2);
        assert!(
            n.total_cost > o.total_cost,
            "{} mm²: {} vs {}",
            o.total_area_mm2,
            n.total_cost,
            o.total_cost
        );
    }
}

#[test]
fn cost_json_matches_csv() {
    let dir = TempDir::new().unwrap();
    let (_, csv_out) = run(&dir, &["cost"]);
    let rows: Vec<CostRow> = read_csv(&csv_out.join("cost.csv"));
    let dir2 = TempDir::new().unwrap();
    let (code, json_out) = run(&dir2, &["cost", "--format", "json"]);
    assert_eq!(code, 0);
    let json: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(json_out.join("cost.json")).unwrap()).unwrap();
    assert_eq!(json.len(), rows.len());
    for (c, j) in rows.iter().zip(&json) {
        assert_eq!(j["scenario"], c.scenario.as_str());
        let full = j["total_cost"].as_f64().unwrap();
        assert!((full - c.total_cost).abs() <= 1e-5 * full);
    }
}

#[test]
fn config_errors_exit_two_without_artifacts() {
    let dir = TempDir::new().unwrap();
    for (sub, text) in [
        ("cost", "scenarios = ,"),
        ("cost", "ref.d0 = 0.1\nref.d0 = 0.2"),
        ("cost", "bogus = 1"),
        ("cost", "ref.d0 = lots"),
        ("cost", "no equals sign"),
        ("pdn", "footprint_scale = 1.5"),
        ("calibrate", "target_saving = 2"),
        ("flow", "n_cells = 1"),
    ] {
        let cfg = write_cfg(&dir, "bad.cfg", text);
        let (code, out) = run(&dir, &[sub, "--config", &cfg]);
        assert_eq!(code, 2, "{sub}: {text}");
        assert_eq!(files_under(&out), 0, "{sub}: {text}");
    }
    assert_eq!(run(&dir, &["cost", "--config", "/nonexistent.cfg"]).0, 2);
    assert_eq!(run(&dir, &["flow", "--seed", "5-1"]).0, 2);
    assert_eq!(run(&dir, &["cost", "--jobs", "0"]).0, 2);
    assert_eq!(run(&dir, &["frobnicate"]).0, 2);
}

#[test]
fn missing_netlist_is_clean_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_stack3d"))
        .args(["flow", "--netlist", "/nonexistent/design.net", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:") && err.contains("design.net"), "{err}");
    assert_eq!(files_under(&out), 0);

    let bad = write_cfg(&dir, "bad.net", "cell a 1 0\nnet n a ghost\n");
    assert_eq!(run(&dir, &["flow", "--netlist", &bad]).0, 2);
    assert_eq!(files_under(&out), 0);
}

#[test]
fn stage_failure_exits_three_without_artifacts() {
    let dir = TempDir::new().unwrap();
    // one cell holds most of the area, so no split is within 5% of even
    let net = write_cfg(
        &dir,
        "lopsided.net",
        "cell a 20 0\ncell b 1 0\ncell c 1 0\nnet n1 a b\nnet n2 b c\n",
    );
    let cfg = write_cfg(&dir, "f.cfg", "balance_tol = 0.05\n");
    let o = Command::new(env!("CARGO_BIN_EXE_stack3d"))
        .args(["flow", "--netlist", &net, "--config", &cfg, "--seed", "1-3", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("partition"), "{err}");
    assert_eq!(files_under(&dir.path().join("out")), 0);
}

#[test]
fn chain_fixture_end_to_end() {
    let dir = TempDir::new().unwrap();
    let net = data("chain4.net");
    let (code, out) = run(
        &dir,
        &[
            "flow",
            "--netlist",
            &net,
            "--config",
            &data("chain4.cfg"),
            "--seed",
            "1-4",
        ],
    );
    assert_eq!(code, 0);
    let summary: Vec<SummaryRow> = read_csv(&out.join("flow_summary.csv"));
    assert_eq!(summary.iter().map(|r| r.seed).collect::<Vec<_>>(), [1, 2, 3, 4]);
    let nl = parse_netlist(&fs::read_to_string(&net).unwrap()).unwrap();
    for r in &summary {
        assert_eq!((r.cut_nets, r.vias), (1, 1), "seed {}", r.seed);
        let seed_dir = out.join(format!("seed_{}", r.seed));
        for f in [
            "placement_2d.txt",
            "placement_3d.txt",
            "paths.csv",
            "stats.json",
            "pdn_2d.json",
            "pdn_3d.json",
            "pdn.csv",
        ] {
            assert!(seed_dir.join(f).is_file(), "{f}");
        }
        let file = PlacementFile::parse(&fs::read_to_string(seed_dir.join("placement_3d.txt")).unwrap()).unwrap();
        assert_eq!(file.header.cut_nets, Some(1));
        assert_eq!(file.header.seed, Some(r.seed));
        let pl = Placement::from_file(&file, &nl).unwrap();
        pl.validate(&nl).unwrap();
        assert!((hpwl(&nl, &pl).unwrap() - r.hpwl_3d_um).abs() <= 1e-9 * r.hpwl_3d_um.max(1.0));

        let paths: Vec<PathRow> = read_csv(&seed_dir.join("paths.csv"));
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].design, "2d");
        assert_eq!(paths[1].design, "3d");
        for p in &paths {
            assert_eq!((p.path_id.as_str(), p.n_cells), ("p0", 4));
            assert!((p.slack_ns + p.delay_ns - 0.5).abs() < 1e-12);
        }
        assert_eq!(paths[1].length_um, r.max_length_3d_um);
        let stats: serde_json::Value = serde_json::from_slice(&fs::read(seed_dir.join("stats.json")).unwrap()).unwrap();
        assert_eq!(stats["vias"], 1);
        assert_eq!(stats["partition_cut_nets"], 1);
    }
}

#[test]
fn flow_json_summary_parses() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(&dir, "f.cfg", "n_cells = 120\n");
    let (code, out) = run(
        &dir,
        &[
            "flow", "--config", &cfg, "--seed", "3,1", "--format", "json", "--jobs", "2",
        ],
    );
    assert_eq!(code, 0);
    let rows: Vec<SummaryRow> = serde_json::from_slice(&fs::read(out.join("flow_summary.json")).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), [3, 1]);
    for r in &rows {
        assert_eq!(r.cells, 120);
        assert!(r.vias >= r.cut_nets);
        assert!(out.join(format!("seed_{}/paths.json", r.seed)).is_file());
    }
}

#[test]
fn pdn_reports_both_footprints() {
    let dir = TempDir::new().unwrap();
    let (code, out) = run(&dir, &["pdn", "--config", &data("pdn.cfg")]);
    assert_eq!(code, 0);
    #[derive(Deserialize)]
    struct Row {
        design: String,
        footprint_mm2: f64,
        bump_count: u64,
        #[serde(rename = "current_per_bump_A")]
        current: f64,
        #[serde(rename = "power_density_W_mm2")]
        density: f64,
    }
    let rows: Vec<Row> = read_csv(&out.join("pdn.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].design.as_str(), rows[1].design.as_str()), ("2d", "3d"));
    assert_eq!(rows[1].footprint_mm2 * 2.0, rows[0].footprint_mm2);
    assert!(rows[1].bump_count < rows[0].bump_count);
    assert!(rows[1].current > rows[0].current);
    assert_eq!(rows[1].density / rows[0].density, 2.0);
}

#[test]
fn repeated_runs_are_identical() {
    let read_all = |out: &Path| -> Vec<(String, Vec<u8>)> {
        let mut v: Vec<_> = fs::read_dir(out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
            .collect();
        v.sort();
        v
    };
    for args in [
        &["calibrate"][..],
        &["roadmap", "--format", "json"],
        &["pdn", "--config", &data("pdn.cfg")],
    ] {
        let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        let (ca, oa) = run(&a, args);
        let (cb, ob) = run(&b, args);
        assert_eq!((ca, cb), (0, 0));
        assert_eq!(read_all(&oa), read_all(&ob), "{args:?}");
    }
}
