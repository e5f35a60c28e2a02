// SPDX-License-Identifier: Apache-2.0

//! Line-oriented netlist text format.
//!
//! ```text
//! cell <id> <area_um2> <delay_ns> [fixed <x> <y> <tier>]
//! net  <id> <cell_id> <cell_id> [...]
//! path <id> <required_ns> <cell_id> [...]
//! ```
//!
//! Records are whitespace delimited, `#` starts a comment, and sections
//! appear in the order cells, nets, paths.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::{valid_id, Cell, CellIdx, FixedPos, Net, Netlist, NetlistError, TimingPathSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Cells,
    Nets,
    Paths,
}

fn syntax(line: usize, msg: impl Into<String>) -> NetlistError {
    NetlistError::Syntax { line, msg: msg.into() }
}

fn number(line: usize, what: &str, tok: &str) -> Result<f64, NetlistError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| syntax(line, format!("{what}: expected a number, got `{tok}`")))?;
    if !v.is_finite() {
        return Err(syntax(line, format!("{what}: `{tok}` is not finite")));
    }
    Ok(v)
}

/// Parses and validates a netlist. Errors carry the 1-based line number of
/// the offending record.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut cells: Vec<Cell> = Vec::new();
    let mut nets: Vec<Net> = Vec::new();
    let mut paths: Vec<TimingPathSpec> = Vec::new();
    let mut cell_ids: HashMap<String, CellIdx> = HashMap::new();
    let mut net_ids: HashSet<String> = HashSet::new();
    let mut path_ids: HashSet<String> = HashSet::new();
    let mut section = Section::Cells;

    let lookup = |ids: &HashMap<String, CellIdx>, owner: &str, tok: &str| {
        ids.get(tok).copied().ok_or_else(|| NetlistError::DanglingPin {
            owner: owner.to_string(),
            cell: tok.to_string(),
        })
    };

    for (lno, raw) in text.lines().enumerate() {
        let line = lno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        let Some(&kind) = toks.first() else {
            continue;
        };
        let this = match kind {
            "cell" => Section::Cells,
            "net" => Section::Nets,
            "path" => Section::Paths,
            other => return Err(syntax(line, format!("unknown record `{other}`"))),
        };
        if this < section {
            return Err(syntax(
                line,
                format!("`{kind}` record after a later section; order is cells, nets, paths"),
            ));
        }
        section = this;

        match this {
            Section::Cells => {
                let fixed = match toks.len() {
                    4 => None,
                    8 if toks[4] == "fixed" => {
                        let tier = toks[7]
                            .parse::<usize>()
                            .map_err(|_| syntax(line, format!("tier: expected an integer, got `{}`", toks[7])))?;
                        Some(FixedPos {
                            x: number(line, "x", toks[5])?,
                            y: number(line, "y", toks[6])?,
                            tier,
                        })
                    }
                    _ => {
                        return Err(syntax(
                            line,
                            "expected `cell <id> <area> <delay> [fixed <x> <y> <tier>]`",
                        ))
                    }
                };
                let cell = Cell {
                    id: toks[1].to_string(),
                    area: number(line, "area", toks[2])?,
                    delay: number(line, "delay", toks[3])?,
                    fixed,
                };
                if cell_ids.contains_key(&cell.id) {
                    return Err(NetlistError::DuplicateId {
                        kind: "cell",
                        id: cell.id,
                    }
                    .at_line(line));
                }
                cell_ids.insert(cell.id.clone(), cells.len());
                cells.push(cell);
            }
            Section::Nets => {
                if toks.len() < 2 {
                    return Err(syntax(line, "expected `net <id> <cell_id> <cell_id> [...]`"));
                }
                let id = toks[1].to_string();
                if !valid_id(&id) {
                    return Err(NetlistError::InvalidId { kind: "net", id }.at_line(line));
                }
                if !net_ids.insert(id.clone()) {
                    return Err(NetlistError::DuplicateId { kind: "net", id }.at_line(line));
                }
                let mut pins = Vec::with_capacity(toks.len() - 2);
                for tok in &toks[2..] {
                    let c = lookup(&cell_ids, &id, tok).map_err(|e| e.at_line(line))?;
                    if pins.contains(&c) {
                        return Err(NetlistError::RepeatedPin {
                            net: id,
                            cell: tok.to_string(),
                        }
                        .at_line(line));
                    }
                    pins.push(c);
                }
                if pins.len() < 2 {
                    return Err(NetlistError::TooFewPins { net: id }.at_line(line));
                }
                nets.push(Net { id, pins });
            }
            Section::Paths => {
                if toks.len() < 4 {
                    return Err(syntax(line, "expected `path <id> <required_ns> <cell_id> [...]`"));
                }
                let id = toks[1].to_string();
                if !path_ids.insert(id.clone()) {
                    return Err(NetlistError::DuplicateId { kind: "path", id }.at_line(line));
                }
                let required_time = number(line, "required time", toks[2])?;
                let cells_on_path = toks[3..]
                    .iter()
                    .map(|tok| lookup(&cell_ids, &id, tok))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| e.at_line(line))?;
                paths.push(TimingPathSpec {
                    id,
                    cells: cells_on_path,
                    required_time,
                });
            }
        }
    }

    // Remaining semantic checks (values, path connectivity) run in the
    // constructor; map them back to the record that introduced them.
    let path_lines = locate_records(text, "path");
    let cell_lines = locate_records(text, "cell");
    Netlist::new(cells, nets, paths).map_err(|e| {
        let line = match &e {
            NetlistError::InvalidCell { cell, .. } | NetlistError::InvalidId { id: cell, .. } => {
                cell_lines.get(cell.as_str()).copied()
            }
            NetlistError::InvalidPath { path, .. } => path_lines.get(path.as_str()).copied(),
            _ => None,
        };
        match line {
            Some(l) => e.at_line(l),
            None => e,
        }
    })
}

fn locate_records<'a>(text: &'a str, kind: &str) -> HashMap<&'a str, usize> {
    let mut out = HashMap::new();
    for (lno, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        if toks.next() == Some(kind) {
            if let Some(id) = toks.next() {
                out.entry(id).or_insert(lno + 1);
            }
        }
    }
    out
}

/// Writes a netlist in the text format accepted by [`parse_netlist`].
/// Numbers use the shortest representation that parses back exactly.
pub fn serialize_netlist(nl: &Netlist) -> String {
    let mut out = String::new();
    for c in nl.cells() {
        let _ = write!(out, "cell {} {} {}", c.id, c.area, c.delay);
        if let Some(f) = c.fixed {
            let _ = write!(out, " fixed {} {} {}", f.x, f.y, f.tier);
        }
        out.push('\n');
    }
    for n in nl.nets() {
        out.push_str("net ");
        out.push_str(&n.id);
        for &p in &n.pins {
            out.push(' ');
            out.push_str(&nl.cell(p).id);
        }
        out.push('\n');
    }
    for p in nl.paths() {
        let _ = write!(out, "path {} {}", p.id, p.required_time);
        for &c in &p.cells {
            out.push(' ');
            out.push_str(&nl.cell(c).id);
        }
        out.push('\n');
    }
    out
}
