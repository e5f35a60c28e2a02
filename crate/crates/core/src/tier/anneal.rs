// SPDX-License-Identifier: Apache-2.0

//! Simulated-annealing placement on a slot grid, one grid per tier, over a
//! footprint shared by all tiers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{movable, PlaceConfig, TierAssignment, TierError};
use crate::netlist::{CellIdx, Loc, Netlist, Placement};

const NONE: u32 = u32::MAX;

/// An accepted move: `cell` went from `from_tier` to `to_tier`, and
/// `partner`, if any, went the other way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MoveRecord {
    pub cell: CellIdx,
    pub from_tier: usize,
    pub to_tier: usize,
    pub partner: Option<CellIdx>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    pub placement: Placement,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Best cost seen after each temperature.
    pub best_trace: Vec<f64>,
    pub temperatures: usize,
    pub initial_tiers: Vec<usize>,
    /// Accepted moves, when `record_moves` is set.
    pub moves: Vec<MoveRecord>,
}

/// Places all cells on a footprint `footprint_scale` times the 2D one,
/// starting from `assignment` and allowing cross-tier moves that keep the
/// balance band.
pub fn coplace(nl: &Netlist, assignment: &TierAssignment, cfg: &PlaceConfig) -> Result<Placement, TierError> {
    coplace_detailed(nl, assignment, cfg).map(|o| o.placement)
}

pub fn coplace_detailed(
    nl: &Netlist,
    assignment: &TierAssignment,
    cfg: &PlaceConfig,
) -> Result<AnnealOutcome, TierError> {
    cfg.validate()?;
    if assignment.num_tiers != cfg.num_tiers {
        return Err(TierError::InvalidConfig(format!(
            "assignment has {} tiers, configuration {}",
            assignment.num_tiers, cfg.num_tiers
        )));
    }
    let side = cfg.side_2d(nl) * cfg.footprint_scale.sqrt();
    run(nl, assignment.tier_of.clone(), assignment.num_tiers, side, cfg)
}

/// Single-tier placement on the full 2D footprint. `footprint_scale` and
/// `num_tiers` in `cfg` are ignored.
pub fn place_2d(nl: &Netlist, cfg: &PlaceConfig) -> Result<Placement, TierError> {
    place_2d_detailed(nl, cfg).map(|o| o.placement)
}

pub fn place_2d_detailed(nl: &Netlist, cfg: &PlaceConfig) -> Result<AnnealOutcome, TierError> {
    let cfg = PlaceConfig {
        footprint_scale: 1.0,
        num_tiers: 1,
        ..cfg.clone()
    };
    cfg.validate()?;
    run(nl, vec![0; nl.num_cells()], 1, cfg.side_2d(nl), &cfg)
}

fn run(
    nl: &Netlist,
    tiers: Vec<usize>,
    num_tiers: usize,
    side: f64,
    cfg: &PlaceConfig,
) -> Result<AnnealOutcome, TierError> {
    let n = nl.num_cells();
    if n == 0 {
        return Err(TierError::Empty);
    }
    if tiers.len() != n || tiers.iter().any(|&t| t >= num_tiers) {
        return Err(TierError::BadAssignment(format!(
            "assignment does not place {n} cells on {num_tiers} tiers"
        )));
    }
    let fp_area = side * side;
    let mut tier_area = vec![0.0; num_tiers];
    for (i, &t) in tiers.iter().enumerate() {
        tier_area[t] += nl.cell(i).area;
        if let Some(f) = nl.cell(i).fixed {
            if f.tier != t {
                return Err(TierError::BadAssignment(format!(
                    "fixed cell `{}` belongs on tier {} not {t}",
                    nl.cell(i).id,
                    f.tier
                )));
            }
            if !(0.0..=side).contains(&f.x) || !(0.0..=side).contains(&f.y) {
                return Err(TierError::InvalidConfig(format!(
                    "fixed cell `{}` at ({}, {}) lies outside the {side} µm footprint",
                    nl.cell(i).id,
                    f.x,
                    f.y
                )));
            }
        }
    }
    for (t, &a) in tier_area.iter().enumerate() {
        if a > fp_area * (1.0 + 1e-12) {
            return Err(TierError::Overflow {
                tier: t,
                area: a,
                capacity: fp_area,
            });
        }
    }

    let free = movable(nl);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut st = State::new(nl, tiers, num_tiers, side, &free, cfg, &mut rng);
    let initial_tiers = st.tier.clone();
    let initial_cost = st.total();

    let mut best_trace = Vec::new();
    let mut moves = Vec::new();
    let mut temperatures = 0;
    if free.len() >= 2 && !nl.nets().is_empty() && initial_cost > 0.0 {
        let mut best = st.snapshot();
        let mut best_cost = initial_cost;
        let r_max = st.grid.cols.max(st.grid.rows) as f64;
        let mut r = r_max;
        let mut temp = match cfg.t0 {
            Some(t) => t,
            None => st.initial_temperature(&mut rng, r_max),
        };
        let attempts = (cfg.moves_per_cell * free.len() as f64).ceil() as usize;
        let log = cfg.record_moves.then_some(&mut moves);
        let mut log = log;
        loop {
            let mut accepted = 0usize;
            for _ in 0..attempts {
                if st.step(&mut rng, r, temp, log.as_deref_mut()) {
                    accepted += 1;
                }
            }
            let cost = st.total();
            if cost < best_cost {
                best_cost = cost;
                best = st.snapshot();
            }
            best_trace.push(best_cost);
            temperatures += 1;
            let acc = accepted as f64 / attempts as f64;
            r = (r * (1.0 - 0.44 + acc)).clamp(1.0, r_max);
            temp *= cfg.cooling;
            let frozen = temp < 0.005 * cost / nl.nets().len() as f64;
            if acc < cfg.stop_acceptance || frozen || cost == 0.0 || temperatures >= cfg.max_temperatures {
                break;
            }
        }
        st.restore(best);
    }
    let final_cost = st.total();
    Ok(AnnealOutcome {
        placement: st.placement(),
        initial_cost,
        final_cost,
        best_trace,
        temperatures,
        initial_tiers,
        moves,
    })
}

struct Grid {
    cols: usize,
    rows: usize,
    px: f64,
    py: f64,
}

impl Grid {
    fn per_tier(&self) -> usize {
        self.cols * self.rows
    }

    fn center(&self, slot: usize) -> (f64, f64, usize) {
        let t = slot / self.per_tier();
        let k = slot % self.per_tier();
        let (i, j) = (k % self.cols, k / self.cols);
        ((i as f64 + 0.5) * self.px, (j as f64 + 0.5) * self.py, t)
    }
}

struct Snapshot {
    x: Vec<f64>,
    y: Vec<f64>,
    tier: Vec<usize>,
    slot_of: Vec<u32>,
    occupant: Vec<u32>,
    net_cost: Vec<f64>,
    tier_area: Vec<f64>,
}

struct State<'a> {
    nl: &'a Netlist,
    cfg: &'a PlaceConfig,
    side: f64,
    num_tiers: usize,
    grid: Grid,
    free: &'a [CellIdx],
    x: Vec<f64>,
    y: Vec<f64>,
    tier: Vec<usize>,
    slot_of: Vec<u32>,
    occupant: Vec<u32>,
    net_cost: Vec<f64>,
    tier_area: Vec<f64>,
    total_area: f64,
    stamp: Vec<u64>,
    clock: u64,
    touched: Vec<(usize, f64)>,
}

impl<'a> State<'a> {
    fn new(
        nl: &'a Netlist,
        tiers: Vec<usize>,
        num_tiers: usize,
        side: f64,
        free: &'a [CellIdx],
        cfg: &'a PlaceConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n = nl.num_cells();
        let mut per_tier = vec![0usize; num_tiers];
        for &c in free {
            per_tier[tiers[c]] += 1;
        }
        let mean_area = if free.is_empty() {
            1.0
        } else {
            free.iter().map(|&c| nl.cell(c).area).sum::<f64>() / free.len() as f64
        };
        let slots = ((side * side / mean_area).floor() as usize)
            .max(per_tier.iter().copied().max().unwrap_or(0))
            .max(1);
        let cols = ((slots as f64).sqrt().ceil() as usize).max(1);
        let rows = slots.div_ceil(cols);
        let grid = Grid {
            cols,
            rows,
            px: side / cols as f64,
            py: side / rows as f64,
        };

        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut slot_of = vec![NONE; n];
        let mut occupant = vec![NONE; grid.per_tier() * num_tiers];
        let mut tier_area = vec![0.0; num_tiers];
        for (i, c) in nl.cells().iter().enumerate() {
            tier_area[tiers[i]] += c.area;
            if let Some(f) = c.fixed {
                x[i] = f.x;
                y[i] = f.y;
            }
        }
        if free.len() == 1 {
            x[free[0]] = side / 2.0;
            y[free[0]] = side / 2.0;
        } else {
            for t in 0..num_tiers {
                let mut order: Vec<usize> = (0..grid.per_tier()).map(|k| t * grid.per_tier() + k).collect();
                order.shuffle(rng);
                let mut it = order.into_iter();
                for &c in free.iter().filter(|&&c| tiers[c] == t) {
                    let s = it.next().expect("slot count covers every tier");
                    let (sx, sy, _) = grid.center(s);
                    x[c] = sx;
                    y[c] = sy;
                    slot_of[c] = s as u32;
                    occupant[s] = c as u32;
                }
            }
        }
        let mut st = Self {
            nl,
            cfg,
            side,
            num_tiers,
            grid,
            free,
            x,
            y,
            tier: tiers,
            slot_of,
            occupant,
            net_cost: vec![0.0; nl.nets().len()],
            tier_area,
            total_area: nl.total_area(),
            stamp: vec![0; nl.nets().len()],
            clock: 0,
            touched: Vec::new(),
        };
        for k in 0..nl.nets().len() {
            st.net_cost[k] = st.cost_of(k);
        }
        st
    }

    fn cost_of(&self, net: usize) -> f64 {
        let pins = &self.nl.nets()[net].pins;
        let p = pins[0];
        let (mut x0, mut x1, mut y0, mut y1) = (self.x[p], self.x[p], self.y[p], self.y[p]);
        let (mut t0, mut t1) = (self.tier[p], self.tier[p]);
        for &p in &pins[1..] {
            x0 = x0.min(self.x[p]);
            x1 = x1.max(self.x[p]);
            y0 = y0.min(self.y[p]);
            y1 = y1.max(self.y[p]);
            t0 = t0.min(self.tier[p]);
            t1 = t1.max(self.tier[p]);
        }
        (x1 - x0) + (y1 - y0) + self.cfg.via_penalty * (t1 - t0) as f64
    }

    fn total(&self) -> f64 {
        self.net_cost.iter().sum()
    }

    fn balanced_after(&self, from: usize, to: usize, delta: f64) -> bool {
        if from == to || self.num_tiers == 1 {
            return true;
        }
        let target = 1.0 / self.num_tiers as f64;
        let cap = self.side * self.side * (1.0 + 1e-12);
        let tol = self.cfg.balance_tol + 1e-12;
        let a_from = self.tier_area[from] - delta;
        let a_to = self.tier_area[to] + delta;
        a_from <= cap
            && a_to <= cap
            && (a_from / self.total_area - target).abs() <= tol
            && (a_to / self.total_area - target).abs() <= tol
    }

    fn put(&mut self, c: CellIdx, slot: usize) {
        let (sx, sy, t) = self.grid.center(slot);
        self.x[c] = sx;
        self.y[c] = sy;
        self.tier[c] = t;
        self.slot_of[c] = slot as u32;
        self.occupant[slot] = c as u32;
    }

    /// Proposes a move or swap; returns the cells involved, their original
    /// slots and the cost delta, with the move applied.
    fn propose(&mut self, rng: &mut ChaCha8Rng, r: f64) -> Option<(CellIdx, usize, Option<CellIdx>, usize, f64)> {
        let c = self.free[rng.random_range(0..self.free.len())];
        let from = self.slot_of[c] as usize;
        let per = self.grid.per_tier();
        let ft = from / per;
        let k = from % per;
        let (ci, cj) = ((k % self.grid.cols) as i64, (k / self.grid.cols) as i64);
        let w = r.max(1.0) as i64;
        let ti = (ci + rng.random_range(-w..=w)).clamp(0, self.grid.cols as i64 - 1);
        let tj = (cj + rng.random_range(-w..=w)).clamp(0, self.grid.rows as i64 - 1);
        let tt = if self.num_tiers > 1 && rng.random::<f64>() < self.cfg.tier_move_prob {
            (ft + rng.random_range(1..self.num_tiers)) % self.num_tiers
        } else {
            ft
        };
        let to = tt * per + tj as usize * self.grid.cols + ti as usize;
        if to == from {
            return None;
        }
        let other = match self.occupant[to] {
            NONE => None,
            d => Some(d as usize),
        };
        let delta_area = self.nl.cell(c).area - other.map_or(0.0, |d| self.nl.cell(d).area);
        if !self.balanced_after(ft, tt, delta_area) {
            return None;
        }

        self.occupant[from] = NONE;
        self.put(c, to);
        if let Some(d) = other {
            self.put(d, from);
        }
        self.clock += 1;
        self.touched.clear();
        let mut delta = 0.0;
        for cell in std::iter::once(c).chain(other) {
            for &net in self.nl.nets_of(cell) {
                if self.stamp[net] != self.clock {
                    self.stamp[net] = self.clock;
                    let new = self.cost_of(net);
                    delta += new - self.net_cost[net];
                    self.touched.push((net, new));
                }
            }
        }
        Some((c, from, other, to, delta))
    }

    fn revert(&mut self, c: CellIdx, from: usize, other: Option<CellIdx>, to: usize) {
        self.occupant[to] = NONE;
        self.put(c, from);
        if let Some(d) = other {
            self.put(d, to);
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng, r: f64, temp: f64, log: Option<&mut Vec<MoveRecord>>) -> bool {
        let Some((c, from, other, to, delta)) = self.propose(rng, r) else {
            return false;
        };
        let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp();
        if !accept {
            self.revert(c, from, other, to);
            return false;
        }
        for &(net, cost) in &self.touched {
            self.net_cost[net] = cost;
        }
        let per = self.grid.per_tier();
        let (ft, tt) = (from / per, to / per);
        if ft != tt {
            let d = self.nl.cell(c).area - other.map_or(0.0, |d| self.nl.cell(d).area);
            self.tier_area[ft] -= d;
            self.tier_area[tt] += d;
        }
        if let Some(log) = log {
            log.push(MoveRecord {
                cell: c,
                from_tier: ft,
                to_tier: tt,
                partner: other,
            });
        }
        true
    }

    /// Temperature at which about 80% of uphill moves would be accepted.
    fn initial_temperature(&mut self, rng: &mut ChaCha8Rng, r: f64) -> f64 {
        let samples = self.free.len().clamp(50, 2000);
        let mut uphill = Vec::new();
        for _ in 0..samples {
            if let Some((c, from, other, to, delta)) = self.propose(rng, r) {
                self.revert(c, from, other, to);
                if delta > 0.0 {
                    uphill.push(delta);
                }
            }
        }
        if uphill.is_empty() {
            return 1.0;
        }
        let mean = uphill.iter().sum::<f64>() / uphill.len() as f64;
        -mean / 0.8f64.ln()
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            x: self.x.clone(),
            y: self.y.clone(),
            tier: self.tier.clone(),
            slot_of: self.slot_of.clone(),
            occupant: self.occupant.clone(),
            net_cost: self.net_cost.clone(),
            tier_area: self.tier_area.clone(),
        }
    }

    fn restore(&mut self, s: Snapshot) {
        self.x = s.x;
        self.y = s.y;
        self.tier = s.tier;
        self.slot_of = s.slot_of;
        self.occupant = s.occupant;
        self.net_cost = s.net_cost;
        self.tier_area = s.tier_area;
    }

    fn placement(&self) -> Placement {
        let mut pl = Placement::new(self.side, self.side, self.num_tiers, self.nl.num_cells());
        for i in 0..self.nl.num_cells() {
            pl.set(i, Loc::new(self.x[i], self.y[i], self.tier[i]));
        }
        pl
    }
}
