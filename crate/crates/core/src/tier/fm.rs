// SPDX-License-Identifier: Apache-2.0

//! Fiduccia–Mattheyses two-way min-cut partitioning with an area balance
//! band.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{balance, movable, TierAssignment, TierError};
use crate::netlist::{CellIdx, Netlist};

#[derive(Debug, Clone, PartialEq)]
pub struct FmOptions {
    /// Allowed deviation of each side's area fraction from one half.
    pub balance_tol: f64,
    pub seed: u64,
    /// Independent random starts; the best result wins.
    pub starts: usize,
    pub max_passes: usize,
}

impl Default for FmOptions {
    fn default() -> Self {
        Self {
            balance_tol: 0.05,
            seed: 1,
            starts: 4,
            max_passes: 64,
        }
    }
}

/// Cut of the starting assignment and after each pass, for the winning start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FmTrace {
    /// Cut of the random start after balance repair.
    pub initial_cut: usize,
    /// Whether repair brought the start inside the balance band. Passes
    /// never raise the cut of a balanced state.
    pub initial_balanced: bool,
    pub pass_cuts: Vec<usize>,
}

pub fn fm_bipartition(nl: &Netlist, balance_tol: f64, seed: u64) -> Result<TierAssignment, TierError> {
    fm_bipartition_with(
        nl,
        &FmOptions {
            balance_tol,
            seed,
            ..FmOptions::default()
        },
    )
}

pub fn fm_bipartition_with(nl: &Netlist, opts: &FmOptions) -> Result<TierAssignment, TierError> {
    if !(opts.balance_tol >= 0.0 && opts.balance_tol < 0.5) {
        return Err(TierError::InvalidConfig(format!(
            "balance_tol {} must lie in [0, 0.5)",
            opts.balance_tol
        )));
    }
    if opts.starts == 0 {
        return Err(TierError::InvalidConfig("at least one start".into()));
    }
    let free = movable(nl);
    if free.len() < 2 {
        return Err(TierError::TooFewCells(free.len()));
    }
    for c in nl.cells() {
        if let Some(f) = c.fixed {
            if f.tier > 1 {
                return Err(TierError::BadAssignment(format!(
                    "fixed cell `{}` sits on tier {} of a two-tier partition",
                    c.id, f.tier
                )));
            }
        }
    }

    let total = nl.total_area();
    let band = Band {
        lo: total * (0.5 - opts.balance_tol),
        hi: total * (0.5 + opts.balance_tol),
        slack: free.iter().map(|&c| nl.cell(c).area).fold(0.0, f64::max),
        eps: total * 1e-9,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(State, FmTrace)> = None;
    for _ in 0..opts.starts {
        let mut order = free.clone();
        order.shuffle(&mut rng);
        let mut st = State::new(nl, &order);
        let initial_balanced = st.repair(&band);
        let initial_cut = st.cut;
        let mut pass_cuts = Vec::new();
        for _ in 0..opts.max_passes {
            let improved = st.pass(&band);
            pass_cuts.push(st.cut);
            if !improved {
                break;
            }
        }
        let better = match &best {
            None => true,
            Some((b, _)) => st.key(&band).lt(&b.key(&band)),
        };
        if better {
            best = Some((
                st,
                FmTrace {
                    initial_cut,
                    initial_balanced,
                    pass_cuts,
                },
            ));
        }
    }
    let (st, trace) = best.expect("at least one start");
    if st.violation(&band) > 0.0 {
        return Err(TierError::InfeasibleBalance {
            lo: band.lo,
            hi: band.hi,
            max_cell: band.slack,
        });
    }
    let tier_of: Vec<usize> = st.side.iter().map(|&s| s as usize).collect();
    Ok(TierAssignment {
        balance: balance(nl, &tier_of, 2),
        cut_nets: st.cut,
        tier_of,
        num_tiers: 2,
        trace,
    })
}

/// Feasible range for the area on side 0. Moves may stray outside it by one
/// cell area; the best prefix of a pass is chosen by violation first.
struct Band {
    lo: f64,
    hi: f64,
    slack: f64,
    eps: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Key {
    violation: f64,
    cut: usize,
}

impl Key {
    fn lt(&self, other: &Key) -> bool {
        match self.violation.partial_cmp(&other.violation) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => self.cut < other.cut,
            _ => false,
        }
    }
}

struct State<'a> {
    nl: &'a Netlist,
    side: Vec<u8>,
    count: Vec<[u32; 2]>,
    area0: f64,
    cut: usize,
    gain: Vec<i64>,
    locked: Vec<bool>,
    buckets: [BTreeSet<(i64, CellIdx)>; 2],
}

impl<'a> State<'a> {
    /// Fixed cells on their tier, then movable cells in `order`, each to the
    /// lighter side.
    fn new(nl: &'a Netlist, order: &[CellIdx]) -> Self {
        let n = nl.num_cells();
        let mut side = vec![0u8; n];
        let mut locked = vec![false; n];
        let mut areas = [0.0f64; 2];
        for (i, c) in nl.cells().iter().enumerate() {
            if let Some(f) = c.fixed {
                side[i] = f.tier as u8;
                locked[i] = true;
                areas[f.tier] += c.area;
            }
        }
        for &c in order {
            let s = usize::from(areas[1] < areas[0]);
            side[c] = s as u8;
            areas[s] += nl.cell(c).area;
        }
        let mut st = Self {
            nl,
            side,
            count: Vec::new(),
            area0: areas[0],
            cut: 0,
            gain: vec![0; n],
            locked,
            buckets: [BTreeSet::new(), BTreeSet::new()],
        };
        st.recount();
        st
    }

    fn recount(&mut self) {
        self.count = self
            .nl
            .nets()
            .iter()
            .map(|net| {
                let mut c = [0u32; 2];
                for &p in &net.pins {
                    c[self.side[p] as usize] += 1;
                }
                c
            })
            .collect();
        self.cut = self.count.iter().filter(|c| c[0] > 0 && c[1] > 0).count();
    }

    fn violation(&self, band: &Band) -> f64 {
        let v = (band.lo - self.area0).max(self.area0 - band.hi);
        if v > band.eps {
            v
        } else {
            0.0
        }
    }

    fn key(&self, band: &Band) -> Key {
        Key {
            violation: self.violation(band),
            cut: self.cut,
        }
    }

    fn is_fixed(&self, c: CellIdx) -> bool {
        self.nl.cell(c).is_fixed()
    }

    fn compute_gain(&self, c: CellIdx) -> i64 {
        let f = self.side[c] as usize;
        let t = 1 - f;
        let mut g = 0;
        for &n in self.nl.nets_of(c) {
            if self.count[n][f] == 1 {
                g += 1;
            }
            if self.count[n][t] == 0 {
                g -= 1;
            }
        }
        g
    }

    fn adjust(&mut self, c: CellIdx, delta: i64) {
        let s = self.side[c] as usize;
        self.buckets[s].remove(&(-self.gain[c], c));
        self.gain[c] += delta;
        self.buckets[s].insert((-self.gain[c], c));
    }

    fn area_after(&self, c: CellIdx) -> f64 {
        let a = self.nl.cell(c).area;
        if self.side[c] == 0 {
            self.area0 - a
        } else {
            self.area0 + a
        }
    }

    /// Highest-gain unlocked cell whose move stays in the relaxed band;
    /// ties go to the lower cell index.
    fn pick(&self, band: &Band) -> Option<CellIdx> {
        let mut best: Option<(i64, CellIdx)> = None;
        for bucket in &self.buckets {
            let found = bucket.iter().find(|&&(_, c)| {
                let a = self.area_after(c);
                a >= band.lo - band.slack - band.eps && a <= band.hi + band.slack + band.eps
            });
            if let Some(&key) = found {
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        best.map(|(_, c)| c)
    }

    fn apply(&mut self, c: CellIdx) {
        let f = self.side[c] as usize;
        let t = 1 - f;
        self.buckets[f].remove(&(-self.gain[c], c));
        self.locked[c] = true;
        self.cut = (self.cut as i64 - self.gain[c]) as usize;
        let nl = self.nl;
        for &n in nl.nets_of(c) {
            let pins = &nl.nets()[n].pins;
            match self.count[n][t] {
                0 => {
                    for &p in pins {
                        if !self.locked[p] {
                            self.adjust(p, 1);
                        }
                    }
                }
                1 => {
                    for &p in pins {
                        if self.side[p] as usize == t && !self.locked[p] {
                            self.adjust(p, -1);
                        }
                    }
                }
                _ => {}
            }
            self.count[n][f] -= 1;
            self.count[n][t] += 1;
            match self.count[n][f] {
                0 => {
                    for &p in pins {
                        if !self.locked[p] {
                            self.adjust(p, -1);
                        }
                    }
                }
                1 => {
                    for &p in pins {
                        if self.side[p] as usize == f && !self.locked[p] {
                            self.adjust(p, 1);
                        }
                    }
                }
                _ => {}
            }
        }
        self.area0 = self.area_after(c);
        self.side[c] = t as u8;
    }

    /// Flips a cell without gain bookkeeping.
    fn undo(&mut self, c: CellIdx) {
        let f = self.side[c] as usize;
        let t = 1 - f;
        for &n in self.nl.nets_of(c) {
            let before = self.count[n][0] > 0 && self.count[n][1] > 0;
            self.count[n][f] -= 1;
            self.count[n][t] += 1;
            let after = self.count[n][0] > 0 && self.count[n][1] > 0;
            match (before, after) {
                (false, true) => self.cut += 1,
                (true, false) => self.cut -= 1,
                _ => {}
            }
        }
        self.area0 = self.area_after(c);
        self.side[c] = t as u8;
    }

    /// Moves, then swaps, free cells toward the band until it is met or no
    /// single move or swap reduces the violation. Ties go to the smaller
    /// cut increase, then the lower index.
    fn repair(&mut self, band: &Band) -> bool {
        let free: Vec<CellIdx> = (0..self.nl.num_cells()).filter(|&c| !self.is_fixed(c)).collect();
        loop {
            let v = self.violation(band);
            if v == 0.0 {
                return true;
            }
            let mut best: Option<(Key, Vec<CellIdx>)> = None;
            for &c in &free {
                self.consider(band, v, &[c], &mut best);
            }
            if best.is_none() {
                for (i, &a) in free.iter().enumerate() {
                    for &b in &free[i + 1..] {
                        if self.side[a] != self.side[b] {
                            self.consider(band, v, &[a, b], &mut best);
                        }
                    }
                }
            }
            match best {
                Some((_, cells)) => {
                    for c in cells {
                        self.undo(c);
                    }
                }
                None => return false,
            }
        }
    }

    fn consider(&mut self, band: &Band, v: f64, cells: &[CellIdx], best: &mut Option<(Key, Vec<CellIdx>)>) {
        for &c in cells {
            self.undo(c);
        }
        let k = self.key(band);
        for &c in cells.iter().rev() {
            self.undo(c);
        }
        if k.violation < v && best.as_ref().is_none_or(|(b, _)| k.lt(b)) {
            *best = Some((k, cells.to_vec()));
        }
    }

    /// One FM pass. Returns whether the state improved.
    fn pass(&mut self, band: &Band) -> bool {
        self.buckets = [BTreeSet::new(), BTreeSet::new()];
        for c in 0..self.nl.num_cells() {
            self.locked[c] = self.is_fixed(c);
            if !self.locked[c] {
                self.gain[c] = self.compute_gain(c);
                self.buckets[self.side[c] as usize].insert((-self.gain[c], c));
            }
        }
        let start = self.key(band);
        let mut best = (start, 0usize);
        let mut moves = Vec::new();
        while let Some(c) = self.pick(band) {
            self.apply(c);
            moves.push(c);
            let k = self.key(band);
            if k.lt(&best.0) {
                best = (k, moves.len());
            }
        }
        for &c in moves[best.1..].iter().rev() {
            self.undo(c);
        }
        best.1 > 0
    }
}
