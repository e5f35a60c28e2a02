// SPDX-License-Identifier: Apache-2.0

//! Deterministic synthetic netlists that follow Rent's rule.
//!
//! Cells are laid out on a hidden square grid in Morton (Z) order, so every
//! aligned run of `2^k` consecutive cell indices is a compact block of the
//! grid. Each driver connects to sinks at Manhattan distances drawn from a
//! power law `P(l) ∝ l^(2p-3)`; for a block of `G` cells the number of nets
//! leaving it then scales as `G^p`. Cell ids are `c<index>`, so the Rent
//! exponent can be measured back from the netlist alone with
//! [`measure_rent_exponent`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cell, Net, Netlist, NetlistError, TimingPathSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_cells: usize,
    pub rent_exponent: f64,
    pub avg_fanout: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(n_cells: usize, rent_exponent: f64, avg_fanout: f64, seed: u64) -> Self {
        Self {
            n_cells,
            rent_exponent,
            avg_fanout,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), NetlistError> {
        if self.n_cells < 2 {
            return Err(NetlistError::InvalidParameter(format!(
                "n_cells must be at least 2, got {}",
                self.n_cells
            )));
        }
        if !(self.rent_exponent > 0.0 && self.rent_exponent < 1.0) {
            return Err(NetlistError::InvalidParameter(format!(
                "rent exponent must lie in (0, 1), got {}",
                self.rent_exponent
            )));
        }
        if !(self.avg_fanout.is_finite() && self.avg_fanout >= 1.0) {
            return Err(NetlistError::InvalidParameter(format!(
                "average fanout must be at least 1, got {}",
                self.avg_fanout
            )));
        }
        Ok(())
    }
}

/// Share of cells that only sink nets (primary outputs).
const OUTPUT_FRACTION: f64 = 0.05;
/// Declared timing paths per cell.
const PATHS_PER_CELL: f64 = 0.1;
const MAX_PATH_CELLS: usize = 40;
/// Required time as a multiple of a path's summed gate delay: half the budget
/// goes to gates, half to wires.
pub const REQUIRED_TIME_FACTOR: f64 = 2.0;

fn spread(mut v: u64) -> u64 {
    v &= 0x0000_0000_ffff_ffff;
    v = (v | (v << 16)) & 0x0000_ffff_0000_ffff;
    v = (v | (v << 8)) & 0x00ff_00ff_00ff_00ff;
    v = (v | (v << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    v = (v | (v << 2)) & 0x3333_3333_3333_3333;
    (v | (v << 1)) & 0x5555_5555_5555_5555
}

fn compact(mut v: u64) -> u64 {
    v &= 0x5555_5555_5555_5555;
    v = (v | (v >> 1)) & 0x3333_3333_3333_3333;
    v = (v | (v >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    v = (v | (v >> 4)) & 0x00ff_00ff_00ff_00ff;
    v = (v | (v >> 8)) & 0x0000_ffff_0000_ffff;
    (v | (v >> 16)) & 0x0000_0000_ffff_ffff
}

fn morton_encode(x: u64, y: u64) -> u64 {
    spread(x) | (spread(y) << 1)
}

fn morton_decode(code: u64) -> (u64, u64) {
    (compact(code), compact(code >> 1))
}

/// Draws a hop length in `[1, max_len]` with density proportional to
/// `l^(2p-3)` by inverting the continuous CDF.
fn sample_length(rng: &mut ChaCha8Rng, p: f64, max_len: f64) -> u64 {
    let e = 2.0 * p - 2.0;
    let u: f64 = rng.random();
    let l = if e.abs() < 1e-12 {
        max_len.powf(u)
    } else {
        (1.0 + u * (max_len.powf(e) - 1.0)).powf(1.0 / e)
    };
    (l.floor() as u64).clamp(1, max_len as u64)
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // lower root wins so the structure is independent of call order
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
        true
    }
}

/// Generates a connected netlist with declared timing paths. The same
/// parameters always give the same netlist.
pub fn generate_synthetic(params: &SynthParams) -> Result<Netlist, NetlistError> {
    params.validate()?;
    let n = params.n_cells;
    let p = params.rent_exponent;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut side = 1u64;
    while (side * side) < n as u64 {
        side *= 2;
    }
    let max_len = (2 * (side - 1)).max(1) as f64;

    let cells: Vec<Cell> = (0..n)
        .map(|i| {
            let area = f64::from(rng.random_range(50u32..=150)) / 100.0;
            let delay = f64::from(rng.random_range(10u32..=30)) / 1000.0;
            Cell::new(format!("c{i}"), area, delay)
        })
        .collect();

    let n_outputs = ((n as f64 * OUTPUT_FRACTION).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut is_output = vec![false; n];
    for &o in &order[..n_outputs] {
        is_output[o] = true;
    }

    let mut nets: Vec<Net> = Vec::new();
    let mut dsu = Dsu((0..n).collect());
    for (driver, &output) in is_output.iter().enumerate() {
        if output {
            continue;
        }
        let spread_sinks = 2.0 * (params.avg_fanout - 1.0);
        let extra = (rng.random::<f64>() * spread_sinks + rng.random::<f64>()).floor() as usize;
        let fanout = (1 + extra).min(n - 1);
        let (dx0, dy0) = morton_decode(driver as u64);
        let mut pins = vec![driver];
        while pins.len() < fanout + 1 {
            let mut chosen = None;
            for _ in 0..32 {
                let l = sample_length(&mut rng, p, max_len) as i64;
                let dx = rng.random_range(-l..=l);
                let rest = l - dx.abs();
                let dy = if rng.random::<bool>() { rest } else { -rest };
                let (x, y) = (dx0 as i64 + dx, dy0 as i64 + dy);
                if x < 0 || y < 0 || x >= side as i64 || y >= side as i64 {
                    continue;
                }
                let idx = morton_encode(x as u64, y as u64) as usize;
                if idx < n && !pins.contains(&idx) {
                    chosen = Some(idx);
                    break;
                }
            }
            // Sparse corners of the grid can reject every draw; fall back to
            // the nearest free index.
            let c = chosen.unwrap_or_else(|| {
                (1..n)
                    .flat_map(|d| [driver.wrapping_sub(d), driver + d])
                    .find(|&c| c < n && !pins.contains(&c))
                    .expect("n >= 2 leaves a free sink")
            });
            pins.push(c);
        }
        for &s in &pins[1..] {
            dsu.union(driver, s);
        }
        nets.push(Net {
            id: format!("n{driver}"),
            pins,
        });
    }

    // Join components through Morton neighbours, which are grid neighbours.
    for i in 1..n {
        if dsu.union(i - 1, i) {
            nets.push(Net {
                id: format!("j{i}"),
                pins: vec![i - 1, i],
            });
        }
    }

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for net in &nets {
        for &a in &net.pins {
            for &b in &net.pins {
                if a != b {
                    adj[a].push(b);
                }
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }

    let n_paths = ((n as f64 * PATHS_PER_CELL).round() as usize).max(1);
    let longest = MAX_PATH_CELLS.min(n).max(2);
    let mut paths = Vec::with_capacity(n_paths);
    for k in 0..n_paths {
        let target = rng.random_range(2..=longest);
        let mut walk = vec![rng.random_range(0..n)];
        while walk.len() < target {
            let last = *walk.last().unwrap();
            let free: Vec<usize> = adj[last].iter().copied().filter(|c| !walk.contains(c)).collect();
            if free.is_empty() {
                break;
            }
            walk.push(free[rng.random_range(0..free.len())]);
        }
        let gate_delay: f64 = walk.iter().map(|&c| cells[c].delay).sum();
        paths.push(TimingPathSpec {
            id: format!("p{k}"),
            cells: walk,
            required_time: REQUIRED_TIME_FACTOR * gate_delay,
        });
    }

    Netlist::new(cells, nets, paths)
}

/// Least-squares fit of `log T = log k + p log G` over sub-blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RentFit {
    pub k: f64,
    pub p: f64,
    /// `(G, mean T)` per block size.
    pub points: Vec<(f64, f64)>,
}

/// Measures the Rent exponent of a netlist by sampling aligned runs of
/// `G = 2^k` consecutive cell indices (for `4 <= G <= n/4`) and counting
/// the nets that have pins both inside and outside each run.
pub fn measure_rent_exponent(nl: &Netlist, seed: u64, blocks_per_size: usize) -> Option<RentFit> {
    let n = nl.num_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut g = 4usize;
    while g <= n / 4 {
        let count = n / g;
        let mut starts: Vec<usize> = (0..count).map(|b| b * g).collect();
        starts.shuffle(&mut rng);
        starts.truncate(blocks_per_size.max(1));
        let mut total = 0.0;
        for &s in &starts {
            let inside = |c: usize| c >= s && c < s + g;
            let mut seen = std::collections::BTreeSet::new();
            for c in s..s + g {
                for &net in nl.nets_of(c) {
                    if !seen.contains(&net) && nl.nets()[net].pins.iter().any(|&q| !inside(q)) {
                        seen.insert(net);
                    }
                }
            }
            total += seen.len() as f64;
        }
        points.push((g as f64, total / starts.len() as f64));
        g *= 2;
    }
    if points.len() < 2 || points.iter().any(|&(_, t)| t <= 0.0) {
        return None;
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(g, _)| g.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, t)| t.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let p = sxy / sxx;
    Some(RentFit {
        k: (my - p * mx).exp(),
        p,
        points,
    })
}
