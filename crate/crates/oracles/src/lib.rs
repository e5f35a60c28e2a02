// SPDX-License-Identifier: Apache-2.0

//! Reference computations that check the library by other means: simulation,
//! enumeration and dense linear algebra. Nothing here calls the code paths
//! it is used to check.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};
use stack3d::netlist::Netlist;
use stack3d::pdn::Mesh;

/// Fraction of defect-free dies and its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McYield {
    pub yield_: f64,
    pub std_err: f64,
}

/// Scatters defects over `dies` die sites of `area_mm2` each at `d0` defects
/// per cm². With `alpha` set, each site's defect intensity is scaled by a
/// Gamma(α, 1/α) factor, which clusters defects.
pub fn mc_yield(area_mm2: f64, d0: f64, alpha: Option<f64>, dies: usize, seed: u64) -> McYield {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_die = area_mm2 / 100.0 * d0;
    let weights: Vec<f64> = match alpha {
        None => vec![1.0; dies],
        Some(a) => {
            let g = Gamma::new(a, 1.0 / a).unwrap();
            (0..dies).map(|_| g.sample(&mut rng)).collect()
        }
    };
    let intensity: f64 = weights.iter().sum::<f64>() * per_die;
    let total = Poisson::new(intensity).unwrap().sample(&mut rng) as u64;
    let pick = WeightedIndex::new(&weights).unwrap();
    let mut hit = vec![false; dies];
    for _ in 0..total {
        hit[pick.sample(&mut rng)] = true;
    }
    let good = hit.iter().filter(|h| !**h).count() as f64;
    let y = good / dies as f64;
    McYield {
        yield_: y,
        std_err: (y * (1.0 - y) / dies as f64).sqrt(),
    }
}

/// Mean number of square dies lying entirely inside the usable disc of a
/// wafer, over random alignments of the die grid.
pub fn packed_dies(area_mm2: f64, wafer_diameter: f64, edge_exclusion: f64, alignments: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = area_mm2.sqrt();
    let r = wafer_diameter / 2.0 - edge_exclusion;
    let r2 = r * r;
    let span = (r / s).ceil() as i64 + 1;
    let mut total = 0u64;
    for _ in 0..alignments {
        let ox: f64 = rng.random::<f64>() * s;
        let oy: f64 = rng.random::<f64>() * s;
        for i in -span..=span {
            let x0 = ox + i as f64 * s;
            let x1 = x0 + s;
            let fx = x0.abs().max(x1.abs());
            if fx > r {
                continue;
            }
            for j in -span..=span {
                let y0 = oy + j as f64 * s;
                let y1 = y0 + s;
                let fy = y0.abs().max(y1.abs());
                if fx * fx + fy * fy <= r2 {
                    total += 1;
                }
            }
        }
    }
    total as f64 / alignments as f64
}

/// Minimum number of cut nets over all two-way splits whose tier-0 area
/// fraction lies within `tol` of one half, with fixed cells on their tier.
/// `None` when no split satisfies the band.
pub fn brute_force_min_cut(nl: &Netlist, tol: f64) -> Option<usize> {
    let n = nl.num_cells();
    assert!(n <= 24, "enumeration is exponential in the cell count");
    let total: f64 = nl.cells().iter().map(|c| c.area).sum();
    let mut best: Option<usize> = None;
    for mask in 0u32..(1 << n) {
        let side = |i: usize| (mask >> i) & 1;
        if nl
            .cells()
            .iter()
            .enumerate()
            .any(|(i, c)| c.fixed.is_some_and(|f| f.tier as u32 != side(i)))
        {
            continue;
        }
        let a0: f64 = (0..n).filter(|&i| side(i) == 0).map(|i| nl.cell(i).area).sum();
        if (a0 / total - 0.5).abs() > tol + 1e-9 {
            continue;
        }
        let cut = nl
            .nets()
            .iter()
            .filter(|net| net.pins.iter().any(|&p| side(p) != side(net.pins[0])))
            .count();
        best = Some(best.map_or(cut, |b| b.min(cut)));
    }
    best
}

/// Node drops (V) of a mesh by assembling its conductance matrix over the
/// free nodes and solving it directly.
pub fn dense_mesh_drops(mesh: &Mesh) -> Vec<f64> {
    let m = mesh.m;
    let n = m * m;
    let free: Vec<usize> = (0..n).filter(|&i| !mesh.fixed[i]).collect();
    if free.is_empty() {
        return vec![0.0; n];
    }
    let mut index = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        index[i] = k;
    }
    let g = 1.0 / mesh.resistance;
    let mut a = DMatrix::<f64>::zeros(free.len(), free.len());
    let mut b = DVector::<f64>::zeros(free.len());
    for (k, &i) in free.iter().enumerate() {
        let (x, y) = (i % m, i / m);
        let mut nbrs = Vec::new();
        if x > 0 {
            nbrs.push(i - 1);
        }
        if x + 1 < m {
            nbrs.push(i + 1);
        }
        if y > 0 {
            nbrs.push(i - m);
        }
        if y + 1 < m {
            nbrs.push(i + m);
        }
        for j in nbrs {
            a[(k, k)] += g;
            if index[j] != usize::MAX {
                a[(k, index[j])] -= g;
            }
        }
        b[k] = mesh.current[i];
    }
    let sol = a.lu().solve(&b).expect("mesh with at least one bump is nonsingular");
    let mut d = vec![0.0; n];
    for (k, &i) in free.iter().enumerate() {
        d[i] = sol[k];
    }
    d
}
