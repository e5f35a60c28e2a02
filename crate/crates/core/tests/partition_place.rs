// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stack3d::netlist::synth::{generate_synthetic, SynthParams};
use stack3d::netlist::{hpwl, parse_netlist, Cell, Loc, Net, Netlist, Placement};
use stack3d::tier::*;
use stack3d_oracles::brute_force_min_cut;

fn random_netlist(rng: &mut ChaCha8Rng, max_cells: usize) -> Netlist {
    let n = rng.random_range(4..=max_cells);
    let cells: Vec<Cell> = (0..n)
        .map(|i| Cell::new(format!("c{i}"), rng.random_range(1..=3) as f64, 0.0))
        .collect();
    let n_nets = rng.random_range(n..=2 * n);
    let mut nets = Vec::new();
    for k in 0..n_nets {
        let deg = rng.random_range(2..=4.min(n));
        let mut pins: Vec<usize> = Vec::new();
        while pins.len() < deg {
            let p = rng.random_range(0..n);
            if !pins.contains(&p) {
                pins.push(p);
            }
        }
        nets.push(Net {
            id: format!("n{k}"),
            pins,
        });
    }
    Netlist::new(cells, nets, vec![]).unwrap()
}

#[test]
fn fm_against_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tol = 0.1;
    let mut checked = 0;
    while checked < 100 {
        let nl = random_netlist(&mut rng, 12);
        let seed = rng.random::<u64>();
        match (brute_force_min_cut(&nl, tol), fm_bipartition(&nl, tol, seed)) {
            (Some(opt), Ok(a)) => {
                assert!(a.cut_nets >= opt);
                assert!(
                    a.cut_nets as f64 <= 1.5 * opt as f64,
                    "fm {} vs optimum {opt}",
                    a.cut_nets
                );
                assert!(a.is_balanced(tol));
                checked += 1;
            }
            (None, Err(TierError::InfeasibleBalance { .. })) => {}
            (opt, fm) => panic!("optimum {opt:?} but partitioner gave {fm:?}"),
        }
    }
}

#[test]
fn fm_fixtures_exact() {
    let chain =
        parse_netlist("cell a 1 0\ncell b 1 0\ncell c 1 0\ncell d 1 0\nnet ab a b\nnet bc b c\nnet cd c d").unwrap();
    assert_eq!(brute_force_min_cut(&chain, 0.0), Some(1));
    assert_eq!(fm_bipartition(&chain, 0.0, 1).unwrap().cut_nets, 1);

    let mut k4 = String::from("cell a 1 0\ncell b 1 0\ncell c 1 0\ncell d 1 0\n");
    for (i, (x, y)) in [("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")]
        .iter()
        .enumerate()
    {
        k4 += &format!("net e{i} {x} {y}\n");
    }
    let k4 = parse_netlist(&k4).unwrap();
    assert_eq!(brute_force_min_cut(&k4, 0.0), Some(4));
    let a = fm_bipartition(&k4, 0.0, 1).unwrap();
    assert_eq!(a.cut_nets, 4);
    let mut pl = Placement::new(4.0, 4.0, 2, 4);
    for i in 0..4 {
        pl.set(i, Loc::new(1.0, 1.0, a.tier_of[i]));
    }
    assert_eq!(count_3d_vias(&k4, &pl).unwrap(), 4);
}

/// Best HPWL of the chain over all injective assignments to the sites of a
/// pitch-spaced grid inside the footprint.
fn best_grid_hpwl(nl: &Netlist, side: f64, pitch: f64) -> f64 {
    let k = (side / pitch).floor() as usize;
    let sites: Vec<(f64, f64)> = (0..k * k)
        .map(|s| (((s % k) as f64 + 0.5) * pitch, ((s / k) as f64 + 0.5) * pitch))
        .collect();
    let mut best = f64::INFINITY;
    let n = nl.num_cells();
    let mut choice = vec![0usize; n];
    loop {
        let distinct = (0..n).all(|i| (0..i).all(|j| choice[i] != choice[j]));
        if distinct {
            let mut pl = Placement::new(side, side, 1, n);
            for (c, &s) in choice.iter().enumerate() {
                pl.set(c, Loc::new(sites[s].0, sites[s].1, 0));
            }
            best = best.min(hpwl(nl, &pl).unwrap());
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            choice[i] += 1;
            if choice[i] < sites.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn stacked_chain_beats_best_flat_chain() {
    let nl =
        parse_netlist("cell a 1 0\ncell b 1 0\ncell c 1 0\ncell d 1 0\nnet ab a b\nnet bc b c\nnet cd c d").unwrap();
    let cfg = PlaceConfig::default();
    let side = cfg.side_2d(&nl);
    let flat = best_grid_hpwl(&nl, side, 1.0);
    assert_eq!(flat, 3.0);
    let a = fm_bipartition(&nl, 0.0, 3).unwrap();
    let pl = coplace(&nl, &a, &cfg).unwrap();
    pl.validate(&nl).unwrap();
    assert!(hpwl(&nl, &pl).unwrap() <= flat);
    assert!((pl.footprint_area() - 0.5 * side * side).abs() < 1e-9);
}

#[test]
fn accepted_moves_keep_balance() {
    let nl = generate_synthetic(&SynthParams::new(300, 0.6, 3.0, 8)).unwrap();
    let cfg = PlaceConfig {
        record_moves: true,
        balance_tol: 0.02,
        tier_move_prob: 0.5,
        seed: 4,
        ..PlaceConfig::default()
    };
    let a = fm_bipartition(&nl, cfg.balance_tol, cfg.seed).unwrap();
    let out = coplace_detailed(&nl, &a, &cfg).unwrap();
    let mut tiers = out.initial_tiers.clone();
    let total = nl.total_area();
    let mut area = [0.0f64; 2];
    for (i, &t) in tiers.iter().enumerate() {
        area[t] += nl.cell(i).area;
    }
    let mut crossings = 0;
    for m in &out.moves {
        assert_eq!(tiers[m.cell], m.from_tier);
        tiers[m.cell] = m.to_tier;
        area[m.from_tier] -= nl.cell(m.cell).area;
        area[m.to_tier] += nl.cell(m.cell).area;
        if let Some(p) = m.partner {
            assert_eq!(tiers[p], m.to_tier);
            tiers[p] = m.from_tier;
            area[m.to_tier] -= nl.cell(p).area;
            area[m.from_tier] += nl.cell(p).area;
        }
        if m.from_tier != m.to_tier {
            crossings += 1;
        }
        for a in area {
            assert!((a / total - 0.5).abs() <= cfg.balance_tol + 1e-9);
        }
    }
    assert!(crossings > 100, "only {crossings} cross-tier moves");
}

fn pairwise_overlaps(nl: &Netlist, pl: &Placement, row_pitch: f64) -> usize {
    let mut count = 0;
    let n = nl.num_cells();
    for i in 0..n {
        let a = pl.get(i).unwrap();
        let wa = nl.cell(i).area / row_pitch;
        for j in i + 1..n {
            let b = pl.get(j).unwrap();
            let wb = nl.cell(j).area / row_pitch;
            let same_row = a.tier == b.tier && (a.y - b.y).abs() < row_pitch - 1e-9;
            let dx = (a.x - b.x).abs();
            if same_row && dx < (wa + wb) / 2.0 - 1e-9 {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn legalized_random_instance_has_no_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cells: Vec<Cell> = (0..100)
        .map(|i| Cell::new(format!("c{i}"), rng.random_range(0.5..1.5), 0.0))
        .collect();
    let nl = Netlist::new(cells, vec![], vec![]).unwrap();
    let side = (nl.total_area() / 0.7).sqrt();
    let mut pl = Placement::new(side, side, 2, 100);
    for i in 0..100 {
        pl.set(
            i,
            Loc::new(rng.random_range(0.0..side), rng.random_range(0.0..side), i % 2),
        );
    }
    let lg = legalize(&nl, &pl, 1.0).unwrap();
    lg.validate(&nl).unwrap();
    assert_eq!(pairwise_overlaps(&nl, &lg, 1.0), 0);
    assert!(pairwise_overlaps(&nl, &pl, 1.0) > 0);
    assert_eq!(legalize(&nl, &lg, 1.0).unwrap(), lg);
    for i in 0..100 {
        assert_eq!(lg.get(i).unwrap().tier, pl.get(i).unwrap().tier);
    }
}

#[test]
fn legalization_keeps_wirelength_close() {
    for seed in 0..3 {
        let nl = generate_synthetic(&SynthParams::new(400, 0.6, 3.0, seed)).unwrap();
        let cfg = PlaceConfig {
            seed,
            ..PlaceConfig::default()
        };
        let row = (nl.total_area() / nl.num_cells() as f64).sqrt();
        let p2 = place_2d(&nl, &cfg).unwrap();
        let a = fm_bipartition(&nl, cfg.balance_tol, seed).unwrap();
        let p3 = coplace(&nl, &a, &cfg).unwrap();
        for pl in [p2, p3] {
            let lg = legalize(&nl, &pl, row).unwrap();
            let (before, after) = (hpwl(&nl, &pl).unwrap(), hpwl(&nl, &lg).unwrap());
            assert!(
                (after - before).abs() <= 0.2 * before,
                "seed {seed}: {before} -> {after}"
            );
            assert_eq!(pairwise_overlaps(&nl, &lg, row), 0);
        }
    }
}

#[test]
fn results_independent_of_thread() {
    let nl = generate_synthetic(&SynthParams::new(200, 0.6, 3.0, 1)).unwrap();
    let cfg = PlaceConfig::default();
    let run = || {
        let a = fm_bipartition(&nl, cfg.balance_tol, cfg.seed).unwrap();
        (place_2d(&nl, &cfg).unwrap(), coplace(&nl, &a, &cfg).unwrap(), a)
    };
    let here = run();
    let there = std::thread::scope(|s| s.spawn(run).join().unwrap());
    assert_eq!(here, there);
}

#[test]
fn smaller_footprint_shortens_wires() {
    let (mut flat, mut stacked) = (0.0, 0.0);
    for seed in 0..4 {
        let nl = generate_synthetic(&SynthParams::new(300, 0.6, 3.0, 100 + seed)).unwrap();
        let cfg = PlaceConfig {
            seed,
            ..PlaceConfig::default()
        };
        flat += hpwl(&nl, &place_2d(&nl, &cfg).unwrap()).unwrap();
        let a = fm_bipartition(&nl, cfg.balance_tol, seed).unwrap();
        stacked += hpwl(&nl, &coplace(&nl, &a, &cfg).unwrap()).unwrap();
    }
    assert!(stacked < flat, "{stacked} vs {flat}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fm_never_worse_than_its_start(seed in any::<u64>(), gen in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(gen);
        let nl = random_netlist(&mut rng, 20);
        if let Ok(a) = fm_bipartition(&nl, 0.2, seed) {
            prop_assert!(a.trace.pass_cuts.windows(2).all(|w| w[1] <= w[0]));
            if a.trace.initial_balanced {
                prop_assert!(a.cut_nets <= a.trace.initial_cut);
            }
            prop_assert_eq!(a.cut_nets, cut_size(&nl, &a.tier_of));
            prop_assert!(a.is_balanced(0.2));
            prop_assert_eq!(&a, &fm_bipartition(&nl, 0.2, seed).unwrap());
        }
    }

    #[test]
    fn via_check_arithmetic(count in 0usize..100_000, fp in 0.01..100.0f64, pitch in 0.1..100.0f64) {
        let c = via_density_check(count, fp, pitch).unwrap();
        prop_assert!((c.supply * pitch * pitch / 1e6 - fp).abs() <= 1e-9 * fp);
        prop_assert_eq!(c.pass, count as f64 <= c.supply);
    }
}
