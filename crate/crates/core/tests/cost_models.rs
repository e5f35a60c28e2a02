// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use proptest::prelude::*;
use stack3d::cost::*;
use stack3d_oracles::{mc_yield, packed_dies};

fn nodes() -> (TechNode, TechNode) {
    let r = TechNode::new("7nm", 0.15, 1.0);
    let mut n = TechNode::new("5nm", 0.2, 1.3);
    n.area_scale = 0.7;
    (r, n)
}

#[test]
fn yields_match_defect_scatter() {
    for area in [250.0, 500.0] {
        for d0 in [0.15, 0.2] {
            let mc = mc_yield(area, d0, None, 200_000, 17);
            let y = yield_poisson(area, d0).unwrap();
            assert!(
                (y - mc.yield_).abs() <= 3.0 * mc.std_err,
                "poisson {area} {d0}: {y} vs {mc:?}"
            );
            for alpha in [1.0, 3.0] {
                let mc = mc_yield(area, d0, Some(alpha), 200_000, 29);
                let y = yield_negbin(area, d0, alpha).unwrap();
                assert!(
                    (y - mc.yield_).abs() <= 3.0 * mc.std_err,
                    "negbin {area} {d0} {alpha}: {y} vs {mc:?}"
                );
            }
        }
    }
}

#[test]
fn dies_per_wafer_tracks_packing() {
    for area in (1..=18).map(|k| 50.0 * k as f64) {
        let formula = dies_per_wafer(area, 300.0).unwrap() as f64;
        let packed = packed_dies(area, 300.0, 3.0, 200, area as u64);
        let err = (formula - packed).abs() / packed;
        assert!(err <= 0.05, "{area} mm²: formula {formula}, packing {packed}");
    }
}

#[test]
fn dies_per_wafer_examples() {
    assert_eq!(dies_per_wafer(500.0, 300.0).unwrap(), 111);
    assert_eq!(dies_per_wafer(250.0, 300.0).unwrap(), 240);
    assert_eq!(gross_dies_per_wafer(500.0, 300.0).unwrap(), 141);
}

/// Split saving computed directly from wafer geometry and Poisson yield.
fn split_saving_by_hand(area: f64, d0: f64, edge_loss: bool) -> f64 {
    let dpw = |a: f64| {
        let n = PI * 150.0 * 150.0 / a - if edge_loss { PI * 300.0 / (2.0 * a).sqrt() } else { 0.0 };
        n.floor()
    };
    let cost = |a: f64| 1.0 / dpw(a) / (-a / 100.0 * d0).exp();
    1.0 - 2.0 * cost(area / 2.0) / cost(area)
}

#[test]
fn split_saving_against_hand_computation() {
    let (r, n) = nodes();
    for model in [DpwModel::Gross, DpwModel::EdgeLoss] {
        let opts = ScenarioOptions {
            cost: CostOptions {
                dpw_model: model,
                ..Default::default()
            },
            ..Default::default()
        };
        for area in [100.0, 300.0, 500.0, 800.0] {
            let rows = scenario_compare(area, &r, &n, &[Scenario::ThreeDSplitRef], &opts).unwrap();
            let want = split_saving_by_hand(area, 0.15, model == DpwModel::EdgeLoss);
            assert!((rows[0].saving - want).abs() < 1e-12, "{model:?} {area}");
        }
    }
    let rows = scenario_compare(500.0, &r, &n, &[Scenario::ThreeDSplitRef], &ScenarioOptions::default()).unwrap();
    assert!((0.30..=0.33).contains(&rows[0].saving), "{}", rows[0].saving);
}

#[test]
fn calibrated_ordering() {
    let (r, n) = nodes();
    let opts = ScenarioOptions::default();
    let c = calibrate_shrink(0.13, 500.0, &r, &n, &ShrinkBounds::default(), &opts).unwrap();
    let n = c.apply(&r, &n);
    let rows = scenario_compare(500.0, &r, &n, &Scenario::ALL, &opts).unwrap();
    let s: Vec<f64> = rows.iter().map(|r| r.saving).collect();
    assert!((s[1] - 0.13).abs() <= 1e-3);
    assert!(s[1] < s[3] && s[3] < s[2], "{s:?}");
}

#[test]
fn newer_node_costs_more_per_area() {
    let (r, mut n) = nodes();
    n.area_scale = 1.0;
    let opts = CostOptions::default();
    for area in (1..=9).map(|k| 100.0 * k as f64) {
        let a = die_cost(&DieSpec::new(area, &r), &opts).unwrap();
        let b = die_cost(&DieSpec::new(area, &n), &opts).unwrap();
        assert!(b > a);
    }
}

proptest! {
    #[test]
    fn yields_fall_with_area_and_density(a in 1.0..900.0f64, da in 0.1..100.0f64, d0 in 0.01..1.0f64, alpha in 0.2..20.0f64) {
        let p = yield_poisson(a, d0).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert!(yield_poisson(a + da, d0).unwrap() <= p);
        prop_assert!(yield_poisson(a, d0 * 1.5).unwrap() <= p);
        let nb = yield_negbin(a, d0, alpha).unwrap();
        prop_assert!(nb >= p - 1e-15);
        prop_assert!(yield_negbin(a + da, d0, alpha).unwrap() <= nb);
    }

    #[test]
    fn savings_ignore_wafer_cost_units(area in 50.0..900.0f64, k in 0.01..1000.0f64) {
        let (r, n) = nodes();
        let opts = ScenarioOptions::default();
        let base = scenario_compare(area, &r, &n, &Scenario::ALL, &opts).unwrap();
        let r2 = TechNode { wafer_cost: r.wafer_cost * k, ..r.clone() };
        let n2 = TechNode { wafer_cost: n.wafer_cost * k, ..n.clone() };
        let scaled = scenario_compare(area, &r2, &n2, &Scenario::ALL, &opts).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((a.saving - b.saving).abs() < 1e-9);
        }
    }

    #[test]
    fn stack_total_is_sum_of_parts(a in 10.0..400.0f64, b in 10.0..400.0f64, bond in 0.5..1.0f64, kgd in any::<bool>(), asm in 0.0..1.0f64, test in 0.0..0.1f64) {
        let (r, n) = nodes();
        let stack = StackSpec {
            dies: vec![DieSpec::new(a, &r), DieSpec::new(b, &n)],
            kgd_tested: kgd,
            bond_yield: bond,
            assembly_cost: asm,
            kgd_test_cost: test,
        };
        let c = stack_cost(&stack, &CostOptions::default()).unwrap();
        let sum = c.per_die_cost.iter().sum::<f64>() + c.assembly + c.test;
        prop_assert!((c.total - sum).abs() <= 1e-12 * c.total);
        prop_assert!(c.composite_yield > 0.0 && c.composite_yield <= 1.0);
    }

    #[test]
    fn calibration_hits_any_reachable_target(target in 0.0..0.25f64) {
        let (r, n) = nodes();
        let opts = ScenarioOptions::default();
        let c = calibrate_shrink(target, 500.0, &r, &n, &ShrinkBounds::default(), &opts).unwrap();
        prop_assert!((c.saving - target).abs() <= 1e-3);
    }
}
