// SPDX-License-Identifier: Apache-2.0

//! 2D shrink versus 3D stacking scenarios for a fixed design size.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{stack_cost, CostBreakdown, CostError, CostOptions, DieSpec, StackSpec, TechNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scenario {
    /// One die on the reference node.
    #[serde(rename = "2D-ref")]
    TwoDRef,
    /// One die ported to the new node, area scaled by its `area_scale`.
    #[serde(rename = "2D-shrink")]
    TwoDShrink,
    /// Two half-size dies on the reference node, stacked.
    #[serde(rename = "3D-split-ref")]
    ThreeDSplitRef,
    /// Half on the reference node stacked with half on the new node.
    #[serde(rename = "3D-hetero")]
    ThreeDHetero,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::TwoDRef,
        Scenario::TwoDShrink,
        Scenario::ThreeDSplitRef,
        Scenario::ThreeDHetero,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::TwoDRef => "2D-ref",
            Scenario::TwoDShrink => "2D-shrink",
            Scenario::ThreeDSplitRef => "3D-split-ref",
            Scenario::ThreeDHetero => "3D-hetero",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.label() == s)
            .ok_or_else(|| CostError::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOptions {
    pub cost: CostOptions,
    pub kgd_tested: bool,
    pub bond_yield: f64,
    pub assembly_cost: f64,
    pub kgd_test_cost: f64,
    /// Area multiplier of the new-node half in 3D-hetero. `None` uses the
    /// new node's `area_scale`.
    pub hetero_scale: Option<f64>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            cost: CostOptions::default(),
            kgd_tested: true,
            bond_yield: 1.0,
            assembly_cost: 0.0,
            kgd_test_cost: 0.0,
            hetero_scale: Some(1.0),
        }
    }
}

impl ScenarioOptions {
    fn stack<'a>(&self, dies: Vec<DieSpec<'a>>) -> StackSpec<'a> {
        StackSpec {
            dies,
            kgd_tested: self.kgd_tested,
            bond_yield: self.bond_yield,
            assembly_cost: self.assembly_cost,
            kgd_test_cost: self.kgd_test_cost,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub scenario: Scenario,
    pub total_area: f64,
    pub breakdown: CostBreakdown,
    /// Fractional saving against 2D-ref at the same area.
    pub saving: f64,
}

fn scenario_cost(
    scenario: Scenario,
    total_area: f64,
    ref_node: &TechNode,
    new_node: &TechNode,
    opts: &ScenarioOptions,
) -> Result<CostBreakdown, CostError> {
    let half = total_area / 2.0;
    match scenario {
        Scenario::TwoDRef => stack_cost(&StackSpec::ideal(vec![DieSpec::new(total_area, ref_node)]), &opts.cost),
        Scenario::TwoDShrink => stack_cost(
            &StackSpec::ideal(vec![DieSpec::new(total_area * new_node.area_scale, new_node)]),
            &opts.cost,
        ),
        Scenario::ThreeDSplitRef => stack_cost(
            &opts.stack(vec![DieSpec::new(half, ref_node), DieSpec::new(half, ref_node)]),
            &opts.cost,
        ),
        Scenario::ThreeDHetero => {
            let scale = opts.hetero_scale.unwrap_or(new_node.area_scale);
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(CostError::InvalidInput(format!(
                    "hetero scale {scale} must be positive"
                )));
            }
            stack_cost(
                &opts.stack(vec![DieSpec::new(half, ref_node), DieSpec::new(half * scale, new_node)]),
                &opts.cost,
            )
        }
    }
}

/// Costs each scenario at one design size. Savings are relative to 2D-ref,
/// which is evaluated whether or not it is listed.
pub fn scenario_compare(
    total_area: f64,
    ref_node: &TechNode,
    new_node: &TechNode,
    scenarios: &[Scenario],
    opts: &ScenarioOptions,
) -> Result<Vec<ScenarioRow>, CostError> {
    if !(total_area > 0.0 && total_area.is_finite()) {
        return Err(CostError::InvalidInput(format!(
            "total area {total_area} must be positive"
        )));
    }
    ref_node.validate()?;
    new_node.validate()?;
    let baseline = scenario_cost(Scenario::TwoDRef, total_area, ref_node, new_node, opts)?.total;
    scenarios
        .iter()
        .map(|&sc| {
            let breakdown = scenario_cost(sc, total_area, ref_node, new_node, opts)?;
            Ok(ScenarioRow {
                scenario: sc,
                total_area,
                saving: 1.0 - breakdown.total / baseline,
                breakdown,
            })
        })
        .collect()
}

/// Scenario-major sweep over ascending areas.
pub fn sweep(
    areas: &[f64],
    ref_node: &TechNode,
    new_node: &TechNode,
    scenarios: &[Scenario],
    opts: &ScenarioOptions,
) -> Result<Vec<ScenarioRow>, CostError> {
    if scenarios.is_empty() {
        return Err(CostError::InvalidInput("no scenarios requested".into()));
    }
    let mut sorted = areas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut per_area = Vec::with_capacity(sorted.len());
    for &a in &sorted {
        per_area.push(scenario_compare(a, ref_node, new_node, scenarios, opts)?);
    }
    let mut rows = Vec::with_capacity(sorted.len() * scenarios.len());
    for si in 0..scenarios.len() {
        for area_rows in &per_area {
            rows.push(area_rows[si].clone());
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkBounds {
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Held fixed while the wafer-cost ratio is searched.
    pub area_scale: f64,
}

impl Default for ShrinkBounds {
    fn default() -> Self {
        Self {
            ratio_min: 0.5,
            ratio_max: 4.0,
            area_scale: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub area_scale: f64,
    /// New-node wafer cost divided by reference wafer cost.
    pub wafer_cost_ratio: f64,
    /// 2D-shrink saving reached with these parameters.
    pub saving: f64,
    pub iterations: usize,
}

impl Calibration {
    /// The new node with the calibrated wafer cost and area scale applied.
    pub fn apply(&self, ref_node: &TechNode, new_node: &TechNode) -> TechNode {
        TechNode {
            wafer_cost: ref_node.wafer_cost * self.wafer_cost_ratio,
            area_scale: self.area_scale,
            ..new_node.clone()
        }
    }
}

/// Finds the new-node wafer-cost ratio at which 2D-shrink saves
/// `target_saving` against 2D-ref at `total_area`, by bisection at a fixed
/// area scale.
pub fn calibrate_shrink(
    target_saving: f64,
    total_area: f64,
    ref_node: &TechNode,
    new_node: &TechNode,
    bounds: &ShrinkBounds,
    opts: &ScenarioOptions,
) -> Result<Calibration, CostError> {
    const TOL: f64 = 1e-3;
    if !(bounds.ratio_min > 0.0 && bounds.ratio_min <= bounds.ratio_max && bounds.area_scale > 0.0) {
        return Err(CostError::InvalidInput(format!(
            "calibration bounds {bounds:?} are not a positive interval"
        )));
    }
    let saving_at = |ratio: f64| -> Result<f64, CostError> {
        let node = TechNode {
            wafer_cost: ref_node.wafer_cost * ratio,
            area_scale: bounds.area_scale,
            ..new_node.clone()
        };
        let rows = scenario_compare(total_area, ref_node, &node, &[Scenario::TwoDShrink], opts)?;
        Ok(rows[0].saving)
    };

    // saving falls as the new wafer gets dearer
    let (mut lo, mut hi) = (bounds.ratio_min, bounds.ratio_max);
    let s_lo = saving_at(lo)?;
    let s_hi = saving_at(hi)?;
    if target_saving > s_lo + TOL || target_saving < s_hi - TOL {
        return Err(CostError::Unreachable {
            target: target_saving,
            ratio_min: lo,
            ratio_max: hi,
            saving_at_min: s_lo,
            saving_at_max: s_hi,
        });
    }
    let mut iterations = 0;
    let mut mid = 0.5 * (lo + hi);
    let mut s_mid = saving_at(mid)?;
    while iterations < 200 && hi - lo > 1e-14 * hi {
        iterations += 1;
        if s_mid > target_saving {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        s_mid = saving_at(mid)?;
    }
    Ok(Calibration {
        area_scale: bounds.area_scale,
        wafer_cost_ratio: mid,
        saving: s_mid,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{die_cost, gross_dies_per_wafer, DpwModel};

    fn nodes() -> (TechNode, TechNode) {
        let r = TechNode::new("7nm", 0.15, 1.0);
        let mut n = TechNode::new("5nm", 0.2, 1.3);
        n.area_scale = 0.7;
        (r, n)
    }

    #[test]
    fn labels_parse() {
        for sc in Scenario::ALL {
            assert_eq!(sc.label().parse::<Scenario>().unwrap(), sc);
        }
        assert!(matches!(
            "3D-magic".parse::<Scenario>(),
            Err(CostError::UnknownScenario(_))
        ));
    }

    #[test]
    fn split_saving_closed_form() {
        let (r, n) = nodes();
        let rows = scenario_compare(500.0, &r, &n, &[Scenario::ThreeDSplitRef], &ScenarioOptions::default()).unwrap();
        // gross DPW at 250 mm² is exactly twice that at 500 mm²
        assert_eq!(gross_dies_per_wafer(250.0, 300.0).unwrap(), 282);
        assert_eq!(gross_dies_per_wafer(500.0, 300.0).unwrap(), 141);
        assert!((rows[0].saving - (1.0 - (-0.375f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn baseline_row_saves_nothing() {
        let (r, n) = nodes();
        let rows = scenario_compare(300.0, &r, &n, &Scenario::ALL, &ScenarioOptions::default()).unwrap();
        assert_eq!(rows[0].saving, 0.0);
        assert_eq!(
            rows[0].breakdown.total,
            die_cost(&DieSpec::new(300.0, &r), &CostOptions::default()).unwrap()
        );
    }

    #[test]
    fn savings_invariant_to_wafer_cost_scaling() {
        let (r, n) = nodes();
        let opts = ScenarioOptions::default();
        let base = scenario_compare(500.0, &r, &n, &Scenario::ALL, &opts).unwrap();
        let r2 = TechNode {
            wafer_cost: r.wafer_cost * 7.5,
            ..r.clone()
        };
        let n2 = TechNode {
            wafer_cost: n.wafer_cost * 7.5,
            ..n.clone()
        };
        let scaled = scenario_compare(500.0, &r2, &n2, &Scenario::ALL, &opts).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert!((a.saving - b.saving).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_order() {
        let (r, n) = nodes();
        let scen = [Scenario::ThreeDHetero, Scenario::TwoDRef];
        let rows = sweep(&[300.0, 100.0, 200.0], &r, &n, &scen, &ScenarioOptions::default()).unwrap();
        let got: Vec<_> = rows.iter().map(|r| (r.scenario, r.total_area)).collect();
        assert_eq!(
            got,
            vec![
                (Scenario::ThreeDHetero, 100.0),
                (Scenario::ThreeDHetero, 200.0),
                (Scenario::ThreeDHetero, 300.0),
                (Scenario::TwoDRef, 100.0),
                (Scenario::TwoDRef, 200.0),
                (Scenario::TwoDRef, 300.0),
            ]
        );
        assert!(sweep(&[100.0], &r, &n, &[], &ScenarioOptions::default()).is_err());
    }

    #[test]
    fn calibrate_noop() {
        let r = TechNode::new("a", 0.15, 1.0);
        let n = TechNode::new("b", 0.15, 1.0);
        let bounds = ShrinkBounds {
            ratio_min: 1.0,
            ratio_max: 1.0,
            area_scale: 1.0,
        };
        let c = calibrate_shrink(0.0, 500.0, &r, &n, &bounds, &ScenarioOptions::default()).unwrap();
        assert_eq!(c.wafer_cost_ratio, 1.0);
    }

    #[test]
    fn calibrate_hits_target_and_is_monotone() {
        let (r, n) = nodes();
        let bounds = ShrinkBounds {
            ratio_min: 1.0,
            ratio_max: 2.0,
            area_scale: 0.7,
        };
        for model in [DpwModel::Gross, DpwModel::EdgeLoss] {
            let opts = ScenarioOptions {
                cost: CostOptions {
                    dpw_model: model,
                    ..Default::default()
                },
                ..Default::default()
            };
            let mut last = f64::INFINITY;
            for target in [0.05, 0.10, 0.13, 0.20] {
                let c = calibrate_shrink(target, 500.0, &r, &n, &bounds, &opts).unwrap();
                assert!((c.saving - target).abs() < 1e-3);
                assert!(c.wafer_cost_ratio > 1.0 && c.wafer_cost_ratio < 2.0);
                assert!(c.wafer_cost_ratio < last);
                last = c.wafer_cost_ratio;
                let applied = c.apply(&r, &n);
                let rows = scenario_compare(500.0, &r, &applied, &[Scenario::TwoDShrink], &opts).unwrap();
                assert!((rows[0].saving - target).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn calibrate_unreachable_reports_bracket() {
        let (r, n) = nodes();
        let bounds = ShrinkBounds {
            ratio_min: 1.0,
            ratio_max: 1.1,
            area_scale: 0.7,
        };
        match calibrate_shrink(0.9, 500.0, &r, &n, &bounds, &ScenarioOptions::default()) {
            Err(CostError::Unreachable {
                saving_at_min,
                saving_at_max,
                ..
            }) => {
                assert!(saving_at_min > saving_at_max);
            }
            other => panic!("{other:?}"),
        }
    }
}
