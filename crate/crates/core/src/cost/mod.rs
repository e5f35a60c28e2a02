// SPDX-License-Identifier: Apache-2.0

//! Die yield and cost models.
//!
//! Areas are in mm² and defect densities in defects/cm², so `A·D0/100` is the
//! expected defect count per die. Costs are in arbitrary currency units per
//! wafer or per good die.

mod scenario;

use serde::Serialize;
use thiserror::Error;

pub use scenario::{
    calibrate_shrink, scenario_compare, sweep, Calibration, Scenario, ScenarioOptions, ScenarioRow, ShrinkBounds,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("a {area} mm² die does not fit on a {diameter} mm wafer")]
    NoDiesPerWafer { area: f64, diameter: f64 },
    #[error("unknown scenario `{0}`; expected 2D-ref, 2D-shrink, 3D-split-ref or 3D-hetero")]
    UnknownScenario(String),
    #[error(
        "target saving {target} is outside the reachable range [{saving_at_max}, {saving_at_min}] \
         for wafer-cost ratios [{ratio_min}, {ratio_max}]"
    )]
    Unreachable {
        target: f64,
        ratio_min: f64,
        ratio_max: f64,
        saving_at_min: f64,
        saving_at_max: f64,
    },
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CostError> {
    if cond {
        Ok(())
    } else {
        Err(CostError::InvalidInput(msg()))
    }
}

/// Expected defects on a die of `area` mm² at `d0` defects/cm².
fn defects(area: f64, d0: f64) -> f64 {
    area / 100.0 * d0
}

/// Poisson yield `exp(-A·D0)`.
pub fn yield_poisson(area: f64, d0: f64) -> Result<f64, CostError> {
    check(area >= 0.0 && d0 >= 0.0, || {
        format!("area {area} and d0 {d0} must be non-negative")
    })?;
    Ok((-defects(area, d0)).exp())
}

/// Negative-binomial yield `(1 + A·D0/α)^-α`; tends to Poisson as α grows.
pub fn yield_negbin(area: f64, d0: f64, alpha: f64) -> Result<f64, CostError> {
    check(area >= 0.0 && d0 >= 0.0, || {
        format!("area {area} and d0 {d0} must be non-negative")
    })?;
    check(alpha > 0.0, || format!("clustering parameter {alpha} must be positive"))?;
    if alpha.is_infinite() {
        return yield_poisson(area, d0);
    }
    // ln1p keeps precision for huge alpha
    Ok((-alpha * (defects(area, d0) / alpha).ln_1p()).exp())
}

/// Gross die sites with the usual edge-loss correction:
/// `floor(π(d/2)²/A − πd/√(2A))`, clamped at zero.
pub fn dies_per_wafer(die_area: f64, wafer_diameter: f64) -> Result<u64, CostError> {
    check(die_area > 0.0 && wafer_diameter > 0.0, || {
        format!("die area {die_area} and wafer diameter {wafer_diameter} must be positive")
    })?;
    let r = wafer_diameter / 2.0;
    let n = std::f64::consts::PI * r * r / die_area - std::f64::consts::PI * wafer_diameter / (2.0 * die_area).sqrt();
    Ok(n.max(0.0).floor() as u64)
}

/// Wafer area divided by die area, without edge loss.
pub fn gross_dies_per_wafer(die_area: f64, wafer_diameter: f64) -> Result<u64, CostError> {
    check(die_area > 0.0 && wafer_diameter > 0.0, || {
        format!("die area {die_area} and wafer diameter {wafer_diameter} must be positive")
    })?;
    let r = wafer_diameter / 2.0;
    Ok((std::f64::consts::PI * r * r / die_area).floor() as u64)
}

/// How die sites per wafer are counted when costing a die.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DpwModel {
    /// Wafer area over die area: cost scales with silicon area.
    #[default]
    Gross,
    /// [`dies_per_wafer`] with edge loss.
    EdgeLoss,
}

impl DpwModel {
    pub fn count(self, die_area: f64, wafer_diameter: f64) -> Result<u64, CostError> {
        match self {
            DpwModel::Gross => gross_dies_per_wafer(die_area, wafer_diameter),
            DpwModel::EdgeLoss => dies_per_wafer(die_area, wafer_diameter),
        }
    }
}

impl std::str::FromStr for DpwModel {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gross" => Ok(DpwModel::Gross),
            "edge_loss" => Ok(DpwModel::EdgeLoss),
            other => Err(CostError::InvalidInput(format!(
                "dies-per-wafer model `{other}`; expected gross or edge_loss"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechNode {
    pub name: String,
    /// defects/cm²
    pub d0: f64,
    /// Negative-binomial clustering parameter; infinite selects Poisson.
    pub alpha: f64,
    pub wafer_cost: f64,
    /// mm
    pub wafer_diameter: f64,
    /// Die-area multiplier for a design ported from the reference node.
    pub area_scale: f64,
}

impl TechNode {
    /// A Poisson-yield node on a 300 mm wafer with unit area scale.
    pub fn new(name: impl Into<String>, d0: f64, wafer_cost: f64) -> Self {
        Self {
            name: name.into(),
            d0,
            alpha: f64::INFINITY,
            wafer_cost,
            wafer_diameter: 300.0,
            area_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        check(self.d0 >= 0.0 && self.d0.is_finite(), || {
            format!("node {}: d0 {} must be non-negative", self.name, self.d0)
        })?;
        check(self.alpha > 0.0, || {
            format!("node {}: alpha {} must be positive", self.name, self.alpha)
        })?;
        check(self.wafer_cost > 0.0 && self.wafer_cost.is_finite(), || {
            format!("node {}: wafer cost {} must be positive", self.name, self.wafer_cost)
        })?;
        check(self.wafer_diameter > 0.0 && self.wafer_diameter.is_finite(), || {
            format!(
                "node {}: wafer diameter {} must be positive",
                self.name, self.wafer_diameter
            )
        })?;
        check(self.area_scale > 0.0 && self.area_scale.is_finite(), || {
            format!("node {}: area scale {} must be positive", self.name, self.area_scale)
        })
    }

    /// Yield of a die with `area` mm² of defect-sensitive area on this node.
    pub fn die_yield(&self, area: f64) -> Result<f64, CostError> {
        yield_negbin(area, self.d0, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostOptions {
    pub dpw_model: DpwModel,
    /// Yield floor for repairable (memory-like) dies.
    pub repair_floor: f64,
}

impl Default for CostOptions {
    fn default() -> Self {
        Self {
            dpw_model: DpwModel::Gross,
            repair_floor: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DieSpec<'a> {
    /// mm²
    pub area: f64,
    pub node: &'a TechNode,
    pub repairable: bool,
}

impl<'a> DieSpec<'a> {
    pub fn new(area: f64, node: &'a TechNode) -> Self {
        Self {
            area,
            node,
            repairable: false,
        }
    }
}

/// Yield of a die, lifted to the repair floor for repairable dies.
pub fn die_yield(die: &DieSpec<'_>, opts: &CostOptions) -> Result<f64, CostError> {
    check(die.area > 0.0 && die.area.is_finite(), || {
        format!("die area {} must be positive", die.area)
    })?;
    die.node.validate()?;
    let y = die.node.die_yield(die.area)?;
    Ok(if die.repairable { y.max(opts.repair_floor) } else { y })
}

/// Cost of one die slot on the wafer, before yield loss.
pub fn silicon_cost(die: &DieSpec<'_>, opts: &CostOptions) -> Result<f64, CostError> {
    die.node.validate()?;
    let dpw = opts.dpw_model.count(die.area, die.node.wafer_diameter)?;
    if dpw == 0 {
        return Err(CostError::NoDiesPerWafer {
            area: die.area,
            diameter: die.node.wafer_diameter,
        });
    }
    Ok(die.node.wafer_cost / dpw as f64)
}

/// Cost per good die: `wafer_cost / (dies_per_wafer · yield)`.
pub fn die_cost(die: &DieSpec<'_>, opts: &CostOptions) -> Result<f64, CostError> {
    Ok(silicon_cost(die, opts)? / die_yield(die, opts)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackSpec<'a> {
    pub dies: Vec<DieSpec<'a>>,
    pub kgd_tested: bool,
    /// Yield of each bonding interface.
    pub bond_yield: f64,
    pub assembly_cost: f64,
    /// Test cost per die when `kgd_tested`.
    pub kgd_test_cost: f64,
}

impl<'a> StackSpec<'a> {
    /// Known-good-die stack with perfect bonding and no adders.
    pub fn ideal(dies: Vec<DieSpec<'a>>) -> Self {
        Self {
            dies,
            kgd_tested: true,
            bond_yield: 1.0,
            assembly_cost: 0.0,
            kgd_test_cost: 0.0,
        }
    }
}

/// Cost of one good stack. Components are expressed per good stack, so
/// `total` is their sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub per_die_cost: Vec<f64>,
    pub assembly: f64,
    pub test: f64,
    pub total: f64,
    /// Die yields times bond yield: the chance that a stack built from
    /// untested dies works.
    pub composite_yield: f64,
}

/// Costs a die stack.
///
/// With known-good-die testing each die is paid at its good-die cost and
/// only bonding loses stacks. Without it, untested dies are stacked blindly
/// and every die yield compounds into the stack yield.
pub fn stack_cost(stack: &StackSpec<'_>, opts: &CostOptions) -> Result<CostBreakdown, CostError> {
    check(!stack.dies.is_empty(), || "a stack needs at least one die".into())?;
    check(stack.bond_yield > 0.0 && stack.bond_yield <= 1.0, || {
        format!("bond yield {} must lie in (0, 1]", stack.bond_yield)
    })?;
    check(stack.assembly_cost >= 0.0 && stack.kgd_test_cost >= 0.0, || {
        "assembly and test costs must be non-negative".into()
    })?;
    check((0.0..=1.0).contains(&opts.repair_floor), || {
        format!("repair floor {} must lie in [0, 1]", opts.repair_floor)
    })?;

    let interfaces = (stack.dies.len() - 1) as i32;
    let bond = stack.bond_yield.powi(interfaces);
    let mut composite = bond;
    for d in &stack.dies {
        composite *= die_yield(d, opts)?;
    }

    if stack.kgd_tested {
        let per_die_cost = stack
            .dies
            .iter()
            .map(|d| die_cost(d, opts).map(|c| c / bond))
            .collect::<Result<Vec<_>, _>>()?;
        let test = stack.kgd_test_cost * stack.dies.len() as f64 / bond;
        let assembly = stack.assembly_cost / bond;
        let total = per_die_cost.iter().sum::<f64>() + test + assembly;
        Ok(CostBreakdown {
            per_die_cost,
            assembly,
            test,
            total,
            composite_yield: composite,
        })
    } else {
        let per_die_cost = stack
            .dies
            .iter()
            .map(|d| silicon_cost(d, opts).map(|c| c / composite))
            .collect::<Result<Vec<_>, _>>()?;
        let total = per_die_cost.iter().sum::<f64>() + stack.assembly_cost;
        Ok(CostBreakdown {
            per_die_cost,
            assembly: stack.assembly_cost,
            test: 0.0,
            total,
            composite_yield: composite,
        })
    }
}

/// Parameters of a sequentially processed (monolithic) 3D die.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonolithicSpec {
    pub tiers: usize,
    /// Fraction of the total area that is defect-sensitive.
    pub critical_area_factor: f64,
    /// Processing cost of each tier beyond the first, as a multiple of the
    /// node's wafer cost.
    pub tier_cost_multiplier: f64,
}

impl MonolithicSpec {
    /// Two tiers with critical area halved and full wafer cost per tier.
    pub fn two_tier() -> Self {
        Self {
            tiers: 2,
            critical_area_factor: 0.5,
            tier_cost_multiplier: 1.0,
        }
    }
}

/// Cost of a monolithic 3D die holding `total_area` mm² of 2D-equivalent
/// design: the footprint is `total_area / tiers`, yield is evaluated on
/// `total_area · critical_area_factor`, and the wafer costs
/// `wafer_cost · (1 + (tiers − 1) · tier_cost_multiplier)`.
pub fn monolithic3d_cost(
    total_area: f64,
    node: &TechNode,
    spec: &MonolithicSpec,
    opts: &CostOptions,
) -> Result<f64, CostError> {
    check(total_area > 0.0, || format!("area {total_area} must be positive"))?;
    check(spec.tiers >= 1, || "at least one tier".into())?;
    check(
        spec.critical_area_factor > 0.0 && spec.critical_area_factor <= 1.0,
        || format!("critical area factor {} must lie in (0, 1]", spec.critical_area_factor),
    )?;
    check(spec.tier_cost_multiplier >= 0.0, || {
        format!(
            "tier cost multiplier {} must be non-negative",
            spec.tier_cost_multiplier
        )
    })?;
    node.validate()?;
    let footprint = total_area / spec.tiers as f64;
    let dpw = opts.dpw_model.count(footprint, node.wafer_diameter)?;
    if dpw == 0 {
        return Err(CostError::NoDiesPerWafer {
            area: footprint,
            diameter: node.wafer_diameter,
        });
    }
    let wafer = node.wafer_cost * (1.0 + (spec.tiers - 1) as f64 * spec.tier_cost_multiplier);
    let y = node.die_yield(total_area * spec.critical_area_factor)?;
    Ok(wafer / (dpw as f64 * y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn n7() -> TechNode {
        TechNode::new("7nm", 0.15, 1.0)
    }

    #[test]
    fn poisson_values() {
        assert_eq!(yield_poisson(0.0, 0.2).unwrap(), 1.0);
        assert!(close(yield_poisson(500.0, 0.15).unwrap(), 0.4724, 1e-3));
        assert!(close(yield_poisson(250.0, 0.15).unwrap(), 0.6873, 1e-3));
        assert!(yield_poisson(-1.0, 0.1).is_err());
        assert!(yield_poisson(1.0, -0.1).is_err());
    }

    #[test]
    fn negbin_values() {
        assert_eq!(yield_negbin(0.0, 0.2, 2.0).unwrap(), 1.0);
        assert!(close(yield_negbin(500.0, 0.15, 2.0).unwrap(), 1.375f64.powi(-2), 1e-12));
        assert!(close(yield_negbin(500.0, 0.15, 2.0).unwrap(), 0.5289, 1e-4));
        let p = yield_poisson(500.0, 0.15).unwrap();
        assert!(close(yield_negbin(500.0, 0.15, 1e9).unwrap(), p, 1e-6));
        assert!(yield_negbin(1.0, 0.1, 0.0).is_err());
        assert!(yield_negbin(1.0, 0.1, -2.0).is_err());
    }

    #[test]
    fn dpw_values() {
        assert_eq!(dies_per_wafer(500.0, 300.0).unwrap(), 111);
        assert_eq!(dies_per_wafer(250.0, 300.0).unwrap(), 240);
        assert_eq!(dies_per_wafer(70685.0, 300.0).unwrap(), 0);
        assert_eq!(gross_dies_per_wafer(500.0, 300.0).unwrap(), 141);
        assert!(dies_per_wafer(0.0, 300.0).is_err());
    }

    #[test]
    fn die_cost_linear_in_wafer_cost() {
        let opts = CostOptions::default();
        let a = n7();
        let mut b = n7();
        b.wafer_cost *= 2.0;
        let ca = die_cost(&DieSpec::new(300.0, &a), &opts).unwrap();
        let cb = die_cost(&DieSpec::new(300.0, &b), &opts).unwrap();
        assert_eq!(cb, 2.0 * ca);
    }

    #[test]
    fn perfect_yield_cost_is_slot_cost() {
        let node = TechNode::new("x", 0.0, 1000.0);
        for model in [DpwModel::Gross, DpwModel::EdgeLoss] {
            let opts = CostOptions {
                dpw_model: model,
                ..Default::default()
            };
            let c = die_cost(&DieSpec::new(500.0, &node), &opts).unwrap();
            assert_eq!(c, 1000.0 / model.count(500.0, 300.0).unwrap() as f64);
        }
    }

    #[test]
    fn die_cost_composes_dpw_and_yield() {
        let node = n7();
        let opts = CostOptions {
            dpw_model: DpwModel::EdgeLoss,
            ..Default::default()
        };
        let c = die_cost(&DieSpec::new(500.0, &node), &opts).unwrap();
        assert!(close(c, 1.0 / (111.0 * (-0.75f64).exp()), 1e-12));
    }

    #[test]
    fn repairable_floor() {
        let node = TechNode::new("m", 0.5, 1.0);
        let mut die = DieSpec::new(500.0, &node);
        let opts = CostOptions::default();
        let raw = die_yield(&die, &opts).unwrap();
        die.repairable = true;
        assert!(raw < 0.95);
        assert_eq!(die_yield(&die, &opts).unwrap(), 0.95);
    }

    #[test]
    fn oversize_die() {
        let node = n7();
        let opts = CostOptions {
            dpw_model: DpwModel::EdgeLoss,
            ..Default::default()
        };
        assert!(matches!(
            die_cost(&DieSpec::new(70685.0, &node), &opts),
            Err(CostError::NoDiesPerWafer { .. })
        ));
    }

    #[test]
    fn single_die_stack_is_die_cost() {
        let node = n7();
        let opts = CostOptions::default();
        let die = DieSpec::new(400.0, &node);
        let b = stack_cost(&StackSpec::ideal(vec![die.clone()]), &opts).unwrap();
        assert_eq!(b.total, die_cost(&die, &opts).unwrap());
        assert_eq!(b.composite_yield, die_yield(&die, &opts).unwrap());
    }

    #[test]
    fn untested_stack_compounds_yield() {
        let node = n7();
        let opts = CostOptions::default();
        let dies = vec![DieSpec::new(250.0, &node), DieSpec::new(250.0, &node)];
        let kgd = stack_cost(&StackSpec::ideal(dies.clone()), &opts).unwrap();
        let blind = stack_cost(
            &StackSpec {
                kgd_tested: false,
                ..StackSpec::ideal(dies)
            },
            &opts,
        )
        .unwrap();
        let y = yield_poisson(250.0, 0.15).unwrap();
        let silicon = 2.0 / gross_dies_per_wafer(250.0, 300.0).unwrap() as f64;
        assert!(close(blind.total, silicon / (y * y), 1e-12));
        assert!(close(blind.composite_yield, y * y, 1e-15));
        assert!(blind.total > kgd.total);
    }

    #[test]
    fn breakdown_sums_with_adders() {
        let node = n7();
        let opts = CostOptions::default();
        let stack = StackSpec {
            dies: vec![
                DieSpec::new(200.0, &node),
                DieSpec::new(100.0, &node),
                DieSpec::new(50.0, &node),
            ],
            kgd_tested: true,
            bond_yield: 0.98,
            assembly_cost: 0.01,
            kgd_test_cost: 0.002,
        };
        let b = stack_cost(&stack, &opts).unwrap();
        let sum = b.per_die_cost.iter().sum::<f64>() + b.assembly + b.test;
        assert!(close(b.total, sum, 1e-15));
        let dies: f64 = stack.dies.iter().map(|d| die_yield(d, &opts).unwrap()).product();
        assert!(close(b.composite_yield, dies * 0.98f64.powi(2), 1e-15));
        assert!(stack_cost(
            &StackSpec {
                bond_yield: 0.0,
                ..stack.clone()
            },
            &opts
        )
        .is_err());
        assert!(stack_cost(
            &StackSpec {
                bond_yield: 1.1,
                ..stack
            },
            &opts
        )
        .is_err());
    }

    #[test]
    fn monolithic_reduces_to_die_cost() {
        let node = n7();
        let opts = CostOptions::default();
        let flat = MonolithicSpec {
            tiers: 1,
            critical_area_factor: 1.0,
            tier_cost_multiplier: 1.0,
        };
        let m = monolithic3d_cost(500.0, &node, &flat, &opts).unwrap();
        assert!(close(m, die_cost(&DieSpec::new(500.0, &node), &opts).unwrap(), 1e-15));
    }

    #[test]
    fn monolithic_two_tier() {
        let node = n7();
        let opts = CostOptions::default();
        let spec = MonolithicSpec {
            tier_cost_multiplier: 0.0,
            ..MonolithicSpec::two_tier()
        };
        let c = monolithic3d_cost(500.0, &node, &spec, &opts).unwrap();
        let want = 1.0 / (gross_dies_per_wafer(250.0, 300.0).unwrap() as f64 * (-0.375f64).exp());
        assert!(close(c, want, 1e-12));
        let mut last = c;
        for m in [0.25, 0.5, 1.0, 2.0] {
            let c = monolithic3d_cost(
                500.0,
                &node,
                &MonolithicSpec {
                    tier_cost_multiplier: m,
                    ..spec
                },
                &opts,
            )
            .unwrap();
            assert!(c > last);
            last = c;
        }
        assert!(monolithic3d_cost(
            500.0,
            &node,
            &MonolithicSpec {
                critical_area_factor: 0.0,
                ..spec
            },
            &opts
        )
        .is_err());
        assert!(monolithic3d_cost(
            500.0,
            &node,
            &MonolithicSpec {
                critical_area_factor: 1.5,
                ..spec
            },
            &opts
        )
        .is_err());
    }
}
