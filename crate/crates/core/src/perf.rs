//! Analytical latency / throughput / energy estimation.
//!
//! The model is formula-first: every report carries the formulas it used
//! and the calibration constants behind them. Absolute power numbers are
//! calibration inputs, not predictions; shipped presets reproduce the
//! published operating point and say so.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cim::SparsityStats;
use crate::error::{Error, Result};
use crate::mapper::MappingPlan;

/// How measured bit-plane sparsity is credited to throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CreditRule {
    /// Skipped cycles vanish from the latency: effective = total * (1 - s).
    #[default]
    CycleElision,
    /// Fixed multiplier applied to dense throughput.
    UpliftFactor(f64),
}

/// A fixed workload used by calibration presets instead of a mapped plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub macs: u64,
    pub cycles: u64,
}

/// Calibration constants for the cost model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConstants {
    /// Compute-cycle latency, nanoseconds.
    pub cycle_latency_ns: f64,
    /// Whole-tree power of one bank's reduction fabric, microwatts.
    pub adder_tree_power_uw_per_bank: f64,
    /// Fractions of total power drawn by peripheral components
    /// (accumulator, activation, pooling, batchnorm, control). Sum <= 1;
    /// the remainder is the adder-tree share.
    pub peripheral_shares: BTreeMap<String, f64>,
    /// Optional energy-per-MAC calibration, femtojoules.
    pub energy_per_mac_fj: Option<f64>,
    /// Absolute power override, watts. Presets calibrated to a published
    /// operating point set this.
    pub power_override_w: Option<f64>,
    pub credit_rule: CreditRule,
    /// Fixed workload for preset arithmetic without a plan.
    pub workload: Option<Workload>,
    /// Published figures echoed into reports for comparison.
    pub reference: BTreeMap<String, f64>,
}

impl Default for CostConstants {
    fn default() -> Self {
        CostConstants {
            cycle_latency_ns: 0.48,
            adder_tree_power_uw_per_bank: 640.0,
            peripheral_shares: BTreeMap::new(),
            energy_per_mac_fj: None,
            power_override_w: None,
            credit_rule: CreditRule::CycleElision,
            workload: None,
            reference: BTreeMap::new(),
        }
    }
}

impl CostConstants {
    pub fn validate(&self) -> Result<()> {
        if !self.cycle_latency_ns.is_finite() || self.cycle_latency_ns <= 0.0 {
            return Err(Error::InvalidConfig("cycle latency must be positive".into()));
        }
        if !self.adder_tree_power_uw_per_bank.is_finite()
            || self.adder_tree_power_uw_per_bank <= 0.0
        {
            return Err(Error::InvalidConfig("tree power must be positive".into()));
        }
        let mut total = 0.0;
        for (name, &share) in &self.peripheral_shares {
            if !(0.0..=1.0).contains(&share) {
                return Err(Error::InvalidConfig(format!(
                    "peripheral share '{name}' = {share} outside [0, 1]"
                )));
            }
            total += share;
        }
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "peripheral shares sum to {total}, above 1"
            )));
        }
        if let Some(e) = self.energy_per_mac_fj {
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::InvalidConfig("energy per MAC must be positive".into()));
            }
        }
        if let Some(p) = self.power_override_w {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::InvalidConfig("power override must be positive".into()));
            }
        }
        if let CreditRule::UpliftFactor(f) = self.credit_rule {
            if !f.is_finite() || f < 1.0 {
                return Err(Error::InvalidConfig(format!("uplift factor {f} below 1")));
            }
        }
        Ok(())
    }

    pub fn peripheral_share_total(&self) -> f64 {
        self.peripheral_shares.values().sum()
    }
}

/// Per-layer slice of the estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCost {
    pub layer: String,
    pub op_cycles: u64,
    pub macs: u64,
    pub banks_used: usize,
    pub passes: usize,
}

/// The full cost estimate, with its formulas and assumptions attached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub total_cycles: u64,
    pub effective_cycles: f64,
    pub sparsity_credit: f64,
    pub latency_s: f64,
    pub macs: u64,
    pub throughput_tops: f64,
    pub power_w: f64,
    pub efficiency_tops_per_w: f64,
    pub peripheral_power_uw: f64,
    pub per_layer: Vec<LayerCost>,
    /// The arithmetic behind every figure above.
    pub formulas: Vec<String>,
    /// Published figures carried alongside, never asserted.
    pub reference: BTreeMap<String, f64>,
}

/// Estimates cost for an explicit (macs, cycles) workload.
pub fn estimate_workload(
    workload: Workload,
    constants: &CostConstants,
    sparsity_credit: f64,
    active_banks: f64,
) -> Result<CostReport> {
    constants.validate()?;
    if !(0.0..1.0).contains(&sparsity_credit) {
        return Err(Error::InvalidConfig(format!(
            "sparsity credit {sparsity_credit} outside [0, 1)"
        )));
    }
    if workload.cycles == 0 {
        return Err(Error::InvalidConfig("workload has zero cycles".into()));
    }

    let mut formulas = Vec::new();
    let effective_cycles = match constants.credit_rule {
        CreditRule::CycleElision => {
            formulas.push(format!(
                "effective_cycles = total_cycles * (1 - sparsity_credit) = {} * (1 - {})",
                workload.cycles, sparsity_credit
            ));
            workload.cycles as f64 * (1.0 - sparsity_credit)
        }
        CreditRule::UpliftFactor(f) => {
            let f = if sparsity_credit > 0.0 { f } else { 1.0 };
            formulas.push(format!(
                "effective_cycles = total_cycles / uplift = {} / {}",
                workload.cycles, f
            ));
            workload.cycles as f64 / f
        }
    };
    let latency_s = effective_cycles * constants.cycle_latency_ns * 1e-9;
    formulas.push(format!(
        "latency_s = effective_cycles * {} ns",
        constants.cycle_latency_ns
    ));
    let ops = 2.0 * workload.macs as f64;
    let throughput_tops = ops / latency_s / 1e12;
    formulas.push("throughput = 2 * macs / latency (2 ops per MAC)".into());

    let share_total = constants.peripheral_share_total();
    let power_w = if let Some(p) = constants.power_override_w {
        formulas.push(format!("power = calibration override {p} W"));
        p
    } else if let Some(e_fj) = constants.energy_per_mac_fj {
        let mac_power = workload.macs as f64 * e_fj * 1e-15 / latency_s;
        if share_total >= 1.0 {
            return Err(Error::InvalidConfig(
                "peripheral shares of 1 need a power override".into(),
            ));
        }
        formulas.push(format!(
            "power = macs * {e_fj} fJ / latency / (1 - peripheral shares {share_total})"
        ));
        mac_power / (1.0 - share_total)
    } else {
        if share_total >= 1.0 {
            return Err(Error::InvalidConfig(
                "peripheral shares of 1 need a power override".into(),
            ));
        }
        let tree_w = active_banks * constants.adder_tree_power_uw_per_bank * 1e-6;
        formulas.push(format!(
            "power = {active_banks} active banks * {} uW / (1 - peripheral shares {share_total})",
            constants.adder_tree_power_uw_per_bank
        ));
        tree_w / (1.0 - share_total)
    };

    let efficiency = throughput_tops / power_w;
    formulas.push("efficiency = throughput / power".into());
    let peripheral_power_uw = power_w * share_total * 1e6;

    Ok(CostReport {
        total_cycles: workload.cycles,
        effective_cycles,
        sparsity_credit,
        latency_s,
        macs: workload.macs,
        throughput_tops,
        power_w,
        efficiency_tops_per_w: efficiency,
        peripheral_power_uw,
        per_layer: Vec::new(),
        formulas,
        reference: constants.reference.clone(),
    })
}

/// Estimates cost for a mapped plan, crediting measured sparsity.
pub fn estimate(
    plan: &MappingPlan,
    constants: &CostConstants,
    skip_stats: Option<&SparsityStats>,
) -> Result<CostReport> {
    let credit = skip_stats.map(|s| s.zero_fraction).unwrap_or(0.0);
    let workload = Workload {
        macs: plan.totals.retained_macs,
        cycles: plan.totals.op_cycles,
    };
    // Cycle-weighted average of banks active per pass.
    let mut weighted = 0.0f64;
    for entry in &plan.entries {
        if entry.passes == 0 {
            continue;
        }
        weighted += entry.op_cycles as f64 * (entry.banks_used as f64 / entry.passes as f64);
    }
    let active_banks = if plan.totals.op_cycles == 0 {
        0.0
    } else {
        weighted / plan.totals.op_cycles as f64
    };
    let mut report = estimate_workload(workload, constants, credit, active_banks)?;
    report.per_layer = plan
        .entries
        .iter()
        .map(|e| LayerCost {
            layer: e.layer.clone(),
            op_cycles: e.op_cycles,
            macs: e.retained_weights as u64
                * if e.kind == crate::mapper::LayerKind::Conv {
                    e.output_positions as u64
                } else {
                    1
                },
            banks_used: e.banks_used,
            passes: e.passes,
        })
        .collect();
    Ok(report)
}

/// Splits a peripheral power budget across components proportionally to
/// the configured shares. Largest-remainder rounding at 0.001 uW makes
/// the emitted slices sum to the rounded budget exactly.
pub fn peripheral_breakdown(
    peripheral_power_uw: f64,
    shares: &BTreeMap<String, f64>,
) -> Result<Vec<(String, f64)>> {
    let total_share: f64 = shares.values().sum();
    if total_share > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "peripheral shares sum to {total_share}, above 1"
        )));
    }
    if shares.is_empty() || total_share == 0.0 {
        return Ok(Vec::new());
    }
    const QUANTUM: f64 = 1e-3;
    let budget_q = (peripheral_power_uw / QUANTUM).round() as i64;
    let mut rows: Vec<(String, i64, f64)> = shares
        .iter()
        .map(|(name, &share)| {
            let exact = peripheral_power_uw * share / total_share / QUANTUM;
            (name.clone(), exact.floor() as i64, exact - exact.floor())
        })
        .collect();
    let assigned: i64 = rows.iter().map(|r| r.1).sum();
    let mut remainder = budget_q - assigned;
    // Hand leftover quanta to the largest fractional parts; ties resolve
    // by name order for determinism.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].2.partial_cmp(&rows[a].2).unwrap().then(rows[a].0.cmp(&rows[b].0)));
    let mut i = 0;
    while remainder > 0 {
        let target = order[i % order.len()];
        rows[target].1 += 1;
        remainder -= 1;
        i += 1;
    }
    Ok(rows
        .into_iter()
        .map(|(name, q, _)| (name, q as f64 * QUANTUM))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> CostConstants {
        CostConstants {
            cycle_latency_ns: 0.48,
            power_override_w: Some(2.31e12 / 314e12),
            workload: Some(Workload { macs: 554_400_000, cycles: 1_000_000 }),
            ..CostConstants::default()
        }
    }

    #[test]
    fn preset_reproduces_calibrated_operating_point() {
        let constants = preset();
        let report =
            estimate_workload(constants.workload.unwrap(), &constants, 0.0, 64.0).unwrap();
        let latency_per_cycle_ns = report.latency_s * 1e9 / report.effective_cycles;
        assert!((latency_per_cycle_ns - 0.48).abs() < 1e-12);
        assert!((report.throughput_tops - 2.31).abs() / 2.31 < 1e-9);
        assert!((report.efficiency_tops_per_w - 314.0).abs() / 314.0 < 1e-9);
    }

    #[test]
    fn cycle_elision_uplift_is_one_over_one_minus_credit() {
        let constants = preset();
        let dense =
            estimate_workload(constants.workload.unwrap(), &constants, 0.0, 64.0).unwrap();
        let sparse =
            estimate_workload(constants.workload.unwrap(), &constants, 0.30, 64.0).unwrap();
        let uplift = sparse.throughput_tops / dense.throughput_tops;
        assert!((uplift - 1.0 / 0.7).abs() < 1e-9);
        // Halving cycles at fixed ops doubles throughput.
        let half = Workload { macs: 554_400_000, cycles: 500_000 };
        let fast = estimate_workload(half, &constants, 0.0, 64.0).unwrap();
        assert!((fast.throughput_tops - 2.0 * dense.throughput_tops).abs() < 1e-9);
    }

    #[test]
    fn uplift_factor_rule_applies_configured_multiplier() {
        let constants = CostConstants {
            credit_rule: CreditRule::UpliftFactor(3.1 / 2.31),
            ..preset()
        };
        let dense =
            estimate_workload(constants.workload.unwrap(), &constants, 0.0, 64.0).unwrap();
        let sparse =
            estimate_workload(constants.workload.unwrap(), &constants, 0.30, 64.0).unwrap();
        assert!((sparse.throughput_tops / dense.throughput_tops - 3.1 / 2.31).abs() < 1e-9);
    }

    #[test]
    fn report_is_self_consistent() {
        let constants = preset();
        let report =
            estimate_workload(constants.workload.unwrap(), &constants, 0.30, 64.0).unwrap();
        // efficiency * power == throughput to within one ulp.
        let recomposed = report.efficiency_tops_per_w * report.power_w;
        assert!((recomposed - report.throughput_tops).abs() <= report.throughput_tops * f64::EPSILON);
        assert!((report.throughput_tops
            - 2.0 * report.macs as f64 / report.latency_s / 1e12)
            .abs()
            < 1e-9);
    }

    #[test]
    fn breakdown_splits_exactly() {
        let shares: BTreeMap<String, f64> = [
            ("accumulator", 0.4),
            ("activation", 0.3),
            ("pooling", 0.15),
            ("batchnorm", 0.1),
            ("control", 0.05),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
        let rows = peripheral_breakdown(100.0, &shares).unwrap();
        let by_name: BTreeMap<&str, f64> = rows.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        assert_eq!(by_name["accumulator"], 40.0);
        assert_eq!(by_name["activation"], 30.0);
        assert_eq!(by_name["pooling"], 15.0);
        assert_eq!(by_name["batchnorm"], 10.0);
        assert_eq!(by_name["control"], 5.0);
        let sum: f64 = rows.iter().map(|(_, v)| v).sum();
        assert!((sum - 100.0).abs() < 1e-9);

        // Equal shares split equally; a lone share of 1 takes everything.
        let equal: BTreeMap<String, f64> =
            (0..5).map(|i| (format!("c{i}"), 0.2)).collect();
        let rows = peripheral_breakdown(55.5, &equal).unwrap();
        for (_, v) in &rows {
            assert!((v - 11.1).abs() < 1e-9);
        }
        let lone: BTreeMap<String, f64> = [("control".to_string(), 1.0)].into();
        let rows = peripheral_breakdown(7.25, &lone).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].1 - 7.25).abs() < 1e-9);
    }

    #[test]
    fn breakdown_rejects_oversubscribed_shares() {
        let shares: BTreeMap<String, f64> =
            [("a".to_string(), 0.7), ("b".to_string(), 0.5)].into();
        assert!(peripheral_breakdown(10.0, &shares).is_err());
    }

    #[test]
    fn uneven_budget_rounds_by_largest_remainder() {
        let shares: BTreeMap<String, f64> =
            [("a".to_string(), 1.0 / 3.0), ("b".to_string(), 2.0 / 3.0)].into();
        let rows = peripheral_breakdown(10.0, &shares).unwrap();
        let sum: f64 = rows.iter().map(|(_, v)| v).sum();
        assert!((sum - 10.0).abs() < 1e-12);
    }
}
