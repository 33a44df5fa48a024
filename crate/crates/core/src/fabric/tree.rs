//! Interleaved adder-tree construction, bit-level evaluation, error
//! characterization, and cost accounting.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AdderCellKind, KindSet};
use crate::error::{Error, Result};

/// Exhaustive characterization is only allowed up to this many total
/// input bits (operand_count * operand_width).
pub const EXHAUSTIVE_BIT_LIMIT: u32 = 20;

/// How the interleave pattern maps onto carry-chain positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PatternApply {
    /// Position p takes pattern[(p + stage offset) mod len]. Expresses
    /// alternating arrangements.
    #[default]
    Cycle,
    /// Position p takes pattern[min(p, len - 1)]. Expresses lower-part
    /// approximations that switch to an exact upper part.
    Prefix,
}

/// Wiring description for a reduction tree of ripple-carry adders.
///
/// All RCAs share the accumulator width (operand_width + log2(operand_count))
/// so no stage can overflow for exact cells; the top carry is dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpec {
    /// Number of summed operands; must be a power of two.
    pub operand_count: usize,
    /// Width of each input operand in bits.
    pub operand_width: u32,
    /// Cell kind names assigned along each carry chain.
    pub interleave_pattern: Vec<String>,
    #[serde(default)]
    pub apply: PatternApply,
    /// Rotate the pattern start by one per tree stage, so a degraded sum
    /// output feeds a restoring cell in the next stage.
    #[serde(default)]
    pub stagger_stages: bool,
    /// Longest run of degrading cells allowed on a carry chain.
    #[serde(default = "default_max_consecutive")]
    pub max_consecutive_degrading: usize,
}

fn default_max_consecutive() -> usize {
    1
}

impl TreeSpec {
    pub fn new(operand_count: usize, operand_width: u32, pattern: &[&str]) -> Self {
        TreeSpec {
            operand_count,
            operand_width,
            interleave_pattern: pattern.iter().map(|s| s.to_string()).collect(),
            apply: PatternApply::Cycle,
            stagger_stages: false,
            max_consecutive_degrading: 1,
        }
    }

    /// All positions one exact 28T cell.
    pub fn all_28t(operand_count: usize, operand_width: u32) -> Self {
        Self::new(operand_count, operand_width, &[super::KIND_EXACT_28T])
    }

    /// Strict 28T/10T alternation, starting with 28T in the first stage
    /// and rotated one position in each subsequent stage.
    pub fn interleaved_10t28t(operand_count: usize, operand_width: u32) -> Self {
        TreeSpec {
            stagger_stages: true,
            ..Self::new(
                operand_count,
                operand_width,
                &[super::KIND_EXACT_28T, super::KIND_EXACT_10T],
            )
        }
    }

    /// Lower `low_bits` positions use the OR cell, the rest exact 28T.
    pub fn loa(operand_count: usize, operand_width: u32, low_bits: usize) -> Self {
        let mut pattern = vec![super::KIND_LOA_OR; low_bits];
        pattern.push(super::KIND_EXACT_28T);
        TreeSpec {
            apply: PatternApply::Prefix,
            ..Self::new(operand_count, operand_width, &pattern)
        }
    }

    /// Accumulator width shared by every RCA in the tree.
    pub fn result_width(&self) -> u32 {
        self.operand_width + self.operand_count.trailing_zeros()
    }

    fn levels(&self) -> usize {
        self.operand_count.trailing_zeros() as usize
    }
}

/// A built tree: per-stage cell assignments resolved against a kind set.
#[derive(Debug, Clone)]
pub struct TreeInstance {
    spec: TreeSpec,
    width: u32,
    /// level_kinds[stage][position] indexes into `kinds`; every RCA in a
    /// stage shares the assignment.
    level_kinds: Vec<Vec<usize>>,
    kinds: Vec<AdderCellKind>,
    all_exact: bool,
}

/// Builds and validates a tree: resolves the pattern, rejects non
/// power-of-two operand counts and placements that chain more than
/// `max_consecutive_degrading` degrading cells on any carry path.
pub fn build_tree(spec: &TreeSpec, kinds: &KindSet) -> Result<TreeInstance> {
    if spec.operand_count == 0 || !spec.operand_count.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "operand count {} is not a power of two",
            spec.operand_count
        )));
    }
    if spec.operand_width == 0 || spec.operand_width > 32 {
        return Err(Error::InvalidConfig(format!(
            "operand width {} outside 1..=32",
            spec.operand_width
        )));
    }
    if spec.interleave_pattern.is_empty() {
        return Err(Error::InvalidPattern("pattern is empty".into()));
    }

    let mut used = Vec::new();
    let mut indices = Vec::with_capacity(spec.interleave_pattern.len());
    for name in &spec.interleave_pattern {
        let kind = kinds
            .get(name)
            .ok_or_else(|| Error::InvalidPattern(format!("unknown cell kind '{name}'")))?;
        let idx = match used.iter().position(|k: &AdderCellKind| k.name == kind.name) {
            Some(i) => i,
            None => {
                used.push(kind.clone());
                used.len() - 1
            }
        };
        indices.push(idx);
    }

    let width = spec.result_width() as usize;
    let levels = spec.levels();
    let mut level_kinds = Vec::with_capacity(levels);
    for stage in 0..levels {
        let offset = if spec.stagger_stages { stage } else { 0 };
        let assignment: Vec<usize> = (0..width)
            .map(|p| match spec.apply {
                PatternApply::Cycle => indices[(p + offset) % indices.len()],
                PatternApply::Prefix => indices[p.min(indices.len() - 1)],
            })
            .collect();
        // Degradation rule: scan runs along the carry chain.
        let mut run = 0usize;
        for &idx in &assignment {
            if used[idx].degrading {
                run += 1;
                if run > spec.max_consecutive_degrading {
                    return Err(Error::InvalidPattern(format!(
                        "stage {stage} places {run} consecutive degrading cells \
                         (limit {})",
                        spec.max_consecutive_degrading
                    )));
                }
            } else {
                run = 0;
            }
        }
        level_kinds.push(assignment);
    }

    let all_exact = level_kinds
        .iter()
        .flatten()
        .all(|&idx| used[idx].is_exact());

    Ok(TreeInstance {
        spec: spec.clone(),
        width: width as u32,
        level_kinds,
        kinds: used,
        all_exact,
    })
}

impl TreeInstance {
    pub fn spec(&self) -> &TreeSpec {
        &self.spec
    }

    pub fn result_width(&self) -> u32 {
        self.width
    }

    /// True when every placed cell computes the exact full-adder function,
    /// in which case the tree output provably equals the integer sum.
    pub fn is_exact(&self) -> bool {
        self.all_exact
    }

    pub fn stage_count(&self) -> usize {
        self.level_kinds.len()
    }

    /// Cell kind at a carry-chain position of a stage.
    pub fn kind_at(&self, stage: usize, position: usize) -> &AdderCellKind {
        &self.kinds[self.level_kinds[stage][position]]
    }

    /// Number of RCAs in a stage (every one `result_width` cells wide).
    pub fn rcas_in_stage(&self, stage: usize) -> usize {
        self.spec.operand_count >> (stage + 1)
    }

    /// Total full-adder positions in the tree.
    pub fn cell_count(&self) -> usize {
        (self.spec.operand_count - 1) * self.width as usize
    }

    fn check_operands(&self, operands: &[u64]) -> Result<()> {
        if operands.len() > self.spec.operand_count {
            return Err(Error::ShapeMismatch(format!(
                "{} operands exceed tree capacity {}",
                operands.len(),
                self.spec.operand_count
            )));
        }
        let limit = 1u64 << self.spec.operand_width;
        for &op in operands {
            if op >= limit {
                return Err(Error::OperandOutOfRange {
                    operand: op,
                    width: self.spec.operand_width,
                });
            }
        }
        Ok(())
    }

    /// Sums the operands through the tree. Exact trees take the integer
    /// fast path (equal to the gate-level result by the exactness
    /// property, which the test suite checks against `sum_emulated`);
    /// approximate trees always run the truth-table emulation. Missing
    /// operands are zero-padded.
    pub fn sum(&self, operands: &[u64]) -> Result<u64> {
        self.check_operands(operands)?;
        if self.all_exact {
            Ok(operands.iter().sum())
        } else {
            Ok(self.reduce(operands))
        }
    }

    /// Gate-level evaluation through the composed truth tables,
    /// regardless of exactness.
    pub fn sum_emulated(&self, operands: &[u64]) -> Result<u64> {
        self.check_operands(operands)?;
        Ok(self.reduce(operands))
    }

    fn reduce(&self, operands: &[u64]) -> u64 {
        let mut values = vec![0u64; self.spec.operand_count];
        values[..operands.len()].copy_from_slice(operands);
        for stage in 0..self.level_kinds.len() {
            let half = values.len() / 2;
            let mut next = Vec::with_capacity(half);
            for pair in 0..half {
                next.push(self.rca(stage, values[2 * pair], values[2 * pair + 1]));
            }
            values = next;
        }
        values[0]
    }

    fn rca(&self, stage: usize, a: u64, b: u64) -> u64 {
        let assignment = &self.level_kinds[stage];
        let mut out = 0u64;
        let mut carry = false;
        for (p, &kind_idx) in assignment.iter().enumerate() {
            let (sum, cout) = self.kinds[kind_idx].eval(
                (a >> p) & 1 != 0,
                (b >> p) & 1 != 0,
                carry,
            );
            out |= (sum as u64) << p;
            carry = cout;
        }
        // Top carry is dropped; the shared width makes it 0 for exact cells.
        out
    }

    /// Error metrics of the tree against the exact integer sum.
    pub fn characterize(&self, mode: SampleMode) -> Result<ErrorReport> {
        match mode {
            SampleMode::Exhaustive => {
                let input_bits = self.spec.operand_count as u32 * self.spec.operand_width;
                if input_bits > EXHAUSTIVE_BIT_LIMIT {
                    return Err(Error::IntractableExhaustive {
                        input_bits,
                        limit: EXHAUSTIVE_BIT_LIMIT,
                    });
                }
                let total = 1u64 << input_bits;
                let acc = (0..total)
                    .into_par_iter()
                    .fold(ErrorAccumulator::default, |mut acc, code| {
                        let operands = self.decode(code);
                        acc.record(self.reduce(&operands), operands.iter().sum());
                        acc
                    })
                    .reduce(ErrorAccumulator::default, ErrorAccumulator::merge);
                Ok(acc.report(true))
            }
            SampleMode::Sampled { samples, seed } => {
                if samples == 0 {
                    return Err(Error::InvalidConfig("sample count must be positive".into()));
                }
                let acc = (0..samples)
                    .into_par_iter()
                    .fold(ErrorAccumulator::default, |mut acc, i| {
                        // Per-sample substream keeps results independent of
                        // the parallel partitioning.
                        let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, i));
                        let limit = 1u64 << self.spec.operand_width;
                        let operands: Vec<u64> = (0..self.spec.operand_count)
                            .map(|_| rng.gen_range(0..limit))
                            .collect();
                        acc.record(self.reduce(&operands), operands.iter().sum());
                        acc
                    })
                    .reduce(ErrorAccumulator::default, ErrorAccumulator::merge);
                Ok(acc.report(false))
            }
        }
    }

    /// Sums per-cell constants; delay is the worst root-to-leaf path,
    /// which under shared stage assignments is the sum over stages of the
    /// full carry-chain delay.
    pub fn cost(&self, costs: &CellCosts) -> Result<FabricCost> {
        let mut per_kind: Vec<&CellCost> = Vec::with_capacity(self.kinds.len());
        for kind in &self.kinds {
            per_kind.push(
                costs
                    .cells
                    .get(&kind.name)
                    .ok_or_else(|| Error::MissingCostConstant(kind.name.clone()))?,
            );
        }
        let mut transistors = 0u64;
        let mut power_uw = 0.0f64;
        let mut delay_ns = 0.0f64;
        for (stage, assignment) in self.level_kinds.iter().enumerate() {
            let rcas = self.rcas_in_stage(stage) as u64;
            let mut chain_delay = 0.0;
            for &kind_idx in assignment {
                let cost = per_kind[kind_idx];
                transistors += rcas * cost.transistors as u64;
                power_uw += rcas as f64 * cost.power_uw;
                chain_delay += cost.delay_ns;
            }
            delay_ns += chain_delay;
        }
        Ok(FabricCost { transistors, power_uw, delay_ns })
    }

    fn decode(&self, code: u64) -> Vec<u64> {
        let mask = (1u64 << self.spec.operand_width) - 1;
        (0..self.spec.operand_count)
            .map(|i| (code >> (i as u32 * self.spec.operand_width)) & mask)
            .collect()
    }
}

/// splitmix64 finalizer over (seed, index): cheap independent substreams.
pub(crate) fn substream(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Input-space coverage for `characterize`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

#[derive(Default, Clone)]
struct ErrorAccumulator {
    count: u64,
    sum_abs: u128,
    sum_sq: u128,
    max: u64,
}

impl ErrorAccumulator {
    fn record(&mut self, got: u64, exact: u64) {
        let diff = got.abs_diff(exact);
        self.count += 1;
        self.sum_abs += diff as u128;
        self.sum_sq += (diff as u128) * (diff as u128);
        self.max = self.max.max(diff);
    }

    fn merge(mut self, other: Self) -> Self {
        self.count += other.count;
        self.sum_abs += other.sum_abs;
        self.sum_sq += other.sum_sq;
        self.max = self.max.max(other.max);
        self
    }

    fn report(&self, exhaustive: bool) -> ErrorReport {
        let n = self.count.max(1) as f64;
        ErrorReport {
            avg_error: self.sum_abs as f64 / n,
            rmse: (self.sum_sq as f64 / n).sqrt(),
            max_error: self.max as f64,
            samples: self.count,
            exhaustive,
        }
    }
}

/// Deviation of the tree output from the exact integer sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub avg_error: f64,
    pub rmse: f64,
    pub max_error: f64,
    pub samples: u64,
    pub exhaustive: bool,
}

/// Transistor count, power, and critical-path delay of a built tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FabricCost {
    pub transistors: u64,
    pub power_uw: f64,
    pub delay_ns: f64,
}

/// Per-cell cost constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCost {
    pub transistors: u32,
    pub power_uw: f64,
    pub delay_ns: f64,
}

/// Cost constants keyed by cell kind name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CellCosts {
    pub cells: BTreeMap<String, CellCost>,
}

impl CellCosts {
    /// Transistor-only constants straight from the kind definitions
    /// (power and delay zero, for structural accounting).
    pub fn transistors_only(kinds: &KindSet) -> Self {
        CellCosts {
            cells: kinds
                .kinds()
                .iter()
                .map(|k| {
                    (
                        k.name.clone(),
                        CellCost { transistors: k.transistor_count, power_uw: 0.0, delay_ns: 0.0 },
                    )
                })
                .collect(),
        }
    }

    /// Derives per-cell 28T/10T power and delay from whole-tree anchor
    /// measurements of the all-28T and strictly alternating trees built
    /// at the given geometry. The anchors are calibration inputs; per-cell
    /// values are chosen so the whole-tree totals reproduce them exactly.
    pub fn from_tree_anchors(anchors: &TreeAnchors, kinds: &KindSet) -> Result<Self> {
        let spec = TreeSpec::all_28t(anchors.operand_count, anchors.operand_width);
        if !anchors.operand_count.is_power_of_two() || anchors.operand_count < 2 {
            return Err(Error::InvalidConfig(
                "anchor operand count must be a power of two >= 2".into(),
            ));
        }
        let cells = (anchors.operand_count - 1) as f64 * spec.result_width() as f64;
        let stages = anchors.operand_count.trailing_zeros() as f64;
        let path = stages * spec.result_width() as f64;

        let p28 = anchors.all_28t_power_uw / cells;
        let p10 = anchors.interleaved_power_uw / (cells / 2.0) - p28;
        let d28 = anchors.all_28t_delay_ns / path;
        let d10 = anchors.interleaved_delay_ns / (path / 2.0) - d28;
        if p10 < 0.0 || d10 < 0.0 {
            return Err(Error::InvalidConfig(
                "anchor values imply a negative 10T cell cost".into(),
            ));
        }

        let mut costs = Self::transistors_only(kinds);
        if let Some(c) = costs.cells.get_mut(super::KIND_EXACT_28T) {
            c.power_uw = p28;
            c.delay_ns = d28;
        }
        if let Some(c) = costs.cells.get_mut(super::KIND_EXACT_10T) {
            c.power_uw = p10;
            c.delay_ns = d10;
        }
        Ok(costs)
    }
}

/// Whole-tree calibration anchors for the two exact presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeAnchors {
    pub operand_count: usize,
    pub operand_width: u32,
    pub all_28t_power_uw: f64,
    pub interleaved_power_uw: f64,
    pub all_28t_delay_ns: f64,
    pub interleaved_delay_ns: f64,
}
