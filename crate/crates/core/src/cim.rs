//! The 16 Kb macro: 64 banks of 64 rows x 4 columns.
//!
//! Each bank row stores one 4-bit weight word (column 3 = MSB). A compute
//! cycle ANDs one activation bit per row against the stored bits, reduces
//! each column through the adder tree, and combines the four column sums
//! with weights (1, 2, 4, 8) -- or (1, 2, 4, -8) when weights are signed
//! two's complement. Multi-bit activations run bit-serially MSB first with
//! a shift-accumulate; wider weights combine several banks, one per 4-bit
//! slice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{write_cell, CellState, DeviceParams, ReramCell, SenseConfig};
use crate::error::{Error, Result};
use crate::fabric::TreeInstance;

/// Geometry and precision configuration of the macro.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacroConfig {
    pub banks: usize,
    pub rows_per_bank: usize,
    pub cols_per_bank: usize,
    /// Width of the per-cycle partial-sum register.
    pub accumulator_bits: u32,
    /// Bit-serial input precision, 1..=8.
    pub activation_bits: u32,
    /// Weight precision; multiples of 4, realized as weight_bits/4 banks.
    pub weight_bits: u32,
    pub signed_weights: bool,
}

impl Default for MacroConfig {
    fn default() -> Self {
        MacroConfig {
            banks: 64,
            rows_per_bank: 64,
            cols_per_bank: 4,
            accumulator_bits: 10,
            activation_bits: 8,
            weight_bits: 4,
            signed_weights: true,
        }
    }
}

impl MacroConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.activation_bits) {
            return Err(Error::InvalidConfig(format!(
                "activation bits {} outside 1..=8",
                self.activation_bits
            )));
        }
        if self.weight_bits == 0 || !self.weight_bits.is_multiple_of(4) {
            return Err(Error::InvalidConfig(format!(
                "weight bits {} is not a positive multiple of 4",
                self.weight_bits
            )));
        }
        if self.banks == 0 {
            return Err(Error::InvalidConfig("bank count must be positive".into()));
        }
        if self.rows_per_bank == 0 || self.rows_per_bank > 64 {
            return Err(Error::InvalidConfig(
                "rows per bank must be in 1..=64".into(),
            ));
        }
        if self.cols_per_bank != 4 {
            return Err(Error::InvalidConfig(
                "banks store 4-bit weight words; cols_per_bank must be 4".into(),
            ));
        }
        if !(2..=32).contains(&self.accumulator_bits) {
            return Err(Error::InvalidConfig(format!(
                "accumulator bits {} outside 2..=32",
                self.accumulator_bits
            )));
        }
        Ok(())
    }

    /// Total bit capacity; 16384 for the default geometry.
    pub fn capacity_bits(&self) -> usize {
        self.banks * self.rows_per_bank * self.cols_per_bank
    }

    /// Number of banks one logical weight word spans.
    pub fn slices_per_weight(&self) -> usize {
        (self.weight_bits / 4) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BankMode {
    /// CIM enable gated off; compute cycles are rejected.
    Write,
    Compute,
}

/// One 64x4 bank of ReRAM cells plus the read-out bit matrix.
///
/// The column masks cache `read_cell` over the stored cells; they are
/// refreshed on every write or resample so compute paths stay consistent
/// with the device state.
#[derive(Debug, Clone)]
pub struct Bank {
    rows: usize,
    cols: usize,
    cells: Vec<ReramCell>,
    mode: BankMode,
    /// column_masks[c] bit r = read-out of cell (r, c).
    column_masks: Vec<u64>,
}

impl Bank {
    /// A bank with every cell written to HRS (weight 0).
    pub fn blank<R: Rng + ?Sized>(
        cfg: &MacroConfig,
        params: &DeviceParams,
        sense: &SenseConfig,
        rng: &mut R,
    ) -> Self {
        let mut bank = Bank {
            rows: cfg.rows_per_bank,
            cols: cfg.cols_per_bank,
            cells: vec![ReramCell::nominal(CellState::Hrs, params); cfg.rows_per_bank * cfg.cols_per_bank],
            mode: BankMode::Write,
            column_masks: vec![0; cfg.cols_per_bank],
        };
        for cell in &mut bank.cells {
            *cell = write_cell(*cell, CellState::Hrs, params, rng);
        }
        bank.refresh_read_masks(sense);
        bank.mode = BankMode::Compute;
        bank
    }

    pub fn mode(&self) -> BankMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: BankMode) {
        self.mode = mode;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cell(&self, row: usize, col: usize) -> &ReramCell {
        &self.cells[row * self.cols + col]
    }

    /// Read-out bits of one column packed row-wise into a u64.
    pub fn column_mask(&self, col: usize) -> u64 {
        self.column_masks[col]
    }

    /// Recomputes the cached read-out bits from the cell resistances.
    pub fn refresh_read_masks(&mut self, sense: &SenseConfig) {
        for c in 0..self.cols {
            let mut mask = 0u64;
            for r in 0..self.rows {
                if crate::cell::read_cell(self.cell(r, c), sense) {
                    mask |= 1 << r;
                }
            }
            self.column_masks[c] = mask;
        }
    }

    /// Redraws every cell resistance from its state's variability band.
    pub fn resample_resistances<R: Rng + ?Sized>(
        &mut self,
        params: &DeviceParams,
        sense: &SenseConfig,
        rng: &mut R,
    ) {
        for cell in &mut self.cells {
            cell.resistance = params.sample_resistance(cell.state, rng);
        }
        self.refresh_read_masks(sense);
    }
}

/// Validates one weight against the 4-bit storage range.
fn check_weight_word(weight: i64, signed: bool) -> Result<u8> {
    let ok = if signed {
        (-8..=7).contains(&weight)
    } else {
        (0..=15).contains(&weight)
    };
    if !ok {
        return Err(Error::WeightOutOfRange { weight, bits: 4, signed });
    }
    Ok((weight as u8) & 0xF)
}

/// Programs up to `rows` weights into the bank, one 4-bit word per row,
/// LSB in column 0 and MSB in column 3. Unused rows are written to HRS.
/// The bank must be in write mode and returns to compute mode afterwards.
pub fn program_bank<R: Rng + ?Sized>(
    bank: &mut Bank,
    weights: &[i64],
    signed: bool,
    params: &DeviceParams,
    sense: &SenseConfig,
    rng: &mut R,
) -> Result<()> {
    if bank.mode != BankMode::Write {
        return Err(Error::InvalidConfig(
            "bank must be in write mode before programming".into(),
        ));
    }
    if weights.len() > bank.rows {
        return Err(Error::InvalidConfig(format!(
            "{} weights exceed the {}-row bank",
            weights.len(),
            bank.rows
        )));
    }
    for (r, &weight) in weights.iter().enumerate() {
        let word = check_weight_word(weight, signed)?;
        for c in 0..bank.cols {
            let target = CellState::from_bit((word >> c) & 1 != 0);
            let cell = bank.cells[r * bank.cols + c];
            bank.cells[r * bank.cols + c] = write_cell(cell, target, params, rng);
        }
    }
    for r in weights.len()..bank.rows {
        for c in 0..bank.cols {
            let cell = bank.cells[r * bank.cols + c];
            bank.cells[r * bank.cols + c] = write_cell(cell, CellState::Hrs, params, rng);
        }
    }
    bank.refresh_read_masks(sense);
    bank.mode = BankMode::Compute;
    Ok(())
}

/// One cycle's signed partial sum, bounded by the accumulator register
/// width (960 max unsigned, -512..=448 signed for the 64-row bank).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclePartialSum {
    pub value: i32,
    pub width: u32,
}

impl CyclePartialSum {
    pub fn new(value: i32, width: u32) -> Result<Self> {
        let lo = -(1i64 << (width - 1));
        let hi = (1i64 << width) - 1;
        // Signed column weighting uses [-2^(w-1), 2^(w-1)-1]; unsigned uses
        // [0, 2^w - 1]. Both fit the union check against the register width.
        if (value as i64) < lo || (value as i64) > hi {
            return Err(Error::InvalidConfig(format!(
                "cycle partial sum {value} exceeds the {width}-bit register"
            )));
        }
        Ok(CyclePartialSum { value, width })
    }
}

/// Column weights for combining the four column sums into one word.
fn column_weights(signed: bool) -> [i32; 4] {
    if signed {
        [1, 2, 4, -8]
    } else {
        [1, 2, 4, 8]
    }
}

/// One compute cycle: AND every activation bit against its row, reduce
/// each column through the tree, and combine columns by place value.
pub fn bank_mac_cycle(
    bank: &Bank,
    activation_bits: u64,
    tree: &TreeInstance,
    signed: bool,
    accumulator_bits: u32,
) -> Result<CyclePartialSum> {
    if bank.mode == BankMode::Write {
        return Err(Error::ComputeWhileWriting);
    }
    if tree.spec().operand_count != bank.rows || tree.spec().operand_width != 1 {
        return Err(Error::ShapeMismatch(format!(
            "column tree must reduce {} one-bit operands, got {}x{}-bit",
            bank.rows,
            tree.spec().operand_count,
            tree.spec().operand_width
        )));
    }
    let weights = column_weights(signed);
    let mut total = 0i64;
    for (&weight, &mask) in weights.iter().zip(&bank.column_masks) {
        let products = activation_bits & mask;
        let column_sum = if tree.is_exact() {
            products.count_ones() as u64
        } else {
            let bits: Vec<u64> = (0..bank.rows).map(|r| (products >> r) & 1).collect();
            tree.sum(&bits)?
        };
        total += weight as i64 * column_sum as i64;
    }
    CyclePartialSum::new(total as i32, accumulator_bits)
}

/// MSB-first shift-accumulate register for bit-serial dots. Sized as
/// the per-cycle register width plus activation_bits - 1 for the shifts
/// plus an 8-bit guard, which provably never overflows for legal inputs
/// (|final| <= 960 * (2^8 - 1) = 244800 < 2^18).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftAccumulator {
    value: i64,
    width: u32,
}

impl ShiftAccumulator {
    pub fn new(accumulator_bits: u32, activation_bits: u32) -> Self {
        ShiftAccumulator { value: 0, width: accumulator_bits + activation_bits - 1 + 8 }
    }

    /// Shift left one bit-plane and add the cycle's partial sum.
    pub fn shift_accumulate(&mut self, cycle: i32) -> Result<()> {
        self.value = (self.value << 1) + cycle as i64;
        let bound = 1i64 << (self.width - 1);
        if self.value <= -bound || self.value >= bound {
            return Err(Error::InvalidConfig(format!(
                "shift accumulator overflowed its {}-bit width",
                self.width
            )));
        }
        Ok(())
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn width(&self) -> u32 {
        self.width
    }
}

/// Result of a bit-serial dot product with cycle accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DotOutcome {
    pub value: i64,
    /// Cycles that drove the array and tree.
    pub executed_cycles: u32,
    /// Cycles elided because the whole activation bit-plane was zero.
    pub skipped_cycles: u32,
}

impl DotOutcome {
    pub fn total_cycles(&self) -> u32 {
        self.executed_cycles + self.skipped_cycles
    }
}

/// Bit-serial dot product over one bank: activation bits are applied MSB
/// first, one plane per cycle, with the accumulator shifted left between
/// planes. Exactly `n_bits` cycles are consumed; with `zero_skip` the
/// all-zero planes skip the array work without changing the result.
pub fn bit_serial_dot(
    bank: &Bank,
    activations: &[u64],
    n_bits: u32,
    tree: &TreeInstance,
    signed: bool,
    accumulator_bits: u32,
    zero_skip: bool,
) -> Result<DotOutcome> {
    if !(1..=8).contains(&n_bits) {
        return Err(Error::InvalidConfig(format!(
            "activation precision {n_bits} outside 1..=8"
        )));
    }
    if activations.len() > bank.rows {
        return Err(Error::ShapeMismatch(format!(
            "{} activations exceed the {}-row bank",
            activations.len(),
            bank.rows
        )));
    }
    let limit = 1u64 << n_bits;
    for &act in activations {
        if act >= limit {
            return Err(Error::ActivationOutOfRange { activation: act, bits: n_bits });
        }
    }

    let mut acc = ShiftAccumulator::new(accumulator_bits, n_bits);
    let mut executed = 0u32;
    let mut skipped = 0u32;
    for plane in (0..n_bits).rev() {
        let mut bits = 0u64;
        for (r, &act) in activations.iter().enumerate() {
            bits |= ((act >> plane) & 1) << r;
        }
        if zero_skip && bits == 0 {
            // The plane contributes nothing; shift to keep place value
            // without driving the array or tree.
            acc.shift_accumulate(0)?;
            skipped += 1;
            continue;
        }
        let cycle = bank_mac_cycle(bank, bits, tree, signed, accumulator_bits)?;
        acc.shift_accumulate(cycle.value)?;
        executed += 1;
    }
    Ok(DotOutcome { value: acc.value(), executed_cycles: executed, skipped_cycles: skipped })
}

/// Recombines per-slice dot products of a wide weight: partial_i << offset_i.
/// Offsets must be strictly increasing multiples of 4; the caller programs
/// low slices unsigned and only the top slice signed.
pub fn combine_banks(partials: &[i64], offsets: &[u32]) -> Result<i64> {
    if partials.len() != offsets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} partials vs {} offsets",
            partials.len(),
            offsets.len()
        )));
    }
    let mut previous: Option<u32> = None;
    for &offset in offsets {
        if !offset.is_multiple_of(4) {
            return Err(Error::InvalidConfig(format!(
                "slice offset {offset} is not a multiple of 4"
            )));
        }
        if let Some(prev) = previous {
            if offset <= prev {
                return Err(Error::InvalidConfig(
                    "slice offsets must be strictly increasing".into(),
                ));
            }
        }
        previous = Some(offset);
    }
    Ok(partials
        .iter()
        .zip(offsets)
        .map(|(&p, &off)| p << off)
        .sum())
}

/// Splits a wide weight into 4-bit bank slices, LSB slice first. All
/// slices are unsigned nibbles except the top one, which keeps the sign
/// when `signed` is set.
pub fn slice_weight(weight: i64, weight_bits: u32, signed: bool) -> Result<Vec<i64>> {
    if weight_bits == 0 || !weight_bits.is_multiple_of(4) {
        return Err(Error::InvalidConfig(format!(
            "weight bits {weight_bits} is not a positive multiple of 4"
        )));
    }
    let (lo, hi) = if signed {
        (-(1i64 << (weight_bits - 1)), (1i64 << (weight_bits - 1)) - 1)
    } else {
        (0, (1i64 << weight_bits) - 1)
    };
    if weight < lo || weight > hi {
        return Err(Error::WeightOutOfRange { weight, bits: weight_bits, signed });
    }
    let slices = (weight_bits / 4) as usize;
    let mut out = Vec::with_capacity(slices);
    for i in 0..slices {
        if i + 1 == slices {
            // Arithmetic shift keeps the top slice's sign.
            out.push(weight >> (4 * i as u32));
        } else {
            out.push((weight >> (4 * i as u32)) & 0xF);
        }
    }
    Ok(out)
}

/// Bit-plane sparsity over a stream of activation vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SparsityStats {
    pub total_cycles: u64,
    pub skipped_cycles: u64,
    pub zero_fraction: f64,
}

/// Counts the bit-planes that are entirely zero across a stream of
/// activation vectors; those cycles are skippable.
pub fn sparsity_stats<'a, I>(stream: I, n_bits: u32) -> SparsityStats
where
    I: IntoIterator<Item = &'a [u64]>,
{
    let mut total = 0u64;
    let mut skipped = 0u64;
    for activations in stream {
        for plane in 0..n_bits {
            total += 1;
            if activations.iter().all(|&a| (a >> plane) & 1 == 0) {
                skipped += 1;
            }
        }
    }
    SparsityStats {
        total_cycles: total,
        skipped_cycles: skipped,
        zero_fraction: if total == 0 { 0.0 } else { skipped as f64 / total as f64 },
    }
}

/// The full macro: bank array plus shared device, sense, and tree state.
#[derive(Debug, Clone)]
pub struct CimMacro {
    pub config: MacroConfig,
    pub device: DeviceParams,
    pub sense: SenseConfig,
    banks: Vec<Bank>,
}

impl CimMacro {
    pub fn new<R: Rng + ?Sized>(
        config: MacroConfig,
        device: DeviceParams,
        sense: SenseConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        device.validate()?;
        sense.validate(&device)?;
        let banks = (0..config.banks)
            .map(|_| Bank::blank(&config, &device, &sense, rng))
            .collect();
        Ok(CimMacro { config, device, sense, banks })
    }

    /// Macro with default geometry, nominal resistances, and geometric-mean
    /// sensing.
    pub fn with_defaults<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        let device = DeviceParams::default();
        let sense = SenseConfig::geometric_mean(&device);
        Self::new(MacroConfig::default(), device, sense, rng)
    }

    pub fn bank(&self, index: usize) -> &Bank {
        &self.banks[index]
    }

    pub fn bank_count(&self) -> usize {
        self.banks.len()
    }

    /// Programs one bank with 4-bit weight words.
    pub fn program<R: Rng + ?Sized>(
        &mut self,
        bank_index: usize,
        weights: &[i64],
        signed: bool,
        rng: &mut R,
    ) -> Result<()> {
        let bank = &mut self.banks[bank_index];
        bank.set_mode(BankMode::Write);
        program_bank(bank, weights, signed, &self.device, &self.sense, rng)
    }

    /// Bit-serial dot product against one bank.
    pub fn dot(
        &self,
        bank_index: usize,
        activations: &[u64],
        n_bits: u32,
        tree: &TreeInstance,
        signed: bool,
        zero_skip: bool,
    ) -> Result<DotOutcome> {
        bit_serial_dot(
            &self.banks[bank_index],
            activations,
            n_bits,
            tree,
            signed,
            self.config.accumulator_bits,
            zero_skip,
        )
    }
}
