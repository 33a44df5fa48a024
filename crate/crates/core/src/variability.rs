//! Monte Carlo evaluation of read and MAC correctness under resistance
//! variability and corner-shifted sense thresholds.
//!
//! CMOS corner behavior is abstracted as a bounded multiplicative shift
//! of the sense reference; temperature and supply ride along as metadata.
//! Trials derive independent random substreams from (seed, index), so
//! reports are bit-identical for a given seed regardless of how the
//! trials are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{read_cell, CellState, DeviceParams, ReramCell, SenseConfig};
use crate::cim::{bit_serial_dot, program_bank, Bank, BankMode, MacroConfig};
use crate::error::{Error, Result};
use crate::fabric::{substream, TreeInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Corner {
    Tt,
    Ss,
    Ff,
    Sf,
    Fs,
}

/// One operating corner. Only the sense-threshold shift feeds the
/// behavioral model; temperature and supply are recorded per corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerConfig {
    pub corner: Corner,
    pub temperature_c: i32,
    pub supply_v: f64,
    /// Multiplicative shift of the sense reference: r_ref * (1 + shift).
    pub sense_threshold_shift: f64,
}

impl CornerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-40..=125).contains(&self.temperature_c) {
            return Err(Error::InvalidConfig(format!(
                "temperature {} C outside -40..=125",
                self.temperature_c
            )));
        }
        if self.sense_threshold_shift <= -0.5 || self.sense_threshold_shift >= 0.5 {
            return Err(Error::InvalidConfig(format!(
                "sense threshold shift {} outside (-0.5, 0.5)",
                self.sense_threshold_shift
            )));
        }
        Ok(())
    }

    /// The five corners with a +/-10% shift envelope at temperature
    /// extremes; the typical corner sits at the nominal threshold.
    pub fn default_corners() -> Vec<CornerConfig> {
        vec![
            CornerConfig { corner: Corner::Tt, temperature_c: 25, supply_v: 1.2, sense_threshold_shift: 0.0 },
            CornerConfig { corner: Corner::Ss, temperature_c: 125, supply_v: 1.2, sense_threshold_shift: -0.10 },
            CornerConfig { corner: Corner::Ff, temperature_c: -40, supply_v: 1.2, sense_threshold_shift: 0.10 },
            CornerConfig { corner: Corner::Sf, temperature_c: 125, supply_v: 1.2, sense_threshold_shift: -0.05 },
            CornerConfig { corner: Corner::Fs, temperature_c: -40, supply_v: 1.2, sense_threshold_shift: 0.05 },
        ]
    }
}

/// Margin histogram over log10(resistance ratio), 0.05-decade bins
/// spanning [-0.5, 1.5) plus underflow/overflow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginHistogram {
    pub bin_width: String,
    pub underflow: u64,
    pub overflow: u64,
    pub bins: Vec<u64>,
}

const HIST_LO: f64 = -0.5;
const HIST_HI: f64 = 1.5;
const HIST_BINS: usize = 40;

impl Default for MarginHistogram {
    fn default() -> Self {
        MarginHistogram {
            bin_width: "0.05 decades from -0.5".into(),
            underflow: 0,
            overflow: 0,
            bins: vec![0; HIST_BINS],
        }
    }
}

impl MarginHistogram {
    fn record(&mut self, margin: f64) {
        if margin < HIST_LO {
            self.underflow += 1;
        } else if margin >= HIST_HI {
            self.overflow += 1;
        } else {
            let bin = ((margin - HIST_LO) / ((HIST_HI - HIST_LO) / HIST_BINS as f64)) as usize;
            self.bins[bin.min(HIST_BINS - 1)] += 1;
        }
    }

    fn merge(&mut self, other: &MarginHistogram) {
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }

    /// (bin low edge, count) rows for CSV emission.
    pub fn rows(&self) -> Vec<(f64, u64)> {
        let width = (HIST_HI - HIST_LO) / HIST_BINS as f64;
        self.bins
            .iter()
            .enumerate()
            .map(|(i, &count)| (HIST_LO + i as f64 * width, count))
            .collect()
    }
}

/// Per-corner tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerOutcome {
    pub corner: Corner,
    pub temperature_c: i32,
    pub supply_v: f64,
    pub sense_threshold_shift: f64,
    pub trials: u64,
    pub read_failures: u64,
    pub min_margin_log10: f64,
}

/// Monte Carlo outcome. `read_failures` counts misread states for read
/// sweeps and oracle mismatches for MAC sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub trials: u64,
    pub read_failures: u64,
    /// Worst observed log10 margin between a sampled resistance and the
    /// effective threshold; negative values are failures.
    pub min_margin_log10: f64,
    pub per_corner: Vec<CornerOutcome>,
    pub seed: u64,
    pub histogram: MarginHistogram,
}

impl McReport {
    pub fn passed(&self) -> bool {
        self.read_failures == 0
    }
}

#[derive(Clone)]
struct TrialAccumulator {
    failures: u64,
    min_margin: f64,
    histogram: MarginHistogram,
}

impl Default for TrialAccumulator {
    fn default() -> Self {
        TrialAccumulator {
            failures: 0,
            min_margin: f64::INFINITY,
            histogram: MarginHistogram::default(),
        }
    }
}

impl TrialAccumulator {
    fn record(&mut self, margin: f64, failed: bool) {
        self.failures += failed as u64;
        self.min_margin = self.min_margin.min(margin);
        self.histogram.record(margin);
    }

    fn merge(mut self, other: Self) -> Self {
        self.failures += other.failures;
        self.min_margin = self.min_margin.min(other.min_margin);
        self.histogram.merge(&other.histogram);
        self
    }
}

/// Log-domain margin of one sampled (LRS, HRS) pair against a threshold;
/// negative when either state would be misread.
fn pair_margin(r_lrs: f64, r_hrs: f64, threshold: f64) -> f64 {
    let lrs = (threshold / r_lrs).log10();
    let hrs = (r_hrs / threshold).log10();
    lrs.min(hrs)
}

/// Per-trial read check across corners: sample both states, apply the
/// corner's threshold shift, and require LRS to read 1 and HRS to read 0.
pub fn monte_carlo_read(
    trials: u64,
    params: &DeviceParams,
    sense: &SenseConfig,
    corners: &[CornerConfig],
    seed: u64,
) -> Result<McReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trial count must be positive".into()));
    }
    params.validate_ranges()?;
    for corner in corners {
        corner.validate()?;
    }

    let mut per_corner = Vec::with_capacity(corners.len());
    let mut total_failures = 0u64;
    let mut min_margin = f64::INFINITY;
    let mut histogram = MarginHistogram::default();

    for (idx, corner) in corners.iter().enumerate() {
        let corner_seed = substream(seed, 0xC0DE + idx as u64);
        let threshold = sense.r_reference * (1.0 + corner.sense_threshold_shift);
        let acc = (0..trials)
            .into_par_iter()
            .fold(TrialAccumulator::default, |mut acc, trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(substream(corner_seed, trial));
                let r_lrs = params.sample_resistance(CellState::Lrs, &mut rng);
                let r_hrs = params.sample_resistance(CellState::Hrs, &mut rng);
                let shifted = SenseConfig { r_reference: threshold, v_read: sense.v_read };
                let lrs_cell = ReramCell { state: CellState::Lrs, resistance: r_lrs };
                let hrs_cell = ReramCell { state: CellState::Hrs, resistance: r_hrs };
                let ok = read_cell(&lrs_cell, &shifted) && !read_cell(&hrs_cell, &shifted);
                acc.record(pair_margin(r_lrs, r_hrs, threshold), !ok);
                acc
            })
            .reduce(TrialAccumulator::default, TrialAccumulator::merge);
        total_failures += acc.failures;
        min_margin = min_margin.min(acc.min_margin);
        histogram.merge(&acc.histogram);
        per_corner.push(CornerOutcome {
            corner: corner.corner,
            temperature_c: corner.temperature_c,
            supply_v: corner.supply_v,
            sense_threshold_shift: corner.sense_threshold_shift,
            trials,
            read_failures: acc.failures,
            min_margin_log10: acc.min_margin,
        });
    }

    Ok(McReport {
        trials: trials * corners.len() as u64,
        read_failures: total_failures,
        min_margin_log10: min_margin,
        per_corner,
        seed,
        histogram,
    })
}

/// Fixed dot-product workload re-run under fresh resistance samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MacFixture {
    pub weights: Vec<i64>,
    pub activations: Vec<u64>,
    pub n_bits: u32,
    pub signed: bool,
}

impl MacFixture {
    /// Deterministic random fixture at full bank occupancy.
    pub fn random(seed: u64, rows: usize, n_bits: u32, signed: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..rows)
            .map(|_| {
                if signed {
                    rng.gen_range(-8..8)
                } else {
                    rng.gen_range(0..16)
                }
            })
            .collect();
        let activations = (0..rows).map(|_| rng.gen_range(0..(1u64 << n_bits))).collect();
        MacFixture { weights, activations, n_bits, signed }
    }

    /// Integer oracle the macro must reproduce bit-exactly.
    pub fn oracle_dot(&self) -> i64 {
        self.weights
            .iter()
            .zip(&self.activations)
            .map(|(&w, &a)| w * a as i64)
            .sum()
    }
}

/// Per-trial MAC check: every cell resistance is resampled, the read path
/// re-derived, and the bit-serial dot compared against the integer oracle.
pub fn monte_carlo_mac(
    trials: u64,
    fixture: &MacFixture,
    cfg: &MacroConfig,
    params: &DeviceParams,
    sense: &SenseConfig,
    tree: &TreeInstance,
    seed: u64,
) -> Result<McReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trial count must be positive".into()));
    }
    params.validate_ranges()?;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, 0xBA5E));
    let mut base = Bank::blank(cfg, params, sense, &mut rng);
    base.set_mode(BankMode::Write);
    program_bank(&mut base, &fixture.weights, fixture.signed, params, sense, &mut rng)?;
    let expected = fixture.oracle_dot();

    let acc = (0..trials)
        .into_par_iter()
        .fold(TrialAccumulator::default, |mut acc, trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, trial));
            let mut bank = base.clone();
            bank.resample_resistances(params, sense, &mut rng);
            // Worst per-cell margin of this trial's samples.
            let mut margin = f64::INFINITY;
            for r in 0..bank.rows() {
                for c in 0..cfg.cols_per_bank {
                    let cell = bank.cell(r, c);
                    let m = match cell.state {
                        CellState::Lrs => (sense.r_reference / cell.resistance).log10(),
                        CellState::Hrs => (cell.resistance / sense.r_reference).log10(),
                    };
                    margin = margin.min(m);
                }
            }
            let out = bit_serial_dot(
                &bank,
                &fixture.activations,
                fixture.n_bits,
                tree,
                fixture.signed,
                cfg.accumulator_bits,
                false,
            );
            let failed = match out {
                Ok(out) => out.value != expected,
                Err(_) => true,
            };
            acc.record(margin, failed);
            acc
        })
        .reduce(TrialAccumulator::default, TrialAccumulator::merge);

    Ok(McReport {
        trials,
        read_failures: acc.failures,
        min_margin_log10: acc.min_margin,
        per_corner: Vec::new(),
        seed,
        histogram: acc.histogram,
    })
}
