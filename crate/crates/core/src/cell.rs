//! Behavioral model of the 3T1R ReRAM bitcell.
//!
//! A cell stores one weight bit as a resistance state (LRS = 1, HRS = 0)
//! with a sampled resistance inside the configured variability band.
//! Reads compare the sampled resistance against a reference threshold,
//! and in-memory multiplication is the AND of the input activation with
//! the read-out bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resistance state of the ReRAM device. LRS encodes weight bit 1,
/// HRS encodes weight bit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Hrs,
    Lrs,
}

impl CellState {
    /// The weight bit this state encodes.
    pub fn bit(self) -> bool {
        matches!(self, CellState::Lrs)
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            CellState::Lrs
        } else {
            CellState::Hrs
        }
    }
}

/// How sampled resistances are drawn within the variability band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResistanceDistribution {
    /// Uniform over [nominal(1-f), nominal(1+f)].
    #[default]
    Uniform,
    /// Gaussian centered on the nominal with sigma = nominal*f/3,
    /// rejection-truncated to the band.
    GaussianTruncated,
}

/// Device-level parameters of the ReRAM cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    /// Nominal low-resistance-state value, ohms.
    pub r_lrs_nominal: f64,
    /// Nominal high-resistance-state value, ohms.
    pub r_hrs_nominal: f64,
    /// SET voltage, volts.
    pub v_set: f64,
    /// RESET voltage, volts.
    pub v_reset: f64,
    /// Half-width of the relative variability band (0.20 = +/-20%).
    pub variability_fraction: f64,
    pub distribution: ResistanceDistribution,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            r_lrs_nominal: 10e3,
            r_hrs_nominal: 500e3,
            v_set: 1.2,
            v_reset: -1.2,
            variability_fraction: 0.20,
            distribution: ResistanceDistribution::Uniform,
        }
    }
}

impl DeviceParams {
    /// Validates the resistance window and variability band.
    pub fn validate(&self) -> Result<()> {
        self.validate_ranges()?;
        if self.r_hrs_nominal / self.r_lrs_nominal < 2.0 {
            return Err(Error::InvalidConfig(format!(
                "resistance window {:.2}x is below the 2x sensing minimum",
                self.r_hrs_nominal / self.r_lrs_nominal
            )));
        }
        Ok(())
    }

    /// Range checks without the sensing-window requirement. Monte Carlo
    /// sweeps accept windows the macro itself would reject, since
    /// quantifying a bad window is their job.
    pub fn validate_ranges(&self) -> Result<()> {
        if !(self.r_lrs_nominal > 0.0 && self.r_hrs_nominal > self.r_lrs_nominal) {
            return Err(Error::InvalidConfig(
                "resistance nominals must be positive with HRS above LRS".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.variability_fraction) {
            return Err(Error::InvalidConfig(format!(
                "variability fraction {} outside [0, 1)",
                self.variability_fraction
            )));
        }
        Ok(())
    }

    /// Nominal resistance for a state, ohms.
    pub fn nominal(&self, state: CellState) -> f64 {
        match state {
            CellState::Lrs => self.r_lrs_nominal,
            CellState::Hrs => self.r_hrs_nominal,
        }
    }

    /// Variability band [lo, hi] for a state, ohms.
    pub fn band(&self, state: CellState) -> (f64, f64) {
        let nominal = self.nominal(state);
        let f = self.variability_fraction;
        (nominal * (1.0 - f), nominal * (1.0 + f))
    }

    /// Draws a resistance for `state` from the configured distribution.
    pub fn sample_resistance<R: Rng + ?Sized>(&self, state: CellState, rng: &mut R) -> f64 {
        let (lo, hi) = self.band(state);
        if lo == hi {
            return lo;
        }
        match self.distribution {
            ResistanceDistribution::Uniform => rng.gen_range(lo..=hi),
            ResistanceDistribution::GaussianTruncated => {
                let nominal = self.nominal(state);
                let sigma = nominal * self.variability_fraction / 3.0;
                loop {
                    // Box-Muller; rejection keeps the sample inside the band.
                    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                    let r = nominal + sigma * z;
                    if (lo..=hi).contains(&r) {
                        return r;
                    }
                }
            }
        }
    }
}

/// One 3T1R bitcell: stored state plus its sampled resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReramCell {
    pub state: CellState,
    /// Sampled device resistance, ohms.
    pub resistance: f64,
}

impl ReramCell {
    /// A fresh cell in `state` at the nominal resistance (no variability).
    pub fn nominal(state: CellState, params: &DeviceParams) -> Self {
        ReramCell {
            state,
            resistance: params.nominal(state),
        }
    }
}

/// Read-path configuration: the voltage-divider comparison is reduced to
/// a resistance threshold. Cells below the reference read as 1 (LRS).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenseConfig {
    /// Reference resistance, ohms.
    pub r_reference: f64,
    /// Read voltage, volts (metadata; the behavioral model is threshold-only).
    pub v_read: f64,
}

impl SenseConfig {
    /// Reference at the geometric mean of the two nominals, which maximizes
    /// the symmetric log-domain margin.
    pub fn geometric_mean(params: &DeviceParams) -> Self {
        SenseConfig {
            r_reference: (params.r_lrs_nominal * params.r_hrs_nominal).sqrt(),
            v_read: 0.2,
        }
    }

    /// Rejects references that can misclassify a worst-case cell:
    /// max LRS resistance must stay below the reference and min HRS above it.
    pub fn validate(&self, params: &DeviceParams) -> Result<()> {
        let (_, lrs_max) = params.band(CellState::Lrs);
        let (hrs_min, _) = params.band(CellState::Hrs);
        if !(self.r_reference > lrs_max && self.r_reference < hrs_min) {
            return Err(Error::InvalidConfig(format!(
                "sense reference {:.1} ohms outside the open window ({:.1}, {:.1})",
                self.r_reference, lrs_max, hrs_min
            )));
        }
        Ok(())
    }
}

/// SET/RESET the cell to `target` and resample its resistance.
/// Idempotent in state; the resistance is freshly drawn on every write.
pub fn write_cell<R: Rng + ?Sized>(
    cell: ReramCell,
    target: CellState,
    params: &DeviceParams,
    rng: &mut R,
) -> ReramCell {
    let _ = cell;
    ReramCell {
        state: target,
        resistance: params.sample_resistance(target, rng),
    }
}

/// Digital read: 1 iff the sampled resistance is below the reference.
pub fn read_cell(cell: &ReramCell, sense: &SenseConfig) -> bool {
    cell.resistance < sense.r_reference
}

/// AND-based in-memory multiplication of an input activation bit with the
/// stored weight bit. Inputs and weights labeled -1 at the circuit level
/// map to logical 0 here; signedness is applied by column weighting in the
/// macro, not at the cell.
pub fn cim_multiply(activation: bool, cell: &ReramCell, sense: &SenseConfig) -> bool {
    activation && read_cell(cell, sense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_var() -> DeviceParams {
        DeviceParams {
            variability_fraction: 0.0,
            ..DeviceParams::default()
        }
    }

    #[test]
    fn write_sets_state_and_nominal_resistance_without_variability() {
        let params = zero_var();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = ReramCell::nominal(CellState::Hrs, &params);
        let written = write_cell(cell, CellState::Lrs, &params, &mut rng);
        assert_eq!(written.state, CellState::Lrs);
        assert_eq!(written.resistance, 10e3);
    }

    #[test]
    fn write_is_idempotent_in_state() {
        let params = zero_var();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cell = ReramCell::nominal(CellState::Hrs, &params);
        let written = write_cell(cell, CellState::Hrs, &params, &mut rng);
        assert_eq!(written.state, CellState::Hrs);
        assert_eq!(written.resistance, 500e3);
    }

    #[test]
    fn sampled_resistance_stays_in_band() {
        // Exhaustive bound check on the sampler output.
        let params = DeviceParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let r = params.sample_resistance(CellState::Lrs, &mut rng);
            assert!((8e3..=12e3).contains(&r), "LRS sample {r} outside band");
        }
        let gauss = DeviceParams {
            distribution: ResistanceDistribution::GaussianTruncated,
            ..params
        };
        for _ in 0..10_000 {
            let r = gauss.sample_resistance(CellState::Hrs, &mut rng);
            assert!((400e3..=600e3).contains(&r), "HRS sample {r} outside band");
        }
    }

    #[test]
    fn read_compares_against_reference() {
        let params = DeviceParams::default();
        let sense = SenseConfig::geometric_mean(&params);
        // Geometric mean of 10k and 500k.
        assert!((sense.r_reference - 70_710.678).abs() < 1e-3);

        let lrs = ReramCell { state: CellState::Lrs, resistance: 10e3 };
        let hrs = ReramCell { state: CellState::Hrs, resistance: 500e3 };
        let lrs_worst = ReramCell { state: CellState::Lrs, resistance: 12e3 };
        assert!(read_cell(&lrs, &sense));
        assert!(!read_cell(&hrs, &sense));
        assert!(read_cell(&lrs_worst, &sense));
    }

    #[test]
    fn sense_reference_outside_window_is_rejected() {
        let params = DeviceParams::default();
        let inside = SenseConfig { r_reference: 70e3, v_read: 0.2 };
        assert!(inside.validate(&params).is_ok());
        let below = SenseConfig { r_reference: 11e3, v_read: 0.2 };
        assert!(below.validate(&params).is_err());
        let above = SenseConfig { r_reference: 450e3, v_read: 0.2 };
        assert!(above.validate(&params).is_err());
    }

    #[test]
    fn cim_multiply_matches_and_truth_table() {
        let params = zero_var();
        let sense = SenseConfig::geometric_mean(&params);
        let lrs = ReramCell::nominal(CellState::Lrs, &params);
        let hrs = ReramCell::nominal(CellState::Hrs, &params);
        assert!(cim_multiply(true, &lrs, &sense));
        assert!(!cim_multiply(true, &hrs, &sense));
        assert!(!cim_multiply(false, &lrs, &sense));
        assert!(!cim_multiply(false, &hrs, &sense));
        // cim_multiply(a, c) == a AND read_cell(c) for all combinations.
        for (act, cell) in [(false, &lrs), (false, &hrs), (true, &lrs), (true, &hrs)] {
            assert_eq!(cim_multiply(act, cell, &sense), act && read_cell(cell, &sense));
        }
    }

    #[test]
    fn write_read_round_trips_the_bit() {
        let params = DeviceParams::default();
        let sense = SenseConfig::geometric_mean(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cell = ReramCell::nominal(CellState::Hrs, &params);
        for i in 0..10_000 {
            let target = CellState::from_bit(i % 2 == 0);
            cell = write_cell(cell, target, &params, &mut rng);
            assert_eq!(read_cell(&cell, &sense), target.bit());
        }
    }

    #[test]
    fn default_window_never_overlaps_under_full_variability() {
        let params = DeviceParams::default();
        let (_, lrs_max) = params.band(CellState::Lrs);
        let (hrs_min, _) = params.band(CellState::Hrs);
        assert_eq!(lrs_max, 12e3);
        assert_eq!(hrs_min, 400e3);
        assert!(hrs_min > lrs_max);
    }
}
