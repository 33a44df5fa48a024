//! Leaky integrate-and-fire support for spike-driven execution.
//!
//! Spikes are binary, so spike-weight multiplication is exactly the
//! one-bit activation path of the macro: one compute cycle per step.

use serde::{Deserialize, Serialize};

use crate::cim::{bank_mac_cycle, Bank};
use crate::error::Result;
use crate::fabric::TreeInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// Membrane returns to zero on a spike.
    Zero,
    /// Threshold is subtracted, keeping the residual charge.
    #[default]
    Subtract,
}

/// Neuron parameters in accumulator units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifParams {
    pub threshold: i64,
    /// Charge drained per step before thresholding.
    pub leak: i64,
    pub reset: ResetMode,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams { threshold: 1 << 7, leak: 0, reset: ResetMode::Subtract }
    }
}

/// One neuron's integration state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifNeuronState {
    pub membrane: i64,
    pub params: LifParams,
}

impl LifNeuronState {
    pub fn new(params: LifParams) -> Self {
        LifNeuronState { membrane: 0, params }
    }

    /// Integrates one step's input charge and fires when the membrane
    /// reaches threshold. Returns the output spike.
    pub fn integrate(&mut self, charge: i64) -> bool {
        self.membrane += charge - self.params.leak;
        if self.membrane >= self.params.threshold {
            match self.params.reset {
                ResetMode::Zero => self.membrane = 0,
                ResetMode::Subtract => self.membrane -= self.params.threshold,
            }
            true
        } else {
            false
        }
    }
}

/// One spike-domain step against a programmed bank: the input spike
/// vector drives a single one-bit compute cycle whose partial sum is
/// integrated by the neuron.
pub fn snn_step(
    spikes_in: u64,
    bank: &Bank,
    tree: &TreeInstance,
    state: &mut LifNeuronState,
    signed: bool,
    accumulator_bits: u32,
) -> Result<bool> {
    let cycle = bank_mac_cycle(bank, spikes_in, tree, signed, accumulator_bits)?;
    Ok(state.integrate(cycle.value as i64))
}

/// Deterministic rate encoder: an accumulate-and-fire cell per input
/// element. Over T steps an input q in [0, 2^bits) emits about
/// q * T / 2^bits spikes. Charge starts one below the firing quantum so
/// any nonzero input spikes on the first step; at 1-bit precision a
/// single step therefore reproduces the input bits exactly.
#[derive(Debug, Clone)]
pub struct RateEncoder {
    quantum: i64,
    charge: Vec<i64>,
}

impl RateEncoder {
    pub fn new(elements: usize, activation_bits: u32) -> Self {
        let quantum = 1i64 << activation_bits;
        RateEncoder { quantum, charge: vec![quantum - 1; elements] }
    }

    /// Produces the next spike plane for the quantized input values.
    pub fn step(&mut self, values: &[i64]) -> Vec<bool> {
        values
            .iter()
            .zip(self.charge.iter_mut())
            .map(|(&v, charge)| {
                *charge += v;
                if *charge >= self.quantum {
                    *charge -= self.quantum;
                    true
                } else {
                    false
                }
            })
            .collect()
    }
}
