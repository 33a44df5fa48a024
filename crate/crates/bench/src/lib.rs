//! Shared setup for the benchmark targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcim_core::cell::{DeviceParams, SenseConfig};
use dcim_core::cim::{program_bank, Bank, BankMode, MacroConfig};
use dcim_core::fabric::{build_tree, KindSet, TreeInstance, TreeSpec};

/// The per-column reduction tree of the default macro.
pub fn column_tree() -> TreeInstance {
    build_tree(&TreeSpec::interleaved_10t28t(64, 1), &KindSet::builtin()).unwrap()
}

/// The characterization-sized tree: 64 operands of 4 bits.
pub fn word_tree() -> TreeInstance {
    build_tree(&TreeSpec::interleaved_10t28t(64, 4), &KindSet::builtin()).unwrap()
}

/// A bank programmed with seeded random signed weights.
pub fn random_bank(seed: u64) -> Bank {
    let cfg = MacroConfig::default();
    let params = DeviceParams::default();
    let sense = SenseConfig::geometric_mean(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bank = Bank::blank(&cfg, &params, &sense, &mut rng);
    bank.set_mode(BankMode::Write);
    let weights: Vec<i64> = (0..64).map(|_| rng.gen_range(-8..8)).collect();
    program_bank(&mut bank, &weights, true, &params, &sense, &mut rng).unwrap();
    bank
}

/// Seeded activation vectors below 2^n_bits.
pub fn random_activations(seed: u64, n_bits: u32) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..64).map(|_| rng.gen_range(0..(1u64 << n_bits))).collect()
}
