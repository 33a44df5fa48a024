//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`). Every
//! tolerance is pinned here; functional checks are bit-exact with zero
//! tolerance.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcim_core::cell::{
    cim_multiply, read_cell, CellState, DeviceParams, ReramCell, SenseConfig,
};
use dcim_core::cim::{
    bank_mac_cycle, bit_serial_dot, combine_banks, program_bank, slice_weight, Bank, BankMode,
    MacroConfig,
};
use dcim_core::config::{load_reference_mapping, CellLibraryFile, TreePresetFile};
use dcim_core::fabric::{build_tree, KindSet, SampleMode, TreeInstance, TreeSpec};
use dcim_core::mapper::map_network;
use dcim_core::perf::{estimate_workload, CostConstants};
use dcim_core::runtime::{
    run_inference, snn_step, InferenceMode, InferenceSetup, LifNeuronState, LifParams,
    ResetMode, RunOptions,
};
use dcim_core::variability::{monte_carlo_mac, monte_carlo_read, CornerConfig, MacFixture};

fn column_tree() -> TreeInstance {
    build_tree(&TreeSpec::interleaved_10t28t(64, 1), &KindSet::builtin()).unwrap()
}

fn nominal_bank(weights: &[i64], signed: bool, rng: &mut ChaCha8Rng) -> Bank {
    let cfg = MacroConfig::default();
    let params = DeviceParams::default();
    let sense = SenseConfig::geometric_mean(&params);
    let mut bank = Bank::blank(&cfg, &params, &sense, rng);
    bank.set_mode(BankMode::Write);
    program_bank(&mut bank, weights, signed, &params, &sense, rng).unwrap();
    bank
}

#[test]
fn criterion_01_truth_table_fidelity() {
    let start = Instant::now();
    let params = DeviceParams { variability_fraction: 0.0, ..DeviceParams::default() };
    let sense = SenseConfig::geometric_mean(&params);
    let lrs = ReramCell::nominal(CellState::Lrs, &params);
    let hrs = ReramCell::nominal(CellState::Hrs, &params);

    // All four (activation, state) rows, exhaustively.
    assert!(cim_multiply(true, &lrs, &sense));
    assert!(!cim_multiply(true, &hrs, &sense));
    assert!(!cim_multiply(false, &lrs, &sense));
    assert!(!cim_multiply(false, &hrs, &sense));
    for activation in [false, true] {
        for cell in [&lrs, &hrs] {
            assert_eq!(
                cim_multiply(activation, cell, &sense),
                activation && read_cell(cell, &sense)
            );
        }
    }
    assert!(start.elapsed().as_secs_f64() < 1.0, "must finish inside 1 s");
    println!("[PASS] criterion 01 — AND multiply truth table, exhaustive, zero tolerance");
}

#[test]
fn criterion_02_oracle_dot_product_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0DDB17);
    let tree = column_tree();

    for instance in 0..10_000u32 {
        let n_bits = rng.gen_range(1..=8u32);
        let signed = rng.gen_bool(0.5);
        let wide = rng.gen_bool(0.5);
        let rows = 64usize;
        let acts: Vec<u64> = (0..rows).map(|_| rng.gen_range(0..(1u64 << n_bits))).collect();

        if !wide {
            let weights: Vec<i64> = (0..rows)
                .map(|_| if signed { rng.gen_range(-8..8) } else { rng.gen_range(0..16) })
                .collect();
            let bank = nominal_bank(&weights, signed, &mut rng);
            let out = bit_serial_dot(&bank, &acts, n_bits, &tree, signed, 10, false).unwrap();
            let oracle: i64 = weights.iter().zip(&acts).map(|(&w, &a)| w * a as i64).sum();
            assert_eq!(out.value, oracle, "instance {instance} single-bank");
        } else {
            // 8-bit weights split over two banks, low slice unsigned.
            let weights: Vec<i64> = (0..rows)
                .map(|_| if signed { rng.gen_range(-128..128) } else { rng.gen_range(0..256) })
                .collect();
            let slices: Vec<Vec<i64>> = weights
                .iter()
                .map(|&w| slice_weight(w, 8, signed).unwrap())
                .collect();
            let low: Vec<i64> = slices.iter().map(|s| s[0]).collect();
            let high: Vec<i64> = slices.iter().map(|s| s[1]).collect();
            let low_bank = nominal_bank(&low, false, &mut rng);
            let high_bank = nominal_bank(&high, signed, &mut rng);
            let low_dot = bit_serial_dot(&low_bank, &acts, n_bits, &tree, false, 10, false)
                .unwrap()
                .value;
            let high_dot = bit_serial_dot(&high_bank, &acts, n_bits, &tree, signed, 10, false)
                .unwrap()
                .value;
            let combined = combine_banks(&[low_dot, high_dot], &[0, 4]).unwrap();
            let oracle: i64 = weights.iter().zip(&acts).map(|(&w, &a)| w * a as i64).sum();
            assert_eq!(combined, oracle, "instance {instance} combined");
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "10^4 instances took {elapsed:.1} s, budget 60 s");
    println!(
        "[PASS] criterion 02 — 10^4 randomized dot products bit-exact vs integer oracle ({elapsed:.1} s)"
    );
}

#[test]
fn criterion_03_ten_bit_register_sufficiency() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10B175);
    let tree = column_tree();

    // Boundary fixtures.
    let max_bank = nominal_bank(&[15; 64], false, &mut rng);
    let max = bank_mac_cycle(&max_bank, u64::MAX, &tree, false, 10).unwrap();
    assert_eq!(max.value, 960);
    let min_bank = nominal_bank(&[-8; 64], true, &mut rng);
    let min = bank_mac_cycle(&min_bank, u64::MAX, &tree, true, 10).unwrap();
    assert_eq!(min.value, -512);

    // 10^5 random cycles across 100 random banks; the constructor
    // rejects any value outside the 10-bit register.
    let mut violations = 0u64;
    for _ in 0..100 {
        let signed = rng.gen_bool(0.5);
        let weights: Vec<i64> = (0..64)
            .map(|_| if signed { rng.gen_range(-8..8) } else { rng.gen_range(0..16) })
            .collect();
        let bank = nominal_bank(&weights, signed, &mut rng);
        for _ in 0..1000 {
            let plane: u64 = rng.gen();
            match bank_mac_cycle(&bank, plane, &tree, signed, 10) {
                Ok(sum) => {
                    assert!((-512..=960).contains(&sum.value));
                }
                Err(_) => violations += 1,
            }
        }
    }
    assert_eq!(violations, 0, "per-cycle partial sums exceeded 10 bits");
    println!("[PASS] criterion 03 — 10-bit register bound holds on boundaries + 10^5 random cycles");
}

#[test]
fn criterion_04_cycle_count_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xCC1E);
    let tree = column_tree();
    let weights: Vec<i64> = (0..64).map(|_| rng.gen_range(-8..8)).collect();
    let bank = nominal_bank(&weights, true, &mut rng);
    for n in 1..=8u32 {
        let acts: Vec<u64> = (0..64).map(|_| rng.gen_range(0..(1u64 << n))).collect();
        let out = bit_serial_dot(&bank, &acts, n, &tree, true, 10, false).unwrap();
        assert_eq!(out.executed_cycles, n, "N = {n}");
        assert_eq!(out.skipped_cycles, 0);
        // Zero-skip may elide cycles but never changes the total.
        let skipping = bit_serial_dot(&bank, &acts, n, &tree, true, 10, true).unwrap();
        assert_eq!(skipping.total_cycles(), n);
    }
    println!("[PASS] criterion 04 — bit-serial dot runs exactly N cycles for N = 1..8");
}

#[test]
fn criterion_05_adder_exactness_and_error_metrics() {
    let start = Instant::now();
    let kinds = KindSet::builtin();

    // Exact trees: identically zero metrics under exhaustive enumeration.
    for spec in [TreeSpec::interleaved_10t28t(4, 4), TreeSpec::all_28t(4, 4)] {
        let tree = build_tree(&spec, &kinds).unwrap();
        let report = tree.characterize(SampleMode::Exhaustive).unwrap();
        assert_eq!(report.avg_error, 0.0);
        assert_eq!(report.rmse, 0.0);
        assert_eq!(report.max_error, 0.0);
        assert!(report.exhaustive);
    }

    // Lower-part OR tree vs an independently coded brute force,
    // exact equality on every metric.
    let loa = build_tree(&TreeSpec::loa(2, 4, 2), &kinds).unwrap();
    let mut sum_abs = 0u64;
    let mut sum_sq = 0u64;
    let mut max = 0u64;
    for a in 0..16u64 {
        for b in 0..16u64 {
            let approx = or_low2_add(a, b);
            let diff = approx.abs_diff(a + b);
            sum_abs += diff;
            sum_sq += diff * diff;
            max = max.max(diff);
        }
    }
    let report = loa.characterize(SampleMode::Exhaustive).unwrap();
    assert_eq!(report.samples, 256);
    assert_eq!(report.avg_error, sum_abs as f64 / 256.0);
    assert_eq!(report.rmse, (sum_sq as f64 / 256.0).sqrt());
    assert_eq!(report.max_error, max as f64);

    // Full 20-bit input space stays inside the runtime budget.
    let loa_wide = build_tree(&TreeSpec::loa(4, 5, 2), &kinds).unwrap();
    let wide = loa_wide.characterize(SampleMode::Exhaustive).unwrap();
    assert_eq!(wide.samples, 1 << 20);
    assert!(wide.avg_error > 0.0);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "exhaustive characterization took {elapsed:.1} s, budget 300 s");
    println!(
        "[PASS] criterion 05 — exact trees report zero error; OR-tree metrics equal brute force ({elapsed:.1} s)"
    );
}

/// Brute-force oracle for criterion 05: 5-bit add with the low 2 bits
/// OR-combined and no carry into the upper part.
fn or_low2_add(a: u64, b: u64) -> u64 {
    let low = (a | b) & 0b11;
    let high = ((a >> 2) + (b >> 2)) << 2;
    (high | low) & 0x1F
}

#[test]
fn criterion_06_degradation_rule_structure() {
    let fixtures = common::fixtures_dir();
    let presets = TreePresetFile::load(&fixtures.join("adder_trees.json")).unwrap();
    let library = CellLibraryFile::load(&fixtures.join("adder_cells.json")).unwrap();
    let (kinds, _) = library.build().unwrap();

    for preset in &presets.presets {
        let tree = build_tree(&preset.spec, &kinds).unwrap();
        // Structural scan: no two adjacent degrading cells on any chain.
        for stage in 0..tree.stage_count() {
            for position in 1..tree.result_width() as usize {
                assert!(
                    !(tree.kind_at(stage, position).degrading
                        && tree.kind_at(stage, position - 1).degrading),
                    "preset '{}' stage {stage} position {position}",
                    preset.name
                );
            }
        }
    }

    // The shipped alternating pattern starts 28T then 10T in stage 1.
    let interleaved = presets.get("interleaved").unwrap();
    let tree = build_tree(interleaved, &kinds).unwrap();
    assert_eq!(tree.kind_at(0, 0).name, "exact28t");
    assert_eq!(tree.kind_at(0, 1).name, "exact10t");
    println!("[PASS] criterion 06 — no adjacent degrading cells; alternation starts 28T/10T");
}

#[test]
fn criterion_07_transistor_accounting() {
    let kinds = KindSet::builtin();
    let costs = dcim_core::fabric::CellCosts::transistors_only(&kinds);
    let interleaved = build_tree(&TreeSpec::interleaved_10t28t(64, 4), &kinds).unwrap();
    let all28 = build_tree(&TreeSpec::all_28t(64, 4), &kinds).unwrap();

    let cells = interleaved.cell_count() as u64;
    let cost = interleaved.cost(&costs).unwrap();
    // Exact integer identities: 19 transistors per position on average,
    // and a reduction of exactly 9/28 (32.1%) against all-28T.
    assert_eq!(cost.transistors, 19 * cells, "strict alternation averages exactly 19 T/FA");
    let baseline = all28.cost(&costs).unwrap();
    assert_eq!(baseline.transistors, 28 * cells);
    assert_eq!(
        28 * (baseline.transistors - cost.transistors),
        9 * baseline.transistors,
        "reduction is exactly 9/28 = 32.1%"
    );
    println!(
        "[PASS] criterion 07 — 19 T/FA average, 32.1% reduction vs all-28T \
         (published figure of nearly 37% kept as a calibration note, not asserted)"
    );
}

#[test]
fn criterion_08_mapping_bank_counts() {
    let network = common::load_lenet();
    let weights = common::load_weights(&network, "lenet5_weights_w4.csv");
    let cfg = MacroConfig::default();
    let (plan, _) = map_network(&network, &weights, 0.4, &cfg).unwrap();

    assert_eq!(plan.entry("conv1").unwrap().banks_used, 6, "conv1 banks");
    assert_eq!(plan.entry("conv2").unwrap().banks_used, 32, "conv2 banks");

    // The remaining published rows are emitted with discrepancy flags,
    // never asserted: the comparison must exist and must mark them.
    let reference =
        load_reference_mapping(&common::fixtures_dir().join("lenet5_reference_mapping.json"))
            .unwrap();
    let deltas = plan.compare_reference(&reference);
    let banks_match = |layer: &str| {
        deltas
            .iter()
            .find(|d| d.layer == layer && d.field == "banks_used")
            .unwrap()
            .matches
    };
    assert!(banks_match("conv1"));
    assert!(banks_match("conv2"));
    for layer in ["conv3", "fc1", "fc2"] {
        assert!(
            !banks_match(layer),
            "{layer} is a documented discrepancy, the model must flag it"
        );
    }
    for delta in deltas.iter().filter(|d| d.field == "op_cycles") {
        // Cycle figures are reference metadata; flags only.
        let _ = delta.matches;
    }
    println!("[PASS] criterion 08 — conv1=6 and conv2=32 banks exact; other rows flagged");
}

#[test]
fn criterion_09_end_to_end_inference_oracle() {
    let start = Instant::now();
    let network = common::load_lenet();
    let images = common::load_images(100);
    assert_eq!(images.len(), 100);
    let device = DeviceParams::default();
    let sense = SenseConfig::geometric_mean(&device);
    let tree = column_tree();

    for label in ["1A4W", "2A4W", "4A4W", "8A8W"] {
        let quant = common::load_scheme(label);
        let file = if quant.weight_bits == 8 {
            "lenet5_weights_w8.csv"
        } else {
            "lenet5_weights_w4.csv"
        };
        let weights = common::load_weights(&network, file);
        let cfg = MacroConfig {
            activation_bits: quant.activation_bits,
            weight_bits: quant.weight_bits,
            ..MacroConfig::default()
        };
        let (plan, mask) = map_network(&network, &weights, 0.4, &cfg).unwrap();
        let setup = InferenceSetup {
            network: &network,
            weights: &weights,
            plan: &plan,
            quant: &quant,
            macro_config: cfg,
            device,
            sense,
        };
        let output =
            run_inference(&setup, &tree, &images, InferenceMode::Cnn, &RunOptions::default())
                .unwrap();
        let (expected, expected_logits) =
            common::reference::run(&network, &weights, &mask, &quant, &images);
        assert_eq!(output.predictions, expected, "{label} predictions diverge");
        for (trace, logits) in output.traces.iter().zip(&expected_logits) {
            assert_eq!(&trace.logits, logits, "{label} image {} logits", trace.image);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "end-to-end oracle took {elapsed:.1} s, budget 300 s");
    println!(
        "[PASS] criterion 09 — 100-image predictions bit-identical to the reference \
         interpreter for 1A4W/2A4W/4A4W/8A8W ({elapsed:.1} s)"
    );
}

#[test]
fn criterion_10_snn_cnn_path_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x55EE);
    let tree = column_tree();
    for _ in 0..1000 {
        let weights: Vec<i64> = (0..64).map(|_| rng.gen_range(-8..8)).collect();
        let bank = nominal_bank(&weights, true, &mut rng);
        let spikes: Vec<u64> = (0..64).map(|_| rng.gen_range(0..2u64)).collect();
        let mask: u64 = spikes
            .iter()
            .enumerate()
            .map(|(r, &s)| s << r)
            .fold(0, |a, b| a | b);

        // Spike path: one step, zero leak. The pre-activation charge is
        // the membrane delta observed with an unreachable threshold.
        let mut state = LifNeuronState::new(LifParams {
            threshold: i64::MAX,
            leak: 0,
            reset: ResetMode::Zero,
        });
        snn_step(mask, &bank, &tree, &mut state, true, 10).unwrap();

        // Bit-serial path at N = 1 on the same binary vector.
        let cnn = bit_serial_dot(&bank, &spikes, 1, &tree, true, 10, false).unwrap();
        assert_eq!(state.membrane, cnn.value);
    }
    println!("[PASS] criterion 10 — spike step equals 1-bit serial path on 10^3 random banks");
}

#[test]
fn criterion_11_monte_carlo_robustness() {
    let start = Instant::now();
    let params = DeviceParams::default();
    let sense = SenseConfig::geometric_mean(&params);
    let corners = CornerConfig::default_corners();
    assert_eq!(corners.len(), 5);

    let read = monte_carlo_read(100_000, &params, &sense, &corners, 0xC0FFEE).unwrap();
    assert_eq!(read.read_failures, 0, "default window must never misread");
    assert_eq!(read.trials, 500_000);

    let cfg = MacroConfig::default();
    let fixture = MacFixture::random(0xF00D, 64, 4, true);
    let tree = column_tree();
    let mac =
        monte_carlo_mac(10_000, &fixture, &cfg, &params, &sense, &tree, 0xC0FFEE).unwrap();
    assert_eq!(mac.read_failures, 0, "MAC results must match the oracle");

    // Determinism: identical seeds give identical reports.
    let again = monte_carlo_read(100_000, &params, &sense, &corners, 0xC0FFEE).unwrap();
    assert_eq!(read, again);
    let mac_again =
        monte_carlo_mac(10_000, &fixture, &cfg, &params, &sense, &tree, 0xC0FFEE).unwrap();
    assert_eq!(mac, mac_again);

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "Monte Carlo took {elapsed:.1} s, budget 120 s");
    println!(
        "[PASS] criterion 11 — 10^5 read + 10^4 MAC trials, zero failures, seed-deterministic ({elapsed:.1} s)"
    );
}

#[test]
fn criterion_12_perf_model_preset() {
    let text =
        std::fs::read_to_string(common::fixtures_dir().join("perf_calibration.json")).unwrap();
    let constants: CostConstants = serde_json::from_str(&text).unwrap();
    let workload = constants.workload.unwrap();

    let dense = estimate_workload(workload, &constants, 0.0, 64.0).unwrap();
    let latency_per_cycle_ns = dense.latency_s * 1e9 / dense.effective_cycles;
    assert!((latency_per_cycle_ns - 0.48).abs() / 0.48 < 0.01, "cycle latency within 1%");
    assert!((dense.throughput_tops - 2.31).abs() / 2.31 < 0.01, "throughput within 1%");
    assert!(
        (dense.efficiency_tops_per_w - 314.0).abs() / 314.0 < 0.01,
        "efficiency within 1%"
    );

    // Sparsity credit of 0.30 under the configured cycle-elision rule.
    let sparse = estimate_workload(workload, &constants, 0.30, 64.0).unwrap();
    let uplift = sparse.throughput_tops / dense.throughput_tops;
    assert!((uplift - 1.0 / 0.7).abs() < 1e-9, "documented uplift 1/(1-0.3)");
    // Published sparse figures ride along as reference metadata.
    assert_eq!(sparse.reference.get("throughput_tops_sparse"), Some(&3.1));
    assert_eq!(sparse.reference.get("efficiency_tops_per_w_sparse"), Some(&419.0));
    assert!(!sparse.formulas.is_empty(), "report must carry its formulas");
    println!(
        "[PASS] criterion 12 — preset lands on (0.48 ns, 2.31 TOPS, 314 TOPS/W) within 1%; \
         0.30 credit gives the documented 1.43x uplift"
    );
}

#[test]
fn criterion_13_zero_skip_neutrality() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5C1F);
    let tree = column_tree();
    let mut skipped_total = 0u64;
    for _ in 0..1000 {
        let signed = rng.gen_bool(0.5);
        let n_bits = rng.gen_range(1..=8u32);
        let weights: Vec<i64> = (0..64)
            .map(|_| if signed { rng.gen_range(-8..8) } else { rng.gen_range(0..16) })
            .collect();
        let bank = nominal_bank(&weights, signed, &mut rng);
        // Low-magnitude activations leave upper bit-planes empty.
        let ceiling = 1u64 << rng.gen_range(0..=n_bits.saturating_sub(1));
        let acts: Vec<u64> = (0..64).map(|_| rng.gen_range(0..=ceiling.min((1 << n_bits) - 1))).collect();
        let plain = bit_serial_dot(&bank, &acts, n_bits, &tree, signed, 10, false).unwrap();
        let skipping = bit_serial_dot(&bank, &acts, n_bits, &tree, signed, 10, true).unwrap();
        assert_eq!(plain.value, skipping.value, "skip must never change the value");
        assert_eq!(plain.total_cycles(), skipping.total_cycles());
        skipped_total += skipping.skipped_cycles as u64;
    }
    assert!(skipped_total > 0, "the streams must actually exercise skipping");
    println!(
        "[PASS] criterion 13 — zero-skip changed cycle counts ({skipped_total} skipped) but never a value"
    );
}
