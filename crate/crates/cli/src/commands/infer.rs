//! `dcim infer` — CNN or spiking inference through the simulated macro.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use dcim_core::cim::SparsityStats;
use dcim_core::fabric::{build_tree, KindSet, TreeSpec};
use dcim_core::io::{atomic_write, read_images_csv, read_weights_csv, write_json, Report, RunManifest};
use dcim_core::mapper::map_network;
use dcim_core::perf::estimate;
use dcim_core::runtime::{
    run_inference, InferenceMode, InferenceSetup, LifParams, QuantConfig, ResetMode, RunOptions,
};

use crate::CommonArgs;

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Image CSV: id,label,p0..pN with real-valued pixels.
    #[arg(long)]
    images: PathBuf,
    /// Quantization scales JSON (per scheme).
    #[arg(long)]
    scales: PathBuf,
    /// Precision scheme label, e.g. 2A4W.
    #[arg(long, default_value = "2A4W")]
    scheme: String,
    /// cnn or snn.
    #[arg(long, default_value = "cnn")]
    mode: String,
    /// Time steps for spiking mode.
    #[arg(long, short = 'T', default_value_t = 4)]
    steps: u32,
    /// Magnitude-pruning ratio applied before mapping.
    #[arg(long, default_value_t = 0.0)]
    prune: f64,
    /// Elide all-zero activation bit-planes.
    #[arg(long)]
    zero_skip: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run only the first N images.
    #[arg(long)]
    limit: Option<usize>,
    /// Spike threshold in accumulator units (spiking mode).
    #[arg(long, default_value_t = 128)]
    threshold: i64,
    /// Membrane leak per step (spiking mode).
    #[arg(long, default_value_t = 0)]
    leak: i64,
    /// Reset behavior: subtract or zero (spiking mode).
    #[arg(long, default_value = "subtract")]
    reset: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Deserialize)]
struct ScalesFile {
    schemes: BTreeMap<String, QuantConfig>,
}

pub fn run(args: InferArgs) -> Result<ExitCode> {
    let sim = super::load_sim_config(&args.common.config)?;
    let network = super::load_network(&args.network)?;
    let weights = read_weights_csv(&args.weights, &network)
        .with_context(|| format!("reading weights {}", args.weights.display()))?;

    let scales_text = std::fs::read_to_string(&args.scales)
        .with_context(|| format!("reading scales {}", args.scales.display()))?;
    let scales: ScalesFile = serde_json::from_str(&scales_text)?;
    let Some(quant) = scales.schemes.get(&args.scheme) else {
        bail!(
            "scheme '{}' not in {} (have: {})",
            args.scheme,
            args.scales.display(),
            scales.schemes.keys().cloned().collect::<Vec<_>>().join(", ")
        );
    };
    quant.validate()?;

    let mode = match args.mode.as_str() {
        "cnn" => InferenceMode::Cnn,
        "snn" => InferenceMode::Snn { steps: args.steps },
        other => bail!("mode '{other}' is neither cnn nor snn"),
    };
    let reset = match args.reset.as_str() {
        "subtract" => ResetMode::Subtract,
        "zero" => ResetMode::Zero,
        other => bail!("reset '{other}' is neither subtract nor zero"),
    };

    let mut records = read_images_csv(&args.images)
        .with_context(|| format!("reading images {}", args.images.display()))?;
    if let Some(limit) = args.limit {
        records.truncate(limit);
    }
    if records.is_empty() {
        bail!("no images to run");
    }

    let device = sim.device();
    let sense = sim.sense(&device);
    let macro_config = dcim_core::cim::MacroConfig {
        activation_bits: quant.activation_bits,
        weight_bits: quant.weight_bits,
        ..sim.macro_config()
    };
    let (plan, _mask) = map_network(&network, &weights, args.prune, &macro_config)?;
    let tree = build_tree(
        &TreeSpec::interleaved_10t28t(macro_config.rows_per_bank, 1),
        &KindSet::builtin(),
    )?;

    let setup = InferenceSetup {
        network: &network,
        weights: &weights,
        plan: &plan,
        quant,
        macro_config,
        device,
        sense,
    };
    let options = RunOptions {
        zero_skip: args.zero_skip,
        seed: args.seed,
        lif: LifParams { threshold: args.threshold, leak: args.leak, reset },
    };
    let pixels: Vec<Vec<f64>> = records.iter().map(|r| r.pixels.clone()).collect();
    let output = run_inference(&setup, &tree, &pixels, mode, &options)?;

    let out_dir = crate::output_dir(&args.common.out);
    let mut predictions = String::from("id,label,prediction\n");
    for (record, &prediction) in records.iter().zip(&output.predictions) {
        let label = record.label.map(|l| l.to_string()).unwrap_or_default();
        predictions.push_str(&format!("{},{},{}\n", record.id, label, prediction));
    }
    atomic_write(&out_dir.join("predictions.csv"), predictions.as_bytes())?;

    let mut trace = String::new();
    for image_trace in &output.traces {
        trace.push_str(&serde_json::to_string(image_trace)?);
        trace.push('\n');
    }
    atomic_write(&out_dir.join("trace.jsonl"), trace.as_bytes())?;

    // Measured sparsity feeds the cost estimate.
    let (executed, skipped) = output
        .traces
        .iter()
        .flat_map(|t| t.layers.iter())
        .fold((0u64, 0u64), |(e, s), l| {
            (e + l.executed_bank_cycles, s + l.skipped_bank_cycles)
        });
    let stats = SparsityStats {
        total_cycles: executed + skipped,
        skipped_cycles: skipped,
        zero_fraction: if executed + skipped == 0 {
            0.0
        } else {
            skipped as f64 / (executed + skipped) as f64
        },
    };
    let cost = estimate(&plan, &sim.cost(), Some(&stats))?;
    let inputs = vec![
        args.network.display().to_string(),
        args.weights.display().to_string(),
        args.images.display().to_string(),
        args.scales.display().to_string(),
    ];
    let manifest = RunManifest::new("infer", Some(args.seed), &inputs, &out_dir);
    write_json(&out_dir.join("cost.json"), &Report { manifest, body: cost })?;

    let correct = records
        .iter()
        .zip(&output.predictions)
        .filter(|(r, &p)| r.label == Some(p as i64))
        .count();
    println!(
        "{} images, scheme {}, mode {}: {} label matches; skipped {} of {} bank cycles",
        records.len(),
        args.scheme,
        args.mode,
        correct,
        stats.skipped_cycles,
        stats.total_cycles,
    );
    println!("wrote {}", out_dir.join("predictions.csv").display());
    Ok(ExitCode::SUCCESS)
}
