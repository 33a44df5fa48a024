//! `dcim map` — prune and allocate a network onto banks.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use dcim_core::config::load_reference_mapping;
use dcim_core::io::{atomic_write, read_weights_csv, write_json, Report, RunManifest};
use dcim_core::mapper::{map_network, MappingPlan, ReferenceDelta};

use crate::CommonArgs;

#[derive(Args)]
pub struct MapArgs {
    /// Network description JSON.
    #[arg(long)]
    network: PathBuf,
    /// Weight CSV (layer,filter,index,value).
    #[arg(long)]
    weights: PathBuf,
    /// Fraction of weights to prune by magnitude.
    #[arg(long, default_value_t = 0.0)]
    prune: f64,
    /// Published mapping figures to compare against.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct PlanBody {
    plan: MappingPlan,
    reference_comparison: Vec<ReferenceDelta>,
}

pub fn run(args: MapArgs) -> Result<ExitCode> {
    let sim = super::load_sim_config(&args.common.config)?;
    let network = super::load_network(&args.network)?;
    let weights = read_weights_csv(&args.weights, &network)
        .with_context(|| format!("reading weights {}", args.weights.display()))?;
    let cfg = sim.macro_config();
    let (plan, _mask) = map_network(&network, &weights, args.prune, &cfg)?;

    let reference_comparison = match &args.reference {
        Some(path) => {
            let reference = load_reference_mapping(path)
                .with_context(|| format!("loading reference mapping {}", path.display()))?;
            plan.compare_reference(&reference)
        }
        None => Vec::new(),
    };

    let out_dir = crate::output_dir(&args.common.out);
    let mut csv = String::from("Layer,Kernel,Output,Banks Used,Op Cycles\n");
    for entry in &plan.entries {
        let kernel = match &entry.kernel {
            Some(k) => format!("{}x{}x{}x{}", k.h, k.w, k.in_ch, k.out_ch),
            None => "-".into(),
        };
        let output = format!(
            "{}x{}x{}",
            entry.output_shape.0, entry.output_shape.1, entry.output_shape.2
        );
        let banks = if entry.banks_used == 0 && !matches!(entry.kind, dcim_core::mapper::LayerKind::Conv | dcim_core::mapper::LayerKind::Fc) {
            "NA".to_string()
        } else {
            entry.banks_used.to_string()
        };
        let cycles = if entry.op_cycles == 0 && banks == "NA" {
            "-".to_string()
        } else {
            entry.op_cycles.to_string()
        };
        csv.push_str(&format!("{},{},{},{},{}\n", entry.layer, kernel, output, banks, cycles));
    }
    atomic_write(&out_dir.join("mapping.csv"), csv.as_bytes())?;

    let inputs = vec![
        args.network.display().to_string(),
        args.weights.display().to_string(),
    ];
    let manifest = RunManifest::new("map", None, &inputs, &out_dir);
    write_json(
        &out_dir.join("plan.json"),
        &Report { manifest, body: PlanBody { plan: plan.clone(), reference_comparison } },
    )?;

    println!(
        "mapped '{}' at prune={}: {} banks, {} bank-passes, {} cycles, {} of {} weights retained (MAC reduction {:.1}%)",
        plan.network,
        args.prune,
        plan.totals.banks_used,
        plan.totals.bank_passes,
        plan.totals.op_cycles,
        plan.totals.retained_weights,
        plan.totals.total_weights,
        plan.totals.mac_reduction * 100.0,
    );
    println!("wrote {}", out_dir.join("plan.json").display());
    Ok(ExitCode::SUCCESS)
}
