//! `dcim report` — analytical cost estimate from a plan or a preset
//! workload.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use dcim_core::io::{write_json, Report, RunManifest};
use dcim_core::mapper::MappingPlan;
use dcim_core::perf::{estimate, estimate_workload, peripheral_breakdown, CostConstants, CostReport};
use serde::Serialize;

use crate::CommonArgs;

#[derive(Args)]
pub struct ReportArgs {
    /// Cost constants / calibration preset JSON.
    #[arg(long)]
    constants: PathBuf,
    /// Plan JSON produced by `dcim map`; without it the constants'
    /// embedded workload is used.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Sparsity credit in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    sparsity: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Deserialize)]
struct PlanFile {
    plan: MappingPlan,
}

#[derive(Serialize)]
struct ReportBody {
    #[serde(flatten)]
    cost: CostReport,
    peripheral_breakdown_uw: Vec<(String, f64)>,
}

pub fn run(args: ReportArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.constants)
        .with_context(|| format!("reading constants {}", args.constants.display()))?;
    let constants: CostConstants = serde_json::from_str(&text)?;
    constants.validate()?;

    let report = match &args.plan {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading plan {}", path.display()))?;
            let file: PlanFile = serde_json::from_str(&text)?;
            let stats = dcim_core::cim::SparsityStats {
                total_cycles: file.plan.totals.op_cycles,
                skipped_cycles: 0,
                zero_fraction: args.sparsity,
            };
            estimate(&file.plan, &constants, Some(&stats))?
        }
        None => {
            let Some(workload) = constants.workload else {
                bail!("constants carry no workload; pass --plan");
            };
            estimate_workload(workload, &constants, args.sparsity, 64.0)?
        }
    };

    println!("cycles          {:>16}", report.total_cycles);
    println!("effective       {:>16.1}", report.effective_cycles);
    println!("sparsity credit {:>16.3}", report.sparsity_credit);
    println!("latency         {:>16.6} us", report.latency_s * 1e6);
    println!("macs            {:>16}", report.macs);
    println!("throughput      {:>16.4} TOPS", report.throughput_tops);
    println!("power           {:>16.6} mW", report.power_w * 1e3);
    println!("efficiency      {:>16.2} TOPS/W", report.efficiency_tops_per_w);
    let breakdown = if constants.peripheral_shares.is_empty() {
        Vec::new()
    } else {
        peripheral_breakdown(report.peripheral_power_uw, &constants.peripheral_shares)?
    };
    if !breakdown.is_empty() {
        println!("peripheral breakdown ({:.3} uW):", report.peripheral_power_uw);
        for (component, uw) in &breakdown {
            println!("  {component:<12} {uw:>12.3} uW");
        }
    }
    if !report.reference.is_empty() {
        println!("reference figures (calibration targets, not predictions):");
        for (key, value) in &report.reference {
            println!("  {key:<28} {value}");
        }
    }

    let out_dir = crate::output_dir(&args.common.out);
    let mut inputs = vec![args.constants.display().to_string()];
    if let Some(plan) = &args.plan {
        inputs.push(plan.display().to_string());
    }
    let manifest = RunManifest::new("report", None, &inputs, &out_dir);
    write_json(
        &out_dir.join("cost.json"),
        &Report { manifest, body: ReportBody { cost: report, peripheral_breakdown_uw: breakdown } },
    )?;
    println!("wrote {}", out_dir.join("cost.json").display());
    Ok(ExitCode::SUCCESS)
}
