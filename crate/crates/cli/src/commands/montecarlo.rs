//! `dcim montecarlo` — variability sweeps with a scriptable exit gate.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use dcim_core::config::CornerFile;
use dcim_core::fabric::{build_tree, KindSet, TreeSpec};
use dcim_core::io::{atomic_write, write_json, Report, RunManifest};
use dcim_core::variability::{monte_carlo_mac, monte_carlo_read, CornerConfig, MacFixture, McReport};

use crate::CommonArgs;

#[derive(Args)]
pub struct MontecarloArgs {
    /// Read trials per corner.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Full-dot-product trials (defaults to trials / 10).
    #[arg(long)]
    mac_trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corner list JSON; defaults to the five shipped corners.
    #[arg(long)]
    corners: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct McBody {
    read: McReport,
    mac: McReport,
}

pub fn run(args: MontecarloArgs) -> Result<ExitCode> {
    let sim = super::load_sim_config(&args.common.config)?;
    let device = sim.device();
    let sense = sim.sense(&device);
    let cfg = sim.macro_config();

    let corners = match &args.corners {
        Some(path) => {
            CornerFile::load(path)
                .with_context(|| format!("loading corners {}", path.display()))?
                .corners
        }
        None => CornerConfig::default_corners(),
    };

    let read = monte_carlo_read(args.trials, &device, &sense, &corners, args.seed)?;

    let tree = build_tree(
        &TreeSpec::interleaved_10t28t(cfg.rows_per_bank, 1),
        &KindSet::builtin(),
    )?;
    let mac_trials = args.mac_trials.unwrap_or_else(|| (args.trials / 10).max(1));
    let fixture = MacFixture::random(args.seed ^ 0xF1E1D, cfg.rows_per_bank, 4, true);
    let mac = monte_carlo_mac(mac_trials, &fixture, &cfg, &device, &sense, &tree, args.seed)?;

    let out_dir = crate::output_dir(&args.common.out);
    let mut margins = String::from("margin_log10_bin_low,count\n");
    for (edge, count) in read.histogram.rows() {
        margins.push_str(&format!("{edge:.2},{count}\n"));
    }
    atomic_write(&out_dir.join("margins.csv"), margins.as_bytes())?;

    let failed = !read.passed() || !mac.passed();
    let inputs: Vec<String> = args
        .corners
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    let manifest = RunManifest::new("montecarlo", Some(args.seed), &inputs, &out_dir);
    write_json(
        &out_dir.join("montecarlo.json"),
        &Report { manifest, body: McBody { read: read.clone(), mac: mac.clone() } },
    )?;

    println!(
        "read: {} trials, {} failures, min margin {:.4} decades",
        read.trials, read.read_failures, read.min_margin_log10
    );
    println!(
        "mac:  {} trials, {} mismatches, min margin {:.4} decades",
        mac.trials, mac.read_failures, mac.min_margin_log10
    );
    println!("wrote {}", out_dir.join("montecarlo.json").display());
    Ok(if failed { ExitCode::from(3) } else { ExitCode::SUCCESS })
}
