//! `dcim characterize` — error metrics and fabric cost per tree preset.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use dcim_core::config::{CellLibraryFile, TreePresetFile};
use dcim_core::fabric::{build_tree, SampleMode, TreeSpec};
use dcim_core::io::{atomic_write, write_json, Report, RunManifest};

use crate::CommonArgs;

#[derive(Args)]
pub struct CharacterizeArgs {
    /// Tree preset file; defaults to the built-in presets.
    #[arg(long)]
    trees: Option<PathBuf>,
    /// Cell library (extra kinds, cost anchors).
    #[arg(long)]
    cells: Option<PathBuf>,
    /// Preset names to characterize; all presets when omitted.
    #[arg(long = "tree")]
    tree: Vec<String>,
    /// Enumerate the whole input space (requires <= 20 input bits).
    #[arg(long)]
    exhaustive: bool,
    /// Random sample count when not exhaustive.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the preset operand count.
    #[arg(long)]
    operands: Option<usize>,
    /// Override the preset operand width in bits.
    #[arg(long)]
    width: Option<u32>,
    /// Published comparison rows appended to the CSV.
    #[arg(long)]
    include_reference: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct TreeRow {
    structure: String,
    avg_error: f64,
    rmse: f64,
    max_error: f64,
    samples: u64,
    exhaustive: bool,
    transistors: u64,
    power_uw: f64,
    delay_ns: f64,
}

#[derive(Serialize)]
struct CharacterizeBody {
    rows: Vec<TreeRow>,
}

#[derive(Deserialize)]
struct ReferenceFile {
    rows: Vec<ReferenceRow>,
}

#[derive(Deserialize)]
struct ReferenceRow {
    structure: String,
    avg_error: f64,
    rmse: f64,
    power_uw: f64,
    delay_ns: f64,
}

pub fn run(args: CharacterizeArgs) -> Result<ExitCode> {
    let presets = match &args.trees {
        Some(path) => TreePresetFile::load(path)
            .with_context(|| format!("loading tree presets {}", path.display()))?,
        None => TreePresetFile::builtin(),
    };
    let library = match &args.cells {
        Some(path) => CellLibraryFile::load(path)
            .with_context(|| format!("loading cell library {}", path.display()))?,
        None => CellLibraryFile::default(),
    };
    let (kinds, costs) = library.build()?;

    let selected: Vec<String> = if args.tree.is_empty() {
        presets.presets.iter().map(|p| p.name.clone()).collect()
    } else {
        args.tree.clone()
    };

    let mut rows = Vec::new();
    for name in &selected {
        let Some(base) = presets.get(name) else {
            bail!("unknown tree preset '{name}'");
        };
        let spec = TreeSpec {
            operand_count: args.operands.unwrap_or(base.operand_count),
            operand_width: args.width.unwrap_or(base.operand_width),
            ..base.clone()
        };
        let tree = build_tree(&spec, &kinds)?;
        let mode = if args.exhaustive {
            SampleMode::Exhaustive
        } else {
            SampleMode::Sampled { samples: args.samples, seed: args.seed }
        };
        let report = tree.characterize(mode)?;
        let cost = tree.cost(&costs)?;
        rows.push(TreeRow {
            structure: name.clone(),
            avg_error: report.avg_error,
            rmse: report.rmse,
            max_error: report.max_error,
            samples: report.samples,
            exhaustive: report.exhaustive,
            transistors: cost.transistors,
            power_uw: cost.power_uw,
            delay_ns: cost.delay_ns,
        });
    }

    let out_dir = crate::output_dir(&args.common.out);
    let mut csv = String::from("Adder Tree Structure,Avg_Error,RMSE,Power(uW),Delay (ns)\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.structure,
            trim_float(row.avg_error),
            trim_float(row.rmse),
            trim_float(row.power_uw),
            trim_float(row.delay_ns)
        ));
    }
    if let Some(path) = &args.include_reference {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading reference rows {}", path.display()))?;
        let reference: ReferenceFile = serde_json::from_str(&text)?;
        for row in &reference.rows {
            csv.push_str(&format!(
                "{} [reference],{},{},{},{}\n",
                row.structure,
                trim_float(row.avg_error),
                trim_float(row.rmse),
                trim_float(row.power_uw),
                trim_float(row.delay_ns)
            ));
        }
    }
    atomic_write(&out_dir.join("characterize.csv"), csv.as_bytes())?;

    let inputs: Vec<String> = [&args.trees, &args.cells, &args.include_reference]
        .iter()
        .filter_map(|p| p.as_ref().map(|p| p.display().to_string()))
        .collect();
    let manifest = RunManifest::new("characterize", Some(args.seed), &inputs, &out_dir);
    write_json(
        &out_dir.join("characterize.json"),
        &Report { manifest, body: CharacterizeBody { rows } },
    )?;
    println!("wrote {}", out_dir.join("characterize.csv").display());
    Ok(ExitCode::SUCCESS)
}

/// Plain decimal formatting without trailing zeros, so exact zeros print
/// as "0" the way comparison tables do.
fn trim_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
