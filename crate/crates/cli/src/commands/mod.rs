pub mod characterize;
pub mod infer;
pub mod map;
pub mod montecarlo;
pub mod report;

use std::path::Path;

use anyhow::{Context, Result};
use dcim_core::config::SimConfig;
use dcim_core::mapper::Network;

/// Loads the simulator configuration, defaulting every section.
pub fn load_sim_config(path: &Option<std::path::PathBuf>) -> Result<SimConfig> {
    match path {
        Some(path) => SimConfig::load(path)
            .with_context(|| format!("loading config {}", path.display())),
        None => Ok(SimConfig::default()),
    }
}

/// Loads and shape-checks a network description.
pub fn load_network(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading network {}", path.display()))?;
    let mut network: Network =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    network.resolve_shapes()?;
    Ok(network)
}
