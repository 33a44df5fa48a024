//! Shared test support: the reference integer interpreter and fixture
//! loading. The interpreter is deliberately written as direct nested
//! loops over the network definition, independent of the bank/tree/
//! bit-serial machinery it is used to check.

pub mod reference;

use std::path::PathBuf;

use dcim_core::io::read_weights_csv;
use dcim_core::mapper::{Network, NetworkWeights};
use dcim_core::runtime::QuantConfig;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load_lenet() -> Network {
    let text = std::fs::read_to_string(fixtures_dir().join("lenet5.json")).unwrap();
    let mut network: Network = serde_json::from_str(&text).unwrap();
    network.resolve_shapes().unwrap();
    network
}

pub fn load_weights(network: &Network, file: &str) -> NetworkWeights {
    read_weights_csv(&fixtures_dir().join(file), network).unwrap()
}

pub fn load_scheme(label: &str) -> QuantConfig {
    #[derive(serde::Deserialize)]
    struct ScalesFile {
        schemes: std::collections::BTreeMap<String, QuantConfig>,
    }
    let text = std::fs::read_to_string(fixtures_dir().join("lenet5_scales.json")).unwrap();
    let scales: ScalesFile = serde_json::from_str(&text).unwrap();
    scales.schemes[label].clone()
}

pub fn load_images(limit: usize) -> Vec<Vec<f64>> {
    let records = dcim_core::io::read_images_csv(&fixtures_dir().join("images.csv")).unwrap();
    records.into_iter().take(limit).map(|r| r.pixels).collect()
}
