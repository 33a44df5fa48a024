//! File ingestion and report emission.
//!
//! Weight files are CSV with columns layer,filter,index,value carrying
//! integer quantized weights; a companion JSON file holds the scales.
//! Image fixtures are CSV rows of id,label,p0..pN with real-valued
//! pixels. All report writes go through `atomic_write` (write to a
//! temporary sibling, then rename) so partial runs never leave corrupt
//! files behind.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::{Network, NetworkWeights};

/// Parses a weight CSV against the network's declared dimensions.
/// Missing entries are zero; out-of-range rows name their line number.
pub fn read_weights_csv(path: &Path, network: &Network) -> Result<NetworkWeights> {
    let mut weights = NetworkWeights::default();
    for layer in &network.layers {
        if layer.has_weights() {
            weights.layers.insert(
                layer.name.clone(),
                vec![vec![0i64; layer.weights_per_filter()]; layer.filter_count()],
            );
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse { line: None, message: e.to_string() })?;
    for (row, record) in reader.records().enumerate() {
        // Line 1 is the header.
        let line = row as u64 + 2;
        let record = record.map_err(|e| Error::Parse { line: Some(line), message: e.to_string() })?;
        if record.len() != 4 {
            return Err(Error::Parse {
                line: Some(line),
                message: format!("expected 4 columns, found {}", record.len()),
            });
        }
        let layer_name = record.get(0).unwrap();
        let parse_int = |field: usize, what: &str| -> Result<i64> {
            record
                .get(field)
                .unwrap()
                .parse::<i64>()
                .map_err(|_| Error::Parse {
                    line: Some(line),
                    message: format!("{what} '{}' is not an integer", record.get(field).unwrap()),
                })
        };
        let filter = parse_int(1, "filter")? as usize;
        let index = parse_int(2, "index")? as usize;
        let value = parse_int(3, "value")?;
        let arrays = weights.layers.get_mut(layer_name).ok_or_else(|| Error::Parse {
            line: Some(line),
            message: format!("unknown layer '{layer_name}'"),
        })?;
        if filter >= arrays.len() || index >= arrays[filter].len() {
            return Err(Error::Parse {
                line: Some(line),
                message: format!(
                    "filter {filter} index {index} outside layer '{layer_name}' dimensions"
                ),
            });
        }
        arrays[filter][index] = value;
    }
    Ok(weights)
}

/// Writes weights in the same layer,filter,index,value schema.
pub fn write_weights_csv(path: &Path, weights: &NetworkWeights) -> Result<()> {
    let mut out = String::from("layer,filter,index,value\n");
    for (layer, filters) in &weights.layers {
        for (f, filter) in filters.iter().enumerate() {
            for (i, &w) in filter.iter().enumerate() {
                out.push_str(&format!("{layer},{f},{i},{w}\n"));
            }
        }
    }
    atomic_write(path, out.as_bytes())
}

/// One labeled image: real-valued pixels in input-shape order.
#[derive(Debug, Clone)]
pub struct ImageRecord {
    pub id: u64,
    pub label: Option<i64>,
    pub pixels: Vec<f64>,
}

/// Parses image CSV rows of id,label,p0..pN.
pub fn read_images_csv(path: &Path) -> Result<Vec<ImageRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse { line: None, message: e.to_string() })?;
    let mut images = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| Error::Parse { line: Some(line), message: e.to_string() })?;
        if record.len() < 3 {
            return Err(Error::Parse {
                line: Some(line),
                message: "expected id,label,p0..".into(),
            });
        }
        let id = record
            .get(0)
            .unwrap()
            .parse::<u64>()
            .map_err(|_| Error::Parse { line: Some(line), message: "bad image id".into() })?;
        let label_field = record.get(1).unwrap();
        let label = if label_field.is_empty() {
            None
        } else {
            Some(label_field.parse::<i64>().map_err(|_| Error::Parse {
                line: Some(line),
                message: "bad label".into(),
            })?)
        };
        let pixels = record
            .iter()
            .skip(2)
            .map(|p| {
                p.parse::<f64>().map_err(|_| Error::Parse {
                    line: Some(line),
                    message: format!("pixel '{p}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        images.push(ImageRecord { id, label, pixels });
    }
    Ok(images)
}

/// Writes bytes to a temporary sibling and renames it into place, so
/// readers never observe a partially written report.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("bad output path {}", path.display())))?;
    let mut tmp = dir.join(file_name);
    tmp.set_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes a value as pretty JSON and writes it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Provenance block embedded in every emitted report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub output_dir: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, inputs: &[String], output_dir: &Path) -> Self {
        RunManifest {
            tool: "dcim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.to_string(),
            seed,
            inputs: inputs.to_vec(),
            output_dir: output_dir.display().to_string(),
        }
    }
}

/// A report body paired with its manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub manifest: RunManifest,
    #[serde(flatten)]
    pub body: T,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::{KernelShape, LayerKind, LayerSpec};

    fn tiny_network() -> Network {
        Network {
            name: "tiny".into(),
            input_shape: (1, 1, 3),
            layers: vec![LayerSpec {
                name: "fc".into(),
                kind: LayerKind::Fc,
                kernel: Some(KernelShape { h: 1, w: 1, in_ch: 3, out_ch: 2 }),
                stride: 1,
                output_shape: (1, 1, 2),
            }],
        }
    }

    #[test]
    fn weight_csv_round_trip() {
        let dir = std::env::temp_dir().join("dcim_io_test_w");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("weights.csv");
        let network = tiny_network();
        let mut weights = NetworkWeights::default();
        weights.layers.insert("fc".into(), vec![vec![1, -2, 3], vec![0, 5, -6]]);
        write_weights_csv(&path, &weights).unwrap();
        let parsed = read_weights_csv(&path, &network).unwrap();
        assert_eq!(parsed.layers["fc"], weights.layers["fc"]);
    }

    #[test]
    fn weight_csv_errors_carry_line_numbers() {
        let dir = std::env::temp_dir().join("dcim_io_test_e");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "layer,filter,index,value\nfc,0,0,1\nfc,9,0,1\n").unwrap();
        let err = read_weights_csv(&path, &tiny_network()).unwrap_err();
        match err {
            Error::Parse { line: Some(3), .. } => {}
            other => panic!("expected line-3 parse error, got {other}"),
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join("dcim_io_test_a");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("report.json");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        // No stray temporary left behind.
        let leftovers: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn image_csv_parses_labels_and_pixels() {
        let dir = std::env::temp_dir().join("dcim_io_test_i");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("images.csv");
        std::fs::write(&path, "id,label,p0,p1\n0,3,0.5,1.0\n1,,0.0,0.25\n").unwrap();
        let images = read_images_csv(&path).unwrap();
        assert_eq!(images.len(), 2);
        assert_eq!(images[0].label, Some(3));
        assert_eq!(images[0].pixels, vec![0.5, 1.0]);
        assert_eq!(images[1].label, None);
    }
}
