//! JSON-loadable parameter bundles and fixture files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cell::{DeviceParams, SenseConfig};
use crate::cim::MacroConfig;
use crate::error::{Error, Result};
use crate::fabric::{AdderCellKind, CellCosts, CellFixture, KindSet, TreeAnchors, TreeSpec};
use crate::mapper::ReferenceMapping;
use crate::perf::CostConstants;
use crate::variability::CornerConfig;

/// Top-level simulator configuration. Every section is optional and
/// defaults to the shipped macro.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "macro")]
    pub macro_config: Option<MacroConfig>,
    pub device: Option<DeviceParams>,
    pub sense: Option<SenseConfig>,
    pub cost: Option<CostConstants>,
}

impl SimConfig {
    /// Parses a config file. Validation is left to the consumer: the
    /// macro rejects an unsensable window at construction, while Monte
    /// Carlo sweeps deliberately accept one to quantify it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: SimConfig = serde_json::from_str(&text)?;
        config.device().validate_ranges()?;
        Ok(config)
    }

    /// Full validation as the macro front end applies it.
    pub fn validate(&self) -> Result<()> {
        let device = self.device();
        device.validate()?;
        self.macro_config().validate()?;
        self.sense(&device).validate(&device)?;
        if let Some(cost) = &self.cost {
            cost.validate()?;
        }
        Ok(())
    }

    pub fn macro_config(&self) -> MacroConfig {
        self.macro_config.unwrap_or_default()
    }

    pub fn device(&self) -> DeviceParams {
        self.device.unwrap_or_default()
    }

    pub fn sense(&self, device: &DeviceParams) -> SenseConfig {
        self.sense
            .unwrap_or_else(|| SenseConfig::geometric_mean(device))
    }

    pub fn cost(&self) -> CostConstants {
        self.cost.clone().unwrap_or_default()
    }
}

/// Fixture file carrying extra cell kinds and per-cell cost constants.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CellLibraryFile {
    pub cells: Vec<CellFixture>,
    /// Whole-tree calibration anchors for the exact 28T/10T presets.
    pub anchors: Option<TreeAnchors>,
    /// Direct per-cell cost overrides applied after anchor derivation.
    pub costs: BTreeMap<String, crate::fabric::CellCost>,
}

impl CellLibraryFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Builds the kind registry (built-ins plus fixtures) and the cost
    /// table (anchor-derived, then overridden per cell).
    pub fn build(&self) -> Result<(KindSet, CellCosts)> {
        let mut kinds = KindSet::builtin();
        for fixture in &self.cells {
            kinds.insert(fixture.clone().into_kind()?);
        }
        let mut costs = match &self.anchors {
            Some(anchors) => CellCosts::from_tree_anchors(anchors, &kinds)?,
            None => CellCosts::transistors_only(&kinds),
        };
        for (name, cost) in &self.costs {
            if kinds.get(name).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "cost constants reference unknown cell '{name}'"
                )));
            }
            costs.cells.insert(name.clone(), *cost);
        }
        Ok((kinds, costs))
    }
}

/// Named tree presets.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TreePresetFile {
    pub presets: Vec<TreePreset>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreePreset {
    pub name: String,
    #[serde(flatten)]
    pub spec: TreeSpec,
}

impl TreePresetFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn get(&self, name: &str) -> Option<&TreeSpec> {
        self.presets.iter().find(|p| p.name == name).map(|p| &p.spec)
    }

    /// The built-in presets: all-28T, the staggered 28T/10T interleave,
    /// and the lower-2-bit OR tree.
    pub fn builtin() -> Self {
        TreePresetFile {
            presets: vec![
                TreePreset { name: "all28t".into(), spec: TreeSpec::all_28t(64, 4) },
                TreePreset {
                    name: "interleaved".into(),
                    spec: TreeSpec::interleaved_10t28t(64, 4),
                },
                TreePreset { name: "loa2".into(), spec: TreeSpec::loa(2, 4, 2) },
            ],
        }
    }
}

/// Corner list fixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CornerFile {
    pub corners: Vec<CornerConfig>,
}

impl CornerFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: CornerFile = serde_json::from_str(&text)?;
        for corner in &file.corners {
            corner.validate()?;
        }
        Ok(file)
    }
}

/// Reference mapping fixture (published per-layer figures).
pub fn load_reference_mapping(path: &Path) -> Result<ReferenceMapping> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Extra adder kinds defined only through fixtures, if any.
pub fn builtin_cell_kinds() -> Vec<AdderCellKind> {
    KindSet::builtin().kinds().to_vec()
}
