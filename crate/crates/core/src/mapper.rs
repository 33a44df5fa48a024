//! Layer-to-bank mapping: magnitude pruning, bank allocation, and cycle
//! scheduling.
//!
//! Convolution filters get a uniform per-filter bank budget sized for the
//! largest retained filter, so every filter's banks run in lockstep.
//! Fully connected neurons pack first-fit into banks, sharing a bank when
//! a whole vector fits in the remaining rows; per-dot activation masking
//! keeps each dot single-neuron-coherent. Published mapping figures that
//! this model cannot reproduce are carried as reference metadata and
//! flagged, never asserted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cim::MacroConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Input,
    Conv,
    Fc,
    Pool,
    Flatten,
}

/// Kernel dimensions: height, width, input channels, output channels.
/// Fully connected layers use (1, 1, inputs, outputs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelShape {
    pub h: usize,
    pub w: usize,
    pub in_ch: usize,
    pub out_ch: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    #[serde(default)]
    pub kernel: Option<KernelShape>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// (h, w, c); derived from the input chain under valid padding.
    #[serde(default)]
    pub output_shape: (usize, usize, usize),
}

fn default_stride() -> usize {
    1
}

impl LayerSpec {
    /// Weights in one filter (CONV) or one neuron's input vector (FC).
    pub fn weights_per_filter(&self) -> usize {
        match (self.kind, &self.kernel) {
            (LayerKind::Conv, Some(k)) => k.h * k.w * k.in_ch,
            (LayerKind::Fc, Some(k)) => k.in_ch,
            _ => 0,
        }
    }

    pub fn filter_count(&self) -> usize {
        match (self.kind, &self.kernel) {
            (LayerKind::Conv | LayerKind::Fc, Some(k)) => k.out_ch,
            _ => 0,
        }
    }

    /// Output positions driven through the macro: spatial positions for
    /// CONV, one for FC, none for layers without weights.
    pub fn output_positions(&self) -> usize {
        match self.kind {
            LayerKind::Conv => self.output_shape.0 * self.output_shape.1,
            LayerKind::Fc => 1,
            _ => 0,
        }
    }

    pub fn has_weights(&self) -> bool {
        matches!(self.kind, LayerKind::Conv | LayerKind::Fc)
    }
}

/// A network description: named layers applied in order to an input
/// tensor of shape (h, w, c).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub input_shape: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
}

impl Network {
    /// Derives and checks every layer's output shape under valid padding:
    /// out = (in - k) / stride + 1, which must divide exactly.
    pub fn resolve_shapes(&mut self) -> Result<()> {
        let mut shape = self.input_shape;
        for layer in &mut self.layers {
            let derived = match layer.kind {
                LayerKind::Input => shape,
                LayerKind::Conv => {
                    let k = layer.kernel.ok_or_else(|| {
                        Error::InvalidConfig(format!("layer '{}' missing kernel", layer.name))
                    })?;
                    if k.in_ch != shape.2 {
                        return Err(Error::ShapeMismatch(format!(
                            "layer '{}' expects {} input channels, got {}",
                            layer.name, k.in_ch, shape.2
                        )));
                    }
                    let oh = conv_dim(shape.0, k.h, layer.stride, &layer.name)?;
                    let ow = conv_dim(shape.1, k.w, layer.stride, &layer.name)?;
                    (oh, ow, k.out_ch)
                }
                LayerKind::Pool => {
                    let k = layer.kernel.ok_or_else(|| {
                        Error::InvalidConfig(format!("layer '{}' missing pool window", layer.name))
                    })?;
                    let oh = conv_dim(shape.0, k.h, layer.stride, &layer.name)?;
                    let ow = conv_dim(shape.1, k.w, layer.stride, &layer.name)?;
                    (oh, ow, shape.2)
                }
                LayerKind::Flatten => (1, 1, shape.0 * shape.1 * shape.2),
                LayerKind::Fc => {
                    let k = layer.kernel.ok_or_else(|| {
                        Error::InvalidConfig(format!("layer '{}' missing dimensions", layer.name))
                    })?;
                    let inputs = shape.0 * shape.1 * shape.2;
                    if k.in_ch != inputs {
                        return Err(Error::ShapeMismatch(format!(
                            "layer '{}' expects {} inputs, got {}",
                            layer.name, k.in_ch, inputs
                        )));
                    }
                    (1, 1, k.out_ch)
                }
            };
            if layer.output_shape != (0, 0, 0) && layer.output_shape != derived {
                return Err(Error::ShapeMismatch(format!(
                    "layer '{}' declares output {:?} but arithmetic gives {:?}",
                    layer.name, layer.output_shape, derived
                )));
            }
            layer.output_shape = derived;
            shape = derived;
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }
}

fn conv_dim(input: usize, k: usize, stride: usize, name: &str) -> Result<usize> {
    if stride == 0 || k == 0 || k > input {
        return Err(Error::ShapeMismatch(format!(
            "layer '{name}': window {k} stride {stride} does not fit input {input}"
        )));
    }
    if !(input - k).is_multiple_of(stride) {
        return Err(Error::ShapeMismatch(format!(
            "layer '{name}': ({input} - {k}) not divisible by stride {stride}"
        )));
    }
    Ok((input - k) / stride + 1)
}

/// Per-layer weight arrays indexed [filter][weight index].
pub type LayerWeights = Vec<Vec<i64>>;

/// All trainable weights of a network, keyed by layer name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NetworkWeights {
    pub layers: BTreeMap<String, LayerWeights>,
}

impl NetworkWeights {
    /// Checks that every weighted layer has a dense array of the declared
    /// dimensions.
    pub fn validate_against(&self, network: &Network) -> Result<()> {
        for layer in &network.layers {
            if !layer.has_weights() {
                continue;
            }
            let weights = self.layers.get(&layer.name).ok_or_else(|| {
                Error::InvalidConfig(format!("missing weights for layer '{}'", layer.name))
            })?;
            if weights.len() != layer.filter_count() {
                return Err(Error::ShapeMismatch(format!(
                    "layer '{}': {} filters in weights, {} declared",
                    layer.name,
                    weights.len(),
                    layer.filter_count()
                )));
            }
            let per_filter = layer.weights_per_filter();
            for (f, filter) in weights.iter().enumerate() {
                if filter.len() != per_filter {
                    return Err(Error::ShapeMismatch(format!(
                        "layer '{}' filter {f}: {} weights, {per_filter} expected",
                        layer.name,
                        filter.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Magnitude-pruning mask: true marks a retained weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneMask {
    pub ratio: f64,
    /// Keyed by layer, indexed [filter][weight index].
    pub layers: BTreeMap<String, Vec<Vec<bool>>>,
}

impl PruneMask {
    pub fn retained_in_layer(&self, layer: &str) -> usize {
        self.layers
            .get(layer)
            .map(|filters| {
                filters
                    .iter()
                    .map(|f| f.iter().filter(|&&b| b).count())
                    .sum()
            })
            .unwrap_or(0)
    }

    pub fn retained_per_filter(&self, layer: &str) -> Vec<usize> {
        self.layers
            .get(layer)
            .map(|filters| {
                filters
                    .iter()
                    .map(|f| f.iter().filter(|&&b| b).count())
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Per-layer magnitude pruning: for each weighted layer, keeps the
/// round((1 - ratio) * n) largest-|w| weights; ties keep the earliest
/// (filter, index) position.
pub fn prune(network: &Network, weights: &NetworkWeights, ratio: f64) -> Result<PruneMask> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidConfig(format!("prune ratio {ratio} outside [0, 1)")));
    }
    let mut layers = BTreeMap::new();
    for layer in &network.layers {
        if !layer.has_weights() {
            continue;
        }
        let arrays = weights.layers.get(&layer.name).ok_or_else(|| {
            Error::InvalidConfig(format!("missing weights for layer '{}'", layer.name))
        })?;
        let total: usize = arrays.iter().map(|f| f.len()).sum();
        let retained = ((1.0 - ratio) * total as f64).round() as usize;

        // Flat (|w|, filter, index) ranking; ties resolve to the earliest
        // position.
        let mut ranked: Vec<(u64, usize, usize)> = Vec::with_capacity(total);
        for (f, filter) in arrays.iter().enumerate() {
            for (i, &w) in filter.iter().enumerate() {
                ranked.push((w.unsigned_abs(), f, i));
            }
        }
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut mask: Vec<Vec<bool>> = arrays.iter().map(|f| vec![false; f.len()]).collect();
        for &(_, f, i) in ranked.iter().take(retained) {
            mask[f][i] = true;
        }
        layers.insert(layer.name.clone(), mask);
    }
    Ok(PruneMask { ratio, layers })
}

/// One retained weight's physical placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowAssignment {
    pub filter: usize,
    /// Index into the filter's dense weight vector.
    pub weight_index: usize,
}

/// Rows occupied in one logical bank. Logical banks number 0..banks_used
/// within the layer; physical bank = logical % macro banks, pass =
/// logical / macro banks.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BankAssignment {
    pub bank: usize,
    pub rows: Vec<RowAssignment>,
}

/// Mapping decision for one layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanEntry {
    pub layer: String,
    pub kind: LayerKind,
    pub kernel: Option<KernelShape>,
    pub output_shape: (usize, usize, usize),
    pub banks_used: usize,
    pub banks_per_filter: usize,
    pub passes: usize,
    pub op_cycles: u64,
    pub output_positions: usize,
    pub total_weights: usize,
    pub retained_weights: usize,
    /// Filters with every weight pruned away; they compute nothing.
    pub dead_filters: Vec<usize>,
    pub assignments: Vec<BankAssignment>,
}

impl PlanEntry {
    fn unweighted(layer: &LayerSpec) -> Self {
        PlanEntry {
            layer: layer.name.clone(),
            kind: layer.kind,
            kernel: layer.kernel,
            output_shape: layer.output_shape,
            banks_used: 0,
            banks_per_filter: 0,
            passes: 0,
            op_cycles: 0,
            output_positions: 0,
            total_weights: 0,
            retained_weights: 0,
            dead_filters: Vec::new(),
            assignments: Vec::new(),
        }
    }

    /// Bank slices belonging to one filter, in placement order.
    pub fn filter_slices(&self, filter: usize) -> Vec<FilterSlice> {
        let mut slices = Vec::new();
        for assignment in &self.assignments {
            let mut first_row = None;
            let mut indices = Vec::new();
            for (row, r) in assignment.rows.iter().enumerate() {
                if r.filter == filter {
                    if first_row.is_none() {
                        first_row = Some(row);
                    }
                    indices.push(r.weight_index);
                }
            }
            if let Some(first_row) = first_row {
                slices.push(FilterSlice { bank: assignment.bank, first_row, indices });
            }
        }
        slices
    }
}

/// The rows of one logical bank serving one filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterSlice {
    pub bank: usize,
    pub first_row: usize,
    pub indices: Vec<usize>,
}

/// Allocates one layer's retained weights onto banks.
pub fn allocate(layer: &LayerSpec, mask: &PruneMask, cfg: &MacroConfig) -> Result<PlanEntry> {
    if !layer.has_weights() {
        return Ok(PlanEntry::unweighted(layer));
    }
    let filters = mask.layers.get(&layer.name).ok_or_else(|| {
        Error::InvalidConfig(format!("no prune mask for layer '{}'", layer.name))
    })?;
    let rows = cfg.rows_per_bank;
    let retained_per_filter: Vec<Vec<usize>> = filters
        .iter()
        .map(|f| {
            f.iter()
                .enumerate()
                .filter_map(|(i, &keep)| keep.then_some(i))
                .collect()
        })
        .collect();
    let dead_filters: Vec<usize> = retained_per_filter
        .iter()
        .enumerate()
        .filter_map(|(f, idx)| idx.is_empty().then_some(f))
        .collect();
    let total_weights: usize = filters.iter().map(|f| f.len()).sum();
    let retained_weights: usize = retained_per_filter.iter().map(|v| v.len()).sum();

    let mut entry = PlanEntry {
        layer: layer.name.clone(),
        kind: layer.kind,
        kernel: layer.kernel,
        output_shape: layer.output_shape,
        banks_used: 0,
        banks_per_filter: 0,
        passes: 0,
        op_cycles: 0,
        output_positions: layer.output_positions(),
        total_weights,
        retained_weights,
        dead_filters,
        assignments: Vec::new(),
    };

    match layer.kind {
        LayerKind::Conv => {
            // Uniform budget sized for the largest filter; all filters'
            // banks advance in lockstep. Filters never share a bank.
            let max_retained = retained_per_filter.iter().map(|v| v.len()).max().unwrap_or(0);
            let banks_per_filter = max_retained.div_ceil(rows);
            entry.banks_per_filter = banks_per_filter;
            let mut bank_id = 0usize;
            for (f, indices) in retained_per_filter.iter().enumerate() {
                if indices.is_empty() {
                    continue;
                }
                for chunk in indices.chunks(rows) {
                    entry.assignments.push(BankAssignment {
                        bank: bank_id,
                        rows: chunk
                            .iter()
                            .map(|&weight_index| RowAssignment { filter: f, weight_index })
                            .collect(),
                    });
                    bank_id += 1;
                }
                // Keep the lockstep budget even when this filter fits in
                // fewer banks.
                let used = indices.len().div_ceil(rows);
                for _ in used..banks_per_filter {
                    entry.assignments.push(BankAssignment { bank: bank_id, rows: Vec::new() });
                    bank_id += 1;
                }
            }
            entry.banks_used = bank_id;
        }
        LayerKind::Fc => {
            // First-fit contiguous packing: a neuron shares the current
            // bank when its whole remainder fits the free rows.
            let mut bank_id = 0usize;
            let mut current: Option<BankAssignment> = None;
            let mut free = 0usize;
            let mut max_neuron = 0usize;
            for (f, indices) in retained_per_filter.iter().enumerate() {
                if indices.is_empty() {
                    continue;
                }
                max_neuron = max_neuron.max(indices.len());
                let mut remaining = &indices[..];
                // Full banks first for vectors longer than a bank.
                while remaining.len() > rows {
                    if let Some(assignment) = current.take() {
                        entry.assignments.push(assignment);
                        bank_id += 1;
                        free = 0;
                    }
                    let (head, tail) = remaining.split_at(rows);
                    entry.assignments.push(BankAssignment {
                        bank: bank_id,
                        rows: head
                            .iter()
                            .map(|&weight_index| RowAssignment { filter: f, weight_index })
                            .collect(),
                    });
                    bank_id += 1;
                    remaining = tail;
                }
                if remaining.is_empty() {
                    continue;
                }
                if remaining.len() > free {
                    if let Some(assignment) = current.take() {
                        entry.assignments.push(assignment);
                        bank_id += 1;
                    }
                    current = Some(BankAssignment { bank: bank_id, rows: Vec::new() });
                    free = rows;
                }
                let assignment = current.as_mut().unwrap();
                for &weight_index in remaining {
                    assignment.rows.push(RowAssignment { filter: f, weight_index });
                }
                free -= remaining.len();
            }
            if let Some(assignment) = current.take() {
                entry.assignments.push(assignment);
                bank_id += 1;
            }
            entry.banks_used = bank_id;
            entry.banks_per_filter = max_neuron.div_ceil(rows);
        }
        _ => unreachable!(),
    }
    Ok(entry)
}

/// Fills in pass and cycle counts:
/// op_cycles = activation_bits * output_positions * passes,
/// passes = ceil(banks_used / macro banks).
pub fn schedule(entry: &mut PlanEntry, cfg: &MacroConfig, output_positions: usize) {
    entry.output_positions = output_positions;
    entry.passes = entry.banks_used.div_ceil(cfg.banks);
    entry.op_cycles =
        cfg.activation_bits as u64 * output_positions as u64 * entry.passes as u64;
}

/// Whole-network totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PlanTotals {
    pub banks_used: usize,
    pub bank_passes: usize,
    pub op_cycles: u64,
    pub total_weights: usize,
    pub retained_weights: usize,
    /// MACs executed per inference over all output positions.
    pub retained_macs: u64,
    pub total_macs: u64,
    /// 1 - retained/total MACs.
    pub mac_reduction: f64,
}

/// A complete mapping of a pruned network onto the macro.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MappingPlan {
    pub network: String,
    pub prune_ratio: f64,
    pub activation_bits: u32,
    pub weight_bits: u32,
    pub entries: Vec<PlanEntry>,
    pub totals: PlanTotals,
}

impl MappingPlan {
    pub fn entry(&self, layer: &str) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.layer == layer)
    }

    pub fn compare_reference(&self, reference: &ReferenceMapping) -> Vec<ReferenceDelta> {
        let mut deltas = Vec::new();
        for row in &reference.rows {
            let Some(entry) = self.entry(&row.layer) else { continue };
            if let Some(banks) = row.banks_used {
                deltas.push(ReferenceDelta {
                    layer: row.layer.clone(),
                    field: "banks_used".into(),
                    computed: entry.banks_used as u64,
                    reference: banks as u64,
                    matches: entry.banks_used == banks,
                });
            }
            if let Some(cycles) = row.op_cycles {
                deltas.push(ReferenceDelta {
                    layer: row.layer.clone(),
                    field: "op_cycles".into(),
                    computed: entry.op_cycles,
                    reference: cycles,
                    matches: entry.op_cycles == cycles,
                });
            }
        }
        deltas
    }
}

/// prune -> allocate -> schedule across all layers, plus totals.
pub fn map_network(
    network: &Network,
    weights: &NetworkWeights,
    ratio: f64,
    cfg: &MacroConfig,
) -> Result<(MappingPlan, PruneMask)> {
    cfg.validate()?;
    weights.validate_against(network)?;
    let mask = prune(network, weights, ratio)?;
    let mut entries = Vec::with_capacity(network.layers.len());
    let mut totals = PlanTotals::default();
    for layer in &network.layers {
        let mut entry = allocate(layer, &mask, cfg)?;
        schedule(&mut entry, cfg, layer.output_positions());
        totals.banks_used += entry.banks_used;
        totals.bank_passes += entry.passes;
        totals.op_cycles += entry.op_cycles;
        totals.total_weights += entry.total_weights;
        totals.retained_weights += entry.retained_weights;
        // A CONV filter fires once per spatial position; an FC neuron once.
        let multiplier = if entry.kind == LayerKind::Conv {
            entry.output_positions as u64
        } else {
            1
        };
        totals.retained_macs += entry.retained_weights as u64 * multiplier;
        totals.total_macs += entry.total_weights as u64 * multiplier;
        entries.push(entry);
    }
    totals.mac_reduction = if totals.total_macs == 0 {
        0.0
    } else {
        1.0 - totals.retained_macs as f64 / totals.total_macs as f64
    };
    let plan = MappingPlan {
        network: network.name.clone(),
        prune_ratio: ratio,
        activation_bits: cfg.activation_bits,
        weight_bits: cfg.weight_bits,
        entries,
        totals,
    };
    Ok((plan, mask))
}

/// Published per-layer mapping figures carried for comparison only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceMapping {
    pub description: String,
    pub rows: Vec<ReferenceRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub layer: String,
    #[serde(default)]
    pub banks_used: Option<usize>,
    #[serde(default)]
    pub op_cycles: Option<u64>,
}

/// Where the computed plan differs from the reference figures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceDelta {
    pub layer: String,
    pub field: String,
    pub computed: u64,
    pub reference: u64,
    pub matches: bool,
}
