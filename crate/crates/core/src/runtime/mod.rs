//! Quantized CNN and spike-driven inference through the simulated macro.
//!
//! Layers execute one at a time, reprogramming banks between passes the
//! way the hardware does. Within a weighted layer the engine walks
//! pass -> image -> output position -> bank, computing every dot product
//! bit-serially through the bank model, so the emitted numbers are the
//! macro's numbers, not a shortcut around it.

pub mod ops;
pub mod quant;
pub mod snn;

pub use ops::{argmax, batchnorm_fold, maxpool, relu, softmax, softmax_argmax, BatchNormParams};
pub use quant::{dequantize, quantize, requantize, QuantConfig, Rational, Tensor};
pub use snn::{snn_step, LifNeuronState, LifParams, RateEncoder, ResetMode};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{DeviceParams, SenseConfig};
use crate::cim::{combine_banks, slice_weight, CimMacro, MacroConfig};
use crate::error::{Error, Result};
use crate::fabric::TreeInstance;
use crate::mapper::{BankAssignment, LayerKind, LayerSpec, MappingPlan, Network, NetworkWeights, PlanEntry};

/// Execution mode of the front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InferenceMode {
    Cnn,
    Snn { steps: u32 },
}

/// Engine knobs independent of the network.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Elide all-zero activation bit-planes.
    pub zero_skip: bool,
    /// Seed for resistance sampling while programming.
    pub seed: u64,
    /// Neuron parameters for spike-driven layers.
    pub lif: LifParams,
}

/// Everything needed to drive one network through the macro.
pub struct InferenceSetup<'a> {
    pub network: &'a Network,
    pub weights: &'a NetworkWeights,
    pub plan: &'a MappingPlan,
    pub quant: &'a QuantConfig,
    pub macro_config: MacroConfig,
    pub device: DeviceParams,
    pub sense: SenseConfig,
}

/// Per-layer cycle accounting for one image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerTrace {
    pub layer: String,
    pub executed_bank_cycles: u64,
    pub skipped_bank_cycles: u64,
    pub macs: u64,
}

/// Full trace of one image's inference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageTrace {
    pub image: usize,
    pub prediction: usize,
    pub logits: Vec<i64>,
    /// Real-valued softmax of the logits; trace output only.
    pub softmax: Vec<f64>,
    pub layers: Vec<LayerTrace>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceOutput {
    pub predictions: Vec<usize>,
    pub traces: Vec<ImageTrace>,
}

/// Runs the batch through the macro and classifies each image.
pub fn run_inference(
    setup: &InferenceSetup,
    tree: &TreeInstance,
    images: &[Vec<f64>],
    mode: InferenceMode,
    options: &RunOptions,
) -> Result<InferenceOutput> {
    setup.quant.validate()?;
    setup.macro_config.validate()?;
    let mut engine = Engine::new(setup, tree, options, images.len())?;
    let inputs = engine.quantize_inputs(images)?;
    let logits = match mode {
        InferenceMode::Cnn => engine.run_cnn(inputs)?,
        InferenceMode::Snn { steps } => {
            if steps == 0 {
                return Err(Error::InvalidConfig("spike runs need at least one step".into()));
            }
            engine.run_snn(inputs, steps)?
        }
    };
    Ok(engine.finish(logits))
}

/// Rows of one logical bank serving a single filter, contiguous from
/// `first_row`.
struct BankGroup {
    filter: usize,
    first_row: usize,
    indices: Vec<usize>,
}

fn bank_groups(assignment: &BankAssignment) -> Vec<BankGroup> {
    let mut groups: Vec<BankGroup> = Vec::new();
    for (row, r) in assignment.rows.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if g.filter == r.filter => g.indices.push(r.weight_index),
            _ => groups.push(BankGroup {
                filter: r.filter,
                first_row: row,
                indices: vec![r.weight_index],
            }),
        }
    }
    groups
}

struct Engine<'a> {
    setup: &'a InferenceSetup<'a>,
    tree: &'a TreeInstance,
    options: &'a RunOptions,
    cim: CimMacro,
    rng: ChaCha8Rng,
    /// (executed, skipped) bank cycles per image per network layer.
    stats: Vec<Vec<(u64, u64)>>,
    /// Extra MAC multiplier per layer (time steps in spike mode).
    mac_steps: u64,
}

impl<'a> Engine<'a> {
    fn new(
        setup: &'a InferenceSetup<'a>,
        tree: &'a TreeInstance,
        options: &'a RunOptions,
        batch: usize,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let cim = CimMacro::new(setup.macro_config, setup.device, setup.sense, &mut rng)?;
        let layers = setup.network.layers.len();
        Ok(Engine {
            setup,
            tree,
            options,
            cim,
            rng,
            stats: vec![vec![(0, 0); layers]; batch],
            mac_steps: 1,
        })
    }

    fn quantize_inputs(&self, images: &[Vec<f64>]) -> Result<Vec<Tensor>> {
        let shape = self.setup.network.input_shape;
        let expect = shape.0 * shape.1 * shape.2;
        let max = self.setup.quant.activation_max();
        images
            .iter()
            .map(|pixels| {
                if pixels.len() != expect {
                    return Err(Error::ShapeMismatch(format!(
                        "image has {} values, input shape {:?} needs {expect}",
                        pixels.len(),
                        shape
                    )));
                }
                let data = quantize(pixels, self.setup.quant.input_scale, 0, max);
                Tensor::from_data(shape, data)
            })
            .collect()
    }

    fn layer_scale(&self, layer: &str) -> Result<Rational> {
        self.setup
            .quant
            .layer_scales
            .get(layer)
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("no requantize scale for layer '{layer}'")))
    }

    fn final_weighted_index(&self) -> Option<usize> {
        self.setup
            .network
            .layers
            .iter()
            .rposition(|l| l.has_weights())
    }

    fn plan_entry(&self, layer: &LayerSpec) -> Result<&'a PlanEntry> {
        self.setup.plan.entry(&layer.name).ok_or_else(|| {
            Error::InvalidConfig(format!("plan has no entry for layer '{}'", layer.name))
        })
    }

    fn run_cnn(&mut self, mut acts: Vec<Tensor>) -> Result<Vec<Vec<i64>>> {
        let final_idx = self.final_weighted_index();
        let layers = self.setup.network.layers.clone();
        for (idx, layer) in layers.iter().enumerate() {
            match layer.kind {
                LayerKind::Input => {}
                LayerKind::Pool => {
                    let k = layer.kernel.unwrap();
                    for t in acts.iter_mut() {
                        *t = maxpool(t, k.h, layer.stride)?;
                    }
                }
                LayerKind::Flatten => {
                    for t in acts.iter_mut() {
                        *t = t.flatten();
                    }
                }
                LayerKind::Conv | LayerKind::Fc => {
                    let entry = self.plan_entry(layer)?;
                    let raw = self.forward_weighted(idx, layer, entry, &acts)?;
                    if Some(idx) == final_idx {
                        acts = raw;
                    } else {
                        let scale = self.layer_scale(&layer.name)?;
                        let max = self.setup.quant.activation_max();
                        acts = raw
                            .into_iter()
                            .map(|t| Tensor {
                                shape: t.shape,
                                data: t
                                    .data
                                    .iter()
                                    .map(|&v| requantize(v.max(0), scale, max))
                                    .collect(),
                            })
                            .collect();
                    }
                }
            }
        }
        Ok(acts.into_iter().map(|t| t.data).collect())
    }

    fn run_snn(&mut self, inputs: Vec<Tensor>, steps: u32) -> Result<Vec<Vec<i64>>> {
        self.mac_steps = steps as u64;
        let final_idx = self.final_weighted_index();
        let layers = self.setup.network.layers.clone();
        let batch = inputs.len();

        // Encode inputs into per-step binary spike tensors.
        let shape = self.setup.network.input_shape;
        let mut trains: Vec<Vec<Tensor>> = Vec::with_capacity(batch);
        for input in &inputs {
            let mut encoder = RateEncoder::new(input.len(), self.setup.quant.activation_bits);
            let mut train = Vec::with_capacity(steps as usize);
            for _ in 0..steps {
                let spikes = encoder.step(&input.data);
                train.push(Tensor {
                    shape,
                    data: spikes.into_iter().map(i64::from).collect(),
                });
            }
            trains.push(train);
        }

        let mut logits: Vec<Vec<i64>> = Vec::new();
        for (idx, layer) in layers.iter().enumerate() {
            match layer.kind {
                LayerKind::Input => {}
                LayerKind::Pool => {
                    // OR pooling: window max over binary spikes.
                    let k = layer.kernel.unwrap();
                    for train in trains.iter_mut() {
                        for t in train.iter_mut() {
                            *t = maxpool(t, k.h, layer.stride)?;
                        }
                    }
                }
                LayerKind::Flatten => {
                    for train in trains.iter_mut() {
                        for t in train.iter_mut() {
                            *t = t.flatten();
                        }
                    }
                }
                LayerKind::Conv | LayerKind::Fc => {
                    let entry = self.plan_entry(layer)?;
                    let preacts = self.forward_weighted_train(idx, layer, entry, &trains)?;
                    if Some(idx) == final_idx {
                        // Output readout integrates without firing.
                        logits = preacts
                            .into_iter()
                            .map(|per_step| {
                                let mut sum = vec![0i64; per_step[0].len()];
                                for t in &per_step {
                                    for (acc, &v) in sum.iter_mut().zip(&t.data) {
                                        *acc += v;
                                    }
                                }
                                sum
                            })
                            .collect();
                    } else {
                        // Hidden layer: integrate-and-fire per output element.
                        let out_shape = layer.output_shape;
                        for (img, per_step) in preacts.into_iter().enumerate() {
                            let mut states =
                                vec![LifNeuronState::new(self.options.lif); per_step[0].len()];
                            let mut spikes_out = Vec::with_capacity(per_step.len());
                            for t in per_step {
                                let plane: Vec<i64> = t
                                    .data
                                    .iter()
                                    .zip(states.iter_mut())
                                    .map(|(&charge, state)| i64::from(state.integrate(charge)))
                                    .collect();
                                spikes_out.push(Tensor { shape: out_shape, data: plane });
                            }
                            trains[img] = spikes_out;
                        }
                    }
                }
            }
        }
        if logits.is_empty() {
            // No weighted layers: count spikes of the final train.
            logits = trains
                .into_iter()
                .map(|train| {
                    let mut sum = vec![0i64; train[0].len()];
                    for t in &train {
                        for (acc, &v) in sum.iter_mut().zip(&t.data) {
                            *acc += v;
                        }
                    }
                    sum
                })
                .collect();
        }
        Ok(logits)
    }

    /// One weighted layer over the whole batch (one value tensor per image).
    fn forward_weighted(
        &mut self,
        layer_idx: usize,
        layer: &LayerSpec,
        entry: &PlanEntry,
        inputs: &[Tensor],
    ) -> Result<Vec<Tensor>> {
        let frames: Vec<&[Tensor]> = inputs.iter().map(std::slice::from_ref).collect();
        let mut out = self.forward_passes(
            layer_idx,
            layer,
            entry,
            &frames,
            self.setup.quant.activation_bits,
        )?;
        Ok(out.drain(..).map(|mut per_step| per_step.remove(0)).collect())
    }

    /// One weighted layer over per-step spike trains (n_bits = 1).
    fn forward_weighted_train(
        &mut self,
        layer_idx: usize,
        layer: &LayerSpec,
        entry: &PlanEntry,
        trains: &[Vec<Tensor>],
    ) -> Result<Vec<Vec<Tensor>>> {
        let frames: Vec<&[Tensor]> = trains.iter().map(|t| t.as_slice()).collect();
        self.forward_passes(layer_idx, layer, entry, &frames, 1)
    }

    /// Shared pass loop: programs each pass's banks once, then computes
    /// every (image, frame, position, bank-group) dot product through the
    /// macro. Frames are time steps in spike mode, a single frame in CNN
    /// mode. Returns raw accumulator tensors per image per frame.
    fn forward_passes(
        &mut self,
        layer_idx: usize,
        layer: &LayerSpec,
        entry: &PlanEntry,
        frames: &[&[Tensor]],
        n_bits: u32,
    ) -> Result<Vec<Vec<Tensor>>> {
        let cfg = &self.setup.macro_config;
        let quant = self.setup.quant;
        let slices = (quant.weight_bits / 4) as usize;
        let capacity = cfg.banks / slices;
        if capacity == 0 {
            return Err(Error::InvalidConfig(format!(
                "{}-bit weights need {slices} banks per word; macro has {}",
                quant.weight_bits, cfg.banks
            )));
        }
        let offsets: Vec<u32> = (0..slices as u32).map(|s| 4 * s).collect();
        let lweights = self.setup.weights.layers.get(&layer.name).ok_or_else(|| {
            Error::InvalidConfig(format!("missing weights for layer '{}'", layer.name))
        })?;
        let (wmin, wmax) = quant.weight_range();

        let out_shape = layer.output_shape;
        let spatial = match layer.kind {
            LayerKind::Conv => (out_shape.0, out_shape.1),
            _ => (1, 1),
        };
        let mut accs: Vec<Vec<Tensor>> = frames
            .iter()
            .map(|per_frame| per_frame.iter().map(|_| Tensor::zeros(out_shape)).collect())
            .collect();

        let groups: Vec<Vec<BankGroup>> = entry.assignments.iter().map(bank_groups).collect();
        let passes = entry.banks_used.div_ceil(capacity);
        let mut partials = vec![0i64; slices];

        for pass in 0..passes {
            let lo = pass * capacity;
            let hi = (lo + capacity).min(entry.banks_used);

            // Program this pass's logical banks, one physical bank per
            // 4-bit weight slice.
            for logical in lo..hi {
                let assignment = &entry.assignments[logical];
                debug_assert_eq!(assignment.bank, logical, "assignments indexed by bank id");
                for s in 0..slices {
                    let values: Vec<i64> = assignment
                        .rows
                        .iter()
                        .map(|r| {
                            let w = lweights[r.filter][r.weight_index];
                            if w < wmin || w > wmax {
                                return Err(Error::WeightOutOfRange {
                                    weight: w,
                                    bits: quant.weight_bits,
                                    signed: true,
                                });
                            }
                            Ok(slice_weight(w, quant.weight_bits, true)?[s])
                        })
                        .collect::<Result<_>>()?;
                    let phys = (logical - lo) * slices + s;
                    let slice_signed = s + 1 == slices;
                    self.cim.program(phys, &values, slice_signed, &mut self.rng)?;
                }
            }

            // Compute every dot assigned to this pass.
            for (img, per_frame) in frames.iter().enumerate() {
                for (frame, input) in per_frame.iter().enumerate() {
                    for oy in 0..spatial.0 {
                        for ox in 0..spatial.1 {
                            for (slot, bank_groups) in groups[lo..hi].iter().enumerate() {
                                for group in bank_groups {
                                    let mut acts = vec![0u64; cfg.rows_per_bank];
                                    for (j, &widx) in group.indices.iter().enumerate() {
                                        acts[group.first_row + j] =
                                            receptive_value(input, layer, oy, ox, widx) as u64;
                                    }
                                    let mut executed = 0u64;
                                    let mut skipped = 0u64;
                                    for (s, partial) in partials.iter_mut().enumerate() {
                                        let phys = slot * slices + s;
                                        let slice_signed = s + 1 == slices;
                                        let dot = self.cim.dot(
                                            phys,
                                            &acts,
                                            n_bits,
                                            self.tree,
                                            slice_signed,
                                            self.options.zero_skip,
                                        )?;
                                        *partial = dot.value;
                                        executed += dot.executed_cycles as u64;
                                        skipped += dot.skipped_cycles as u64;
                                    }
                                    let value = combine_banks(&partials, &offsets)?;
                                    *accs[img][frame].at_mut(oy, ox, group.filter) += value;
                                    let stat = &mut self.stats[img][layer_idx];
                                    stat.0 += executed;
                                    stat.1 += skipped;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(accs)
    }

    fn finish(self, logits: Vec<Vec<i64>>) -> InferenceOutput {
        let network = self.setup.network;
        let mut predictions = Vec::with_capacity(logits.len());
        let mut traces = Vec::with_capacity(logits.len());
        for (img, image_logits) in logits.iter().enumerate() {
            let prediction = argmax(image_logits);
            predictions.push(prediction);
            let layers = network
                .layers
                .iter()
                .enumerate()
                .map(|(idx, layer)| {
                    let (executed, skipped) = self.stats[img][idx];
                    let macs = self
                        .setup
                        .plan
                        .entry(&layer.name)
                        .map(|e| {
                            let positions = if e.kind == LayerKind::Conv {
                                e.output_positions as u64
                            } else {
                                1
                            };
                            e.retained_weights as u64 * positions * self.mac_steps
                        })
                        .unwrap_or(0);
                    LayerTrace {
                        layer: layer.name.clone(),
                        executed_bank_cycles: executed,
                        skipped_bank_cycles: skipped,
                        macs,
                    }
                })
                .collect();
            traces.push(ImageTrace {
                image: img,
                prediction,
                logits: image_logits.clone(),
                softmax: softmax(image_logits),
                layers,
            });
        }
        InferenceOutput { predictions, traces }
    }
}

/// One weighted layer through the macro, standalone: im2col-style
/// lowering of each output position's receptive field into bit-serial
/// dot products against the layer's banks, multi-bank partials combined
/// additively. Returns raw accumulators, which for exact trees equal the
/// integer convolution.
#[allow(clippy::too_many_arguments)]
pub fn conv_forward(
    input: &Tensor,
    layer: &LayerSpec,
    entry: &PlanEntry,
    weights: &NetworkWeights,
    quant: &QuantConfig,
    macro_config: MacroConfig,
    device: DeviceParams,
    sense: SenseConfig,
    tree: &TreeInstance,
    options: &RunOptions,
) -> Result<Tensor> {
    if !layer.has_weights() {
        return Err(Error::InvalidConfig(format!(
            "layer '{}' has no weights to convolve",
            layer.name
        )));
    }
    let network = Network {
        name: layer.name.clone(),
        input_shape: input.shape,
        layers: vec![layer.clone()],
    };
    let plan = MappingPlan {
        network: layer.name.clone(),
        prune_ratio: 0.0,
        activation_bits: quant.activation_bits,
        weight_bits: quant.weight_bits,
        entries: vec![entry.clone()],
        totals: Default::default(),
    };
    let setup = InferenceSetup {
        network: &network,
        weights,
        plan: &plan,
        quant,
        macro_config,
        device,
        sense,
    };
    let mut engine = Engine::new(&setup, tree, options, 1)?;
    let mut out = engine.forward_weighted(0, layer, entry, std::slice::from_ref(input))?;
    Ok(out.remove(0))
}

/// Input value feeding weight `widx` of a filter at output position
/// (oy, ox). Weight indices flatten the kernel as (ky, kx, ic) row-major.
fn receptive_value(input: &Tensor, layer: &LayerSpec, oy: usize, ox: usize, widx: usize) -> i64 {
    match layer.kind {
        LayerKind::Conv => {
            let k = layer.kernel.unwrap();
            let ky = widx / (k.w * k.in_ch);
            let rem = widx % (k.w * k.in_ch);
            let kx = rem / k.in_ch;
            let ic = rem % k.in_ch;
            input.at(oy * layer.stride + ky, ox * layer.stride + kx, ic)
        }
        LayerKind::Fc => input.data[widx],
        _ => unreachable!("receptive_value on unweighted layer"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::{build_tree, KindSet, TreeSpec};
    use crate::mapper::{map_network, KernelShape};
    use std::collections::BTreeMap;

    fn setup_parts(
        network: Network,
        weights: NetworkWeights,
        quant: QuantConfig,
    ) -> (Network, NetworkWeights, MappingPlan, QuantConfig, MacroConfig) {
        let cfg = MacroConfig {
            activation_bits: quant.activation_bits,
            weight_bits: quant.weight_bits,
            ..MacroConfig::default()
        };
        let (plan, _) = map_network(&network, &weights, 0.0, &cfg).unwrap();
        (network, weights, plan, quant, cfg)
    }

    fn column_tree() -> TreeInstance {
        build_tree(&TreeSpec::interleaved_10t28t(64, 1), &KindSet::builtin()).unwrap()
    }

    fn quant_4a4w(input_scale: f64, scales: &[(&str, i64, i64)]) -> QuantConfig {
        QuantConfig {
            activation_bits: 4,
            weight_bits: 4,
            scheme_label: "4A4W".into(),
            input_scale,
            layer_scales: scales
                .iter()
                .map(|(l, n, d)| (l.to_string(), Rational { num: *n, den: *d }))
                .collect(),
        }
    }

    #[test]
    fn identity_network_predicts_argmax_of_input() {
        let network = {
            let mut net = Network {
                name: "identity".into(),
                input_shape: (1, 1, 4),
                layers: vec![LayerSpec {
                    name: "fc".into(),
                    kind: LayerKind::Fc,
                    kernel: Some(KernelShape { h: 1, w: 1, in_ch: 4, out_ch: 4 }),
                    stride: 1,
                    output_shape: (0, 0, 0),
                }],
            };
            net.resolve_shapes().unwrap();
            net
        };
        let mut weights = NetworkWeights::default();
        // Identity: neuron f reads input f with weight 1.
        weights.layers.insert(
            "fc".into(),
            (0..4)
                .map(|f| (0..4).map(|i| i64::from(i == f)).collect())
                .collect(),
        );
        let quant = quant_4a4w(1.0, &[]);
        let (network, weights, plan, quant, macro_config) = setup_parts(network, weights, quant);
        let device = DeviceParams::default();
        let sense = SenseConfig::geometric_mean(&device);
        let setup = InferenceSetup {
            network: &network,
            weights: &weights,
            plan: &plan,
            quant: &quant,
            macro_config,
            device,
            sense,
        };
        let tree = column_tree();
        let images = vec![
            vec![3.0, 7.0, 1.0, 0.0],
            vec![9.0, 2.0, 15.0, 4.0],
        ];
        let out = run_inference(&setup, &tree, &images, InferenceMode::Cnn, &RunOptions::default())
            .unwrap();
        assert_eq!(out.predictions, vec![1, 2]);
        assert_eq!(out.traces[0].logits, vec![3, 7, 1, 0]);
    }

    #[test]
    fn small_conv_matches_direct_convolution() {
        // 3x3 all-ones kernel over a 4x4 all-ones image: 2x2 of 9s.
        let network = {
            let mut net = Network {
                name: "conv".into(),
                input_shape: (4, 4, 1),
                layers: vec![LayerSpec {
                    name: "c".into(),
                    kind: LayerKind::Conv,
                    kernel: Some(KernelShape { h: 3, w: 3, in_ch: 1, out_ch: 1 }),
                    stride: 1,
                    output_shape: (0, 0, 0),
                }],
            };
            net.resolve_shapes().unwrap();
            net
        };
        let mut weights = NetworkWeights::default();
        weights.layers.insert("c".into(), vec![vec![1; 9]]);
        let quant = QuantConfig {
            activation_bits: 1,
            weight_bits: 4,
            scheme_label: "1A4W".into(),
            input_scale: 1.0,
            layer_scales: BTreeMap::new(),
        };
        let (network, weights, plan, quant, macro_config) = setup_parts(network, weights, quant);
        let device = DeviceParams::default();
        let sense = SenseConfig::geometric_mean(&device);
        let setup = InferenceSetup {
            network: &network,
            weights: &weights,
            plan: &plan,
            quant: &quant,
            macro_config,
            device,
            sense,
        };
        let tree = column_tree();
        let images = vec![vec![1.0; 16]];
        let out = run_inference(&setup, &tree, &images, InferenceMode::Cnn, &RunOptions::default())
            .unwrap();
        assert_eq!(out.traces[0].logits, vec![9, 9, 9, 9]);
    }

    #[test]
    fn snn_single_step_equals_cnn_single_bit() {
        // Binary inputs, one step, output layer integrates: identical sums.
        let network = {
            let mut net = Network {
                name: "n".into(),
                input_shape: (1, 1, 8),
                layers: vec![LayerSpec {
                    name: "fc".into(),
                    kind: LayerKind::Fc,
                    kernel: Some(KernelShape { h: 1, w: 1, in_ch: 8, out_ch: 3 }),
                    stride: 1,
                    output_shape: (0, 0, 0),
                }],
            };
            net.resolve_shapes().unwrap();
            net
        };
        let mut weights = NetworkWeights::default();
        weights.layers.insert(
            "fc".into(),
            vec![
                vec![1, -2, 3, -4, 5, -6, 7, -8],
                vec![2, 2, 2, 2, 2, 2, 2, 2],
                vec![-1, 1, -1, 1, -1, 1, -1, 1],
            ],
        );
        let quant = QuantConfig {
            activation_bits: 1,
            weight_bits: 4,
            scheme_label: "1A4W".into(),
            input_scale: 1.0,
            layer_scales: BTreeMap::new(),
        };
        let (network, weights, plan, quant, macro_config) = setup_parts(network, weights, quant);
        let device = DeviceParams::default();
        let sense = SenseConfig::geometric_mean(&device);
        let setup = InferenceSetup {
            network: &network,
            weights: &weights,
            plan: &plan,
            quant: &quant,
            macro_config,
            device,
            sense,
        };
        let tree = column_tree();
        let images = vec![vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]];
        let cnn = run_inference(&setup, &tree, &images, InferenceMode::Cnn, &RunOptions::default())
            .unwrap();
        // At 1-bit precision a single encoder step reproduces the input
        // bits, and the output layer integrates without firing, so the
        // two paths must agree bit-exactly.
        let snn = run_inference(
            &setup,
            &tree,
            &images,
            InferenceMode::Snn { steps: 1 },
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(cnn.traces[0].logits, snn.traces[0].logits);
    }

    #[test]
    fn zero_skip_changes_cycles_not_results() {
        let network = {
            let mut net = Network {
                name: "n".into(),
                input_shape: (1, 1, 16),
                layers: vec![LayerSpec {
                    name: "fc".into(),
                    kind: LayerKind::Fc,
                    kernel: Some(KernelShape { h: 1, w: 1, in_ch: 16, out_ch: 2 }),
                    stride: 1,
                    output_shape: (0, 0, 0),
                }],
            };
            net.resolve_shapes().unwrap();
            net
        };
        let mut weights = NetworkWeights::default();
        weights.layers.insert(
            "fc".into(),
            vec![
                (0..16).map(|i| (i % 15) as i64 - 7).collect(),
                (0..16).map(|i| ((i * 3) % 15) as i64 - 7).collect(),
            ],
        );
        let quant = quant_4a4w(1.0, &[]);
        let (network, weights, plan, quant, macro_config) = setup_parts(network, weights, quant);
        let device = DeviceParams::default();
        let sense = SenseConfig::geometric_mean(&device);
        let setup = InferenceSetup {
            network: &network,
            weights: &weights,
            plan: &plan,
            quant: &quant,
            macro_config,
            device,
            sense,
        };
        let tree = column_tree();
        // Small values leave high bit-planes empty.
        let images = vec![(0..16).map(|i| (i % 3) as f64).collect::<Vec<f64>>()];
        let plain = run_inference(&setup, &tree, &images, InferenceMode::Cnn, &RunOptions::default())
            .unwrap();
        let skipping = run_inference(
            &setup,
            &tree,
            &images,
            InferenceMode::Cnn,
            &RunOptions { zero_skip: true, ..RunOptions::default() },
        )
        .unwrap();
        assert_eq!(plain.traces[0].logits, skipping.traces[0].logits);
        let p = &plain.traces[0].layers[0];
        let s = &skipping.traces[0].layers[0];
        assert_eq!(p.skipped_bank_cycles, 0);
        assert!(s.skipped_bank_cycles > 0);
        assert_eq!(
            p.executed_bank_cycles,
            s.executed_bank_cycles + s.skipped_bank_cycles
        );
    }
}
