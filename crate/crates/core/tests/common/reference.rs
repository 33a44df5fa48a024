//! Reference integer interpreter: the independent oracle for end-to-end
//! inference. Plain nested loops over the quantized network definition;
//! no banks, no trees, no bit-serial pipeline.

use dcim_core::mapper::{LayerKind, Network, NetworkWeights, PruneMask};
use dcim_core::runtime::QuantConfig;

#[derive(Clone)]
struct Grid {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<i64>,
}

impl Grid {
    fn zeros(h: usize, w: usize, c: usize) -> Self {
        Grid { h, w, c, data: vec![0; h * w * c] }
    }

    fn at(&self, y: usize, x: usize, ch: usize) -> i64 {
        self.data[(y * self.w + x) * self.c + ch]
    }

    fn set(&mut self, y: usize, x: usize, ch: usize, v: i64) {
        self.data[(y * self.w + x) * self.c + ch] = v;
    }
}

/// Runs the whole batch through the reference pipeline, returning
/// (predictions, logits) per image.
pub fn run(
    network: &Network,
    weights: &NetworkWeights,
    mask: &PruneMask,
    quant: &QuantConfig,
    images: &[Vec<f64>],
) -> (Vec<usize>, Vec<Vec<i64>>) {
    let mut predictions = Vec::with_capacity(images.len());
    let mut all_logits = Vec::with_capacity(images.len());
    for pixels in images {
        let logits = run_one(network, weights, mask, quant, pixels);
        let mut best = 0usize;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        predictions.push(best);
        all_logits.push(logits);
    }
    (predictions, all_logits)
}

fn run_one(
    network: &Network,
    weights: &NetworkWeights,
    mask: &PruneMask,
    quant: &QuantConfig,
    pixels: &[f64],
) -> Vec<i64> {
    let (ih, iw, ic) = network.input_shape;
    let qmax = (1i64 << quant.activation_bits) - 1;
    let mut acts = Grid::zeros(ih, iw, ic);
    for (i, &p) in pixels.iter().enumerate() {
        let q = (p / quant.input_scale).round() as i64;
        acts.data[i] = q.clamp(0, qmax);
    }

    let final_weighted = network
        .layers
        .iter()
        .rposition(|l| l.has_weights())
        .expect("network has a weighted layer");

    for (idx, layer) in network.layers.iter().enumerate() {
        match layer.kind {
            LayerKind::Input => {}
            LayerKind::Pool => {
                let k = layer.kernel.unwrap();
                let oh = (acts.h - k.h) / layer.stride + 1;
                let ow = (acts.w - k.w) / layer.stride + 1;
                let mut out = Grid::zeros(oh, ow, acts.c);
                for y in 0..oh {
                    for x in 0..ow {
                        for ch in 0..acts.c {
                            let mut best = i64::MIN;
                            for dy in 0..k.h {
                                for dx in 0..k.w {
                                    best = best.max(acts.at(
                                        y * layer.stride + dy,
                                        x * layer.stride + dx,
                                        ch,
                                    ));
                                }
                            }
                            out.set(y, x, ch, best);
                        }
                    }
                }
                acts = out;
            }
            LayerKind::Flatten => {
                acts = Grid { h: 1, w: 1, c: acts.data.len(), data: acts.data };
            }
            LayerKind::Conv => {
                let k = layer.kernel.unwrap();
                let w = &weights.layers[&layer.name];
                let m = &mask.layers[&layer.name];
                let oh = (acts.h - k.h) / layer.stride + 1;
                let ow = (acts.w - k.w) / layer.stride + 1;
                let mut out = Grid::zeros(oh, ow, k.out_ch);
                for y in 0..oh {
                    for x in 0..ow {
                        for f in 0..k.out_ch {
                            let mut acc = 0i64;
                            for ky in 0..k.h {
                                for kx in 0..k.w {
                                    for ch in 0..k.in_ch {
                                        let wi = (ky * k.w + kx) * k.in_ch + ch;
                                        if m[f][wi] {
                                            acc += acts.at(
                                                y * layer.stride + ky,
                                                x * layer.stride + kx,
                                                ch,
                                            ) * w[f][wi];
                                        }
                                    }
                                }
                            }
                            out.set(y, x, f, acc);
                        }
                    }
                }
                acts = finish_weighted(out, layer, idx == final_weighted, quant, qmax);
            }
            LayerKind::Fc => {
                let k = layer.kernel.unwrap();
                let w = &weights.layers[&layer.name];
                let m = &mask.layers[&layer.name];
                let mut out = Grid::zeros(1, 1, k.out_ch);
                for f in 0..k.out_ch {
                    let mut acc = 0i64;
                    for (i, &x) in acts.data.iter().enumerate() {
                        if m[f][i] {
                            acc += x * w[f][i];
                        }
                    }
                    out.data[f] = acc;
                }
                acts = finish_weighted(out, layer, idx == final_weighted, quant, qmax);
            }
        }
    }
    acts.data
}

/// ReLU then integer requantization for hidden layers; the final
/// weighted layer keeps its raw accumulators as logits.
fn finish_weighted(
    raw: Grid,
    layer: &dcim_core::mapper::LayerSpec,
    is_final: bool,
    quant: &QuantConfig,
    qmax: i64,
) -> Grid {
    if is_final {
        return raw;
    }
    let scale = quant.layer_scales[&layer.name];
    Grid {
        h: raw.h,
        w: raw.w,
        c: raw.c,
        data: raw
            .data
            .into_iter()
            .map(|acc| {
                let relu = acc.max(0);
                let y = (relu as i128 * scale.num as i128 + scale.den as i128 / 2)
                    / scale.den as i128;
                (y as i64).clamp(0, qmax)
            })
            .collect(),
    }
}
