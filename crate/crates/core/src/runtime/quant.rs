//! Symmetric uniform quantization and the integer tensor type.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positive rational scale used for integer requantization between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn validate(&self) -> Result<()> {
        if self.num <= 0 || self.den <= 0 {
            return Err(Error::InvalidConfig(format!(
                "scale {}/{} must be positive",
                self.num, self.den
            )));
        }
        Ok(())
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Precision scheme plus the per-layer scale factors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantConfig {
    /// Bit-serial activation precision, 1..=8.
    pub activation_bits: u32,
    /// Weight precision: 4 or 8.
    pub weight_bits: u32,
    /// Label of the form "<activation>A<weight>W", e.g. "2A4W".
    pub scheme_label: String,
    /// Real-domain step for input quantization: q = round(x / input_scale).
    pub input_scale: f64,
    /// Integer-domain rescale applied after ReLU on each hidden weighted
    /// layer's accumulators.
    pub layer_scales: BTreeMap<String, Rational>,
}

impl QuantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.activation_bits) {
            return Err(Error::InvalidConfig(format!(
                "activation bits {} outside 1..=8",
                self.activation_bits
            )));
        }
        if self.weight_bits != 4 && self.weight_bits != 8 {
            return Err(Error::InvalidConfig(format!(
                "weight bits {} must be 4 or 8",
                self.weight_bits
            )));
        }
        let expected = format!("{}A{}W", self.activation_bits, self.weight_bits);
        if self.scheme_label != expected {
            return Err(Error::InvalidConfig(format!(
                "scheme label '{}' does not match bit fields (expected '{expected}')",
                self.scheme_label
            )));
        }
        if !self.input_scale.is_finite() || self.input_scale <= 0.0 {
            return Err(Error::InvalidConfig("input scale must be positive".into()));
        }
        for (layer, scale) in &self.layer_scales {
            scale
                .validate()
                .map_err(|_| Error::InvalidConfig(format!("layer '{layer}': bad scale")))?;
        }
        Ok(())
    }

    /// Largest representable activation value.
    pub fn activation_max(&self) -> i64 {
        (1i64 << self.activation_bits) - 1
    }

    /// Signed weight range.
    pub fn weight_range(&self) -> (i64, i64) {
        (
            -(1i64 << (self.weight_bits - 1)),
            (1i64 << (self.weight_bits - 1)) - 1,
        )
    }
}

/// Dense integer tensor with shape (h, w, c), row-major h -> w -> c.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: (usize, usize, usize),
    pub data: Vec<i64>,
}

impl Tensor {
    pub fn zeros(shape: (usize, usize, usize)) -> Self {
        Tensor { shape, data: vec![0; shape.0 * shape.1 * shape.2] }
    }

    pub fn from_data(shape: (usize, usize, usize), data: Vec<i64>) -> Result<Self> {
        if data.len() != shape.0 * shape.1 * shape.2 {
            return Err(Error::ShapeMismatch(format!(
                "{} elements for shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> i64 {
        self.data[(y * self.shape.1 + x) * self.shape.2 + c]
    }

    #[inline]
    pub fn at_mut(&mut self, y: usize, x: usize, c: usize) -> &mut i64 {
        &mut self.data[(y * self.shape.1 + x) * self.shape.2 + c]
    }

    /// Reshape to (1, 1, n) preserving the h -> w -> c element order.
    pub fn flatten(&self) -> Tensor {
        Tensor { shape: (1, 1, self.data.len()), data: self.data.clone() }
    }
}

/// Symmetric uniform quantization of a real-valued buffer:
/// q = clamp(round(x / scale), lo..=hi).
pub fn quantize(values: &[f64], scale: f64, lo: i64, hi: i64) -> Vec<i64> {
    values
        .iter()
        .map(|&x| {
            let q = (x / scale).round() as i64;
            q.clamp(lo, hi)
        })
        .collect()
}

/// Inverse of `quantize` up to rounding.
pub fn dequantize(values: &[i64], scale: f64) -> Vec<f64> {
    values.iter().map(|&q| q as f64 * scale).collect()
}

/// Integer rescale of a non-negative accumulator into the activation
/// range: y = clamp((acc * num + den/2) / den, 0, max). Called after ReLU,
/// so the round-half-up division only sees non-negative inputs.
#[inline]
pub fn requantize(acc: i64, scale: Rational, max: i64) -> i64 {
    debug_assert!(acc >= 0);
    let scaled = (acc as i128 * scale.num as i128 + scale.den as i128 / 2) / scale.den as i128;
    (scaled as i64).clamp(0, max)
}
