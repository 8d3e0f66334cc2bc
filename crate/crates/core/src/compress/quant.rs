use crate::error::{Error, Result};
use crate::inr::{Mlp, MlpArchitecture};

pub const MIN_BITS: u8 = 1;
pub const MAX_BITS: u8 = 32;

/// Uniformly quantized parameter set of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedLayer {
    pub codes: Vec<u32>,
    pub bits: u8,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl QuantizedLayer {
    pub fn levels(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn max_code(&self) -> u32 {
        (self.levels() - 1) as u32
    }

    /// Quantization step; zero for a constant layer.
    pub fn step(&self) -> f64 {
        if self.mu_max == self.mu_min {
            0.0
        } else {
            (self.mu_max - self.mu_min) / self.max_code() as f64
        }
    }

    pub fn dequantize_code(&self, code: u32) -> f64 {
        if code == self.max_code() && self.step() > 0.0 {
            self.mu_max
        } else {
            code as f64 * self.step() + self.mu_min
        }
    }
}

/// `code = round((v - mu_min) / s)` with `s = (mu_max - mu_min) / (2^bits - 1)`.
pub fn quantize_layer(values: &[f64], bits: u8) -> Result<QuantizedLayer> {
    if !(MIN_BITS..=MAX_BITS).contains(&bits) {
        return Err(Error::Config(format!(
            "bit depth must be {MIN_BITS}..={MAX_BITS}, got {bits}"
        )));
    }
    if values.is_empty() {
        return Err(Error::Config("cannot quantize an empty layer".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("cannot quantize non-finite values".into()));
    }
    let mu_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mu_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut layer = QuantizedLayer {
        codes: Vec::new(),
        bits,
        mu_min,
        mu_max,
    };
    let step = layer.step();
    let max_code = layer.max_code() as f64;
    layer.codes = if step == 0.0 {
        vec![0; values.len()]
    } else {
        values
            .iter()
            .map(|&v| ((v - mu_min) / step).round().clamp(0.0, max_code) as u32)
            .collect()
    };
    Ok(layer)
}

pub fn dequantize_layer(q: &QuantizedLayer) -> Vec<f64> {
    q.codes.iter().map(|&c| q.dequantize_code(c)).collect()
}

/// A network whose layers (weights followed by biases) were each quantized
/// separately.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub arch: MlpArchitecture,
    pub layers: Vec<QuantizedLayer>,
}

impl QuantizedModel {
    /// Parameters are first rounded to `f32`, which makes every layer's
    /// `mu_min`/`mu_max` representable in the bitstream header exactly.
    pub fn from_mlp(mlp: &Mlp, bits: u8) -> Result<Self> {
        let offsets = mlp.arch().layer_offsets();
        let layers = offsets
            .windows(2)
            .map(|w| {
                let values: Vec<f64> = mlp.params()[w[0]..w[1]]
                    .iter()
                    .map(|&p| p as f32 as f64)
                    .collect();
                quantize_layer(&values, bits)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            arch: *mlp.arch(),
            layers,
        })
    }

    pub fn to_mlp(&self) -> Result<Mlp> {
        let params: Vec<f64> = self.layers.iter().flat_map(dequantize_layer).collect();
        Mlp::from_params(self.arch, params)
    }
}
