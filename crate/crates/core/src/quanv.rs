//! The parameter-free quantum convolution layer.
//!
//! Each disjoint 2x2 patch (stride 2) is angle-encoded pixel by pixel,
//! `RY(p)` followed by `RZ(p^2)`, run through the kernel circuit and read
//! out as Pauli-Z expectations. The feature map has half the input
//! resolution; a trailing odd row or column is dropped.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::image::Image2D;
use crate::qsim::{run_patch_circuit_into, CircuitConfig, KERNEL_QUBITS};

/// Channel-major (C x H x W) quanvolution output. Values lie in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    /// One channel as an image.
    pub fn channel(&self, channel: usize) -> Image2D {
        let plane = self.height * self.width;
        let start = channel * plane;
        Image2D::new(self.height, self.width, self.data[start..start + plane].to_vec())
            .expect("feature map plane is non-empty")
    }
}

/// Angle pairs `(RY, RZ) = (p, p^2)` for the four patch pixels.
pub fn encode_patch(pixels: [f64; 4]) -> [(f64, f64); 4] {
    pixels.map(|p| (p, p * p))
}

/// Row-major pixels of the 2x2 patch whose top-left corner is `(2*pr, 2*pc)`.
/// Top-left, top-right, bottom-left, bottom-right map to qubits 0..4.
fn patch_pixels(image: &Image2D, pr: usize, pc: usize) -> [f64; 4] {
    let (r, c) = (2 * pr, 2 * pc);
    [image.get(r, c), image.get(r, c + 1), image.get(r + 1, c), image.get(r + 1, c + 1)]
}

fn output_dims(image: &Image2D) -> Result<(usize, usize)> {
    let (h, w) = image.dims();
    if h < 2 || w < 2 {
        return invalid(format!("quanvolution needs at least a 2x2 image, got {h}x{w}"));
    }
    Ok((h / 2, w / 2))
}

/// Applies the quanvolution kernel to every disjoint 2x2 patch.
pub fn quanvolve(image: &Image2D, config: &CircuitConfig) -> Result<FeatureMap> {
    config.validate()?;
    let (oh, ow) = output_dims(image)?;
    let channels = config.readout.channels();
    let mut data = vec![0.0; channels * oh * ow];
    let mut readout = Vec::with_capacity(KERNEL_QUBITS);
    for pr in 0..oh {
        for pc in 0..ow {
            let angles = encode_patch(patch_pixels(image, pr, pc));
            run_patch_circuit_into(&angles, config, &mut readout)?;
            for (ch, v) in readout.iter().enumerate() {
                data[(ch * oh + pr) * ow + pc] = *v;
            }
        }
    }
    Ok(FeatureMap { channels, height: oh, width: ow, data })
}

/// Counters reported by [`quanvolve_cached`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub circuit_runs: usize,
    pub hits: usize,
}

/// Memoizes circuit readouts keyed by quantized patch values.
#[derive(Debug, Default)]
pub struct PatchCache {
    entries: HashMap<[u32; 4], Vec<f64>>,
    stats: CacheStats,
}

impl PatchCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Snaps `p` to the nearest of `levels` uniform values on `[0, 1]`.
pub fn quantize_level(p: f64, levels: u32) -> u32 {
    let top = (levels - 1) as f64;
    (p.clamp(0.0, 1.0) * top).round() as u32
}

pub fn dequantize_level(q: u32, levels: u32) -> f64 {
    q as f64 / (levels - 1) as f64
}

/// Quantizes the image to `levels` uniform values in `[0, 1]`.
pub fn quantize_image(image: &Image2D, levels: u32) -> Result<Image2D> {
    if levels < 2 {
        return invalid(format!("quantization needs at least 2 levels, got {levels}"));
    }
    Ok(image.map(|p| dequantize_level(quantize_level(p, levels), levels)))
}

/// Quanvolution of the quantized image, memoizing circuit outputs.
///
/// The result equals `quanvolve(&quantize_image(image, levels)?, config)`
/// exactly. A cache may be reused across images that share `config` and
/// `levels`.
pub fn quanvolve_cached(
    image: &Image2D,
    config: &CircuitConfig,
    levels: u32,
    cache: &mut PatchCache,
) -> Result<FeatureMap> {
    if levels < 2 {
        return invalid(format!("quantization needs at least 2 levels, got {levels}"));
    }
    config.validate()?;
    let (oh, ow) = output_dims(image)?;
    let channels = config.readout.channels();
    let mut data = vec![0.0; channels * oh * ow];
    let mut readout = Vec::with_capacity(KERNEL_QUBITS);
    for pr in 0..oh {
        for pc in 0..ow {
            let key = patch_pixels(image, pr, pc).map(|p| quantize_level(p, levels));
            let values = match cache.entries.get(&key) {
                Some(v) => {
                    cache.stats.hits += 1;
                    v
                }
                None => {
                    let angles = encode_patch(key.map(|q| dequantize_level(q, levels)));
                    run_patch_circuit_into(&angles, config, &mut readout)?;
                    cache.stats.circuit_runs += 1;
                    cache.entries.entry(key).or_insert_with(|| readout.clone())
                }
            };
            for (ch, v) in values.iter().enumerate() {
                data[(ch * oh + pr) * ow + pc] = *v;
            }
        }
    }
    Ok(FeatureMap { channels, height: oh, width: ow, data })
}

/// Upper bound on `|quanvolve(x) - quanvolve(quantize(x))|` for pixels in `[0, 1]`.
///
/// Each rotation `exp(-i a P / 2)` moves a bounded observable's expectation
/// by at most `|da|`; the RY angle is `s p` and the RZ angle `s p^2`, so one
/// pixel contributes at most `3 s |dp|`. With four pixels each off by at
/// most half a quantization step the bound is `6 s / (levels - 1)`.
pub fn quantization_error_bound(config: &CircuitConfig, levels: u32) -> f64 {
    6.0 * config.angle_scale / (levels - 1) as f64
}
