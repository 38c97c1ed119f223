//! 8-bit binary PGM (P5) export, scaled so the image maximum maps to 255.

use std::path::Path;

use super::write_atomic;
use crate::error::Result;
use crate::image::Image2D;

pub fn encode_pgm(image: &Image2D) -> Vec<u8> {
    let max = image.max();
    let scale = if max > 0.0 && max.is_finite() { 255.0 / max } else { 0.0 };
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn write_pgm(image: &Image2D, path: &Path) -> Result<()> {
    Ok(write_atomic(path, &encode_pgm(image))?)
}
