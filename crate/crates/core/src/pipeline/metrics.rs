//! Image quality metrics on a fixed data range of 1.

use crate::error::{invalid, Result};
use crate::image::Image2D;

/// PSNR reported for a perfect reconstruction (zero MSE).
pub const PSNR_CAP: f64 = 99.0;

/// Side of the Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_dims(a: &Image2D, b: &Image2D) -> Result<()> {
    if a.dims() != b.dims() {
        return invalid(format!("metric inputs differ in size: {:?} vs {:?}", a.dims(), b.dims()));
    }
    Ok(())
}

pub fn mse(a: &Image2D, b: &Image2D) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data().len() as f64)
}

/// `10 log10(1 / mse)`, capped at [`PSNR_CAP`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
}

pub fn psnr(reconstruction: &Image2D, reference: &Image2D) -> Result<f64> {
    Ok(psnr_from_mse(mse(reconstruction, reference)?))
}

/// `10 log10(range^2 / mse)` for images on another intensity scale.
pub fn psnr_with_range(reconstruction: &Image2D, reference: &Image2D, data_range: f64) -> Result<f64> {
    if !(data_range.is_finite() && data_range > 0.0) {
        return invalid(format!("data range must be positive, got {data_range}"));
    }
    Ok(psnr_from_mse(mse(reconstruction, reference)? / (data_range * data_range)))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|v| v / total).collect()
}

/// Separable Gaussian filter keeping only fully covered positions.
fn filter_valid(data: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..k).map(|i| g[i] * data[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..k).map(|i| g[i] * rows[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean structural similarity over every 11x11 Gaussian window
/// (sigma 1.5) that fits inside the image.
pub fn ssim(reconstruction: &Image2D, reference: &Image2D) -> Result<f64> {
    check_dims(reconstruction, reference)?;
    let (h, w) = reference.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return invalid(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"));
    }
    let g = gaussian_window();
    let x = reconstruction.data();
    let y = reference.data();
    let product = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_x = filter_valid(x, h, w, &g);
    let mu_y = filter_valid(y, h, w, &g);
    let xx = filter_valid(&product(x, x), h, w, &g);
    let yy = filter_valid(&product(y, y), h, w, &g);
    let xy = filter_valid(&product(x, y), h, w, &g);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cov = xy[i] - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        let den = (mx * mx + my * my + c1) * (vx + vy + c2);
        total += num / den;
    }
    Ok(total / mu_x.len() as f64)
}

/// MSE, PSNR and SSIM of one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMetrics {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

impl ImageMetrics {
    pub fn compute(reconstruction: &Image2D, reference: &Image2D) -> Result<Self> {
        let m = mse(reconstruction, reference)?;
        Ok(Self { mse: m, psnr: psnr_from_mse(m), ssim: ssim(reconstruction, reference)? })
    }

    /// Arithmetic mean of each metric.
    pub fn mean(items: &[ImageMetrics]) -> Result<Self> {
        if items.is_empty() {
            return invalid("cannot average an empty metric list");
        }
        let n = items.len() as f64;
        Ok(Self {
            mse: items.iter().map(|m| m.mse).sum::<f64>() / n,
            psnr: items.iter().map(|m| m.psnr).sum::<f64>() / n,
            ssim: items.iter().map(|m| m.ssim).sum::<f64>() / n,
        })
    }
}
