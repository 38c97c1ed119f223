//! Centered, unitary 2-D discrete Fourier transforms.
//!
//! `fft2c = fftshift . FFT . ifftshift / sqrt(H W)`, so the DC sample sits at
//! `(H/2, W/2)` and `ifft2c` is both the inverse and the adjoint of `fft2c`.
//! Only power-of-two dimensions are accepted.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::ComplexImage;
use crate::error::{invalid, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn fft2c(image: &ComplexImage) -> Result<ComplexImage> {
    transform(image, FftDirection::Forward)
}

pub fn ifft2c(kspace: &ComplexImage) -> Result<ComplexImage> {
    transform(kspace, FftDirection::Inverse)
}

fn check_dims(h: usize, w: usize) -> Result<()> {
    if !h.is_power_of_two() || !w.is_power_of_two() {
        return invalid(format!(
            "FFT dims must be powers of two, got {h}x{w}; zero-pad the image first \
             (e.g. 256x232 -> 256x256)"
        ));
    }
    Ok(())
}

/// Swaps quadrants. For power-of-two sizes fftshift and ifftshift coincide.
fn shift(data: &[Complex64], h: usize, w: usize) -> Vec<Complex64> {
    let (hh, hw) = (h / 2, w / 2);
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..h {
        let dst_r = (r + hh) % h;
        for c in 0..w {
            out[dst_r * w + (c + hw) % w] = data[r * w + c];
        }
    }
    out
}

fn transpose(data: &[Complex64], h: usize, w: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..h {
        for c in 0..w {
            out[c * h + r] = data[r * w + c];
        }
    }
    out
}

fn transform(image: &ComplexImage, direction: FftDirection) -> Result<ComplexImage> {
    let (h, w) = image.dims();
    check_dims(h, w)?;
    let mut buf = shift(image.data(), h, w);
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let rows = planner.plan_fft(w, direction);
        rows.process(&mut buf);
        buf = transpose(&buf, h, w);
        let cols = planner.plan_fft(h, direction);
        cols.process(&mut buf);
    });
    let buf = transpose(&buf, w, h);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let data = shift(&buf, h, w).into_iter().map(|v| v * scale).collect();
    ComplexImage::new(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn centered_delta_is_flat() {
        let mut img = ComplexImage::zeros(8, 4);
        img.set(4, 2, c(1.0));
        let k = fft2c(&img).unwrap();
        let expect = 1.0 / (32.0f64).sqrt();
        for v in k.data() {
            assert!((v - c(expect)).norm() < 1e-14);
        }
    }

    // DC = sum of 16 ones / sqrt(16) = 4, as Parseval requires (||x|| = 4).
    #[test]
    fn constant_image_has_single_center_sample() {
        let img = ComplexImage::new(4, 4, vec![c(1.0); 16]).unwrap();
        let k = fft2c(&img).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let want = if (r, col) == (2, 2) { c(4.0) } else { c(0.0) };
                assert!((k.get(r, col) - want).norm() < 1e-14, "{r},{col}: {}", k.get(r, col));
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let k = ComplexImage::zeros(16, 8);
        assert!(ifft2c(&k).unwrap().data().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn rejects_non_power_of_two() {
        let err = fft2c(&ComplexImage::zeros(6, 8)).unwrap_err();
        assert!(err.to_string().contains("pad"));
        assert!(ifft2c(&ComplexImage::zeros(8, 12)).is_err());
    }

    #[test]
    fn single_pixel_is_identity() {
        let img = ComplexImage::new(1, 1, vec![Complex64::new(0.3, -2.0)]).unwrap();
        assert_eq!(fft2c(&img).unwrap(), img);
    }
}
