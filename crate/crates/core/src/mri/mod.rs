//! MRI forward model: Fourier transforms, Cartesian undersampling,
//! zero-filled reconstruction, coil combination and phantoms.

mod fft;
mod mask;
mod phantom;

use num_complex::Complex64;

pub use fft::{fft2c, ifft2c};
pub use mask::{default_center_fraction, make_cartesian_mask, SamplingMask};
pub use phantom::{phantom_generate, Phantom, PhantomSpec};

use crate::error::{invalid, Error, Result};
use crate::image::Image2D;

/// A row-major complex image (one coil, image or k-space domain).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return invalid(format!("image dims must be non-zero, got {height}x{width}"));
        }
        if data.len() != height * width {
            return invalid(format!(
                "complex image has {} values, expected {height}x{width}",
                data.len()
            ));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "image dims must be non-zero");
        Self { height, width, data: vec![Complex64::new(0.0, 0.0); height * width] }
    }

    pub fn from_real(image: &Image2D) -> Self {
        Self {
            height: image.height(),
            width: image.width(),
            data: image.data().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.width + col] = value;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn magnitude(&self) -> Image2D {
        Image2D::new(self.height, self.width, self.data.iter().map(|v| v.norm()).collect())
            .expect("dims already validated")
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Multicoil k-space; every coil has the same dims.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceVolume {
    coils: Vec<ComplexImage>,
}

impl KSpaceVolume {
    pub fn new(coils: Vec<ComplexImage>) -> Result<Self> {
        let Some(first) = coils.first() else {
            return invalid("k-space volume needs at least one coil");
        };
        let dims = first.dims();
        if let Some(bad) = coils.iter().find(|c| c.dims() != dims) {
            return invalid(format!(
                "coil dims differ: {}x{} vs {}x{}",
                bad.height, bad.width, dims.0, dims.1
            ));
        }
        Ok(Self { coils })
    }

    pub fn coil_count(&self) -> usize {
        self.coils.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.coils[0].dims()
    }

    pub fn coils(&self) -> &[ComplexImage] {
        &self.coils
    }

    pub fn into_coils(self) -> Vec<ComplexImage> {
        self.coils
    }
}

/// Zeroes every unselected phase-encode line (row) in every coil.
pub fn apply_mask(kspace: &KSpaceVolume, mask: &SamplingMask) -> Result<KSpaceVolume> {
    let (h, w) = kspace.dims();
    if (mask.height(), mask.width()) != (h, w) {
        return invalid(format!(
            "mask is {}x{} but k-space is {h}x{w}",
            mask.height(),
            mask.width()
        ));
    }
    let zero = Complex64::new(0.0, 0.0);
    let coils = kspace
        .coils()
        .iter()
        .map(|coil| {
            let mut out = coil.clone();
            for (r, row) in out.data.chunks_mut(w).enumerate() {
                if !mask.is_selected(r) {
                    row.fill(zero);
                }
            }
            out
        })
        .collect();
    Ok(KSpaceVolume { coils })
}

/// Per-coil inverse transform of (already masked) k-space.
pub fn zero_fill_recon(undersampled: &KSpaceVolume) -> Result<Vec<ComplexImage>> {
    undersampled.coils().iter().map(ifft2c).collect()
}

/// Root-sum-of-squares coil combination.
pub fn sos_combine(coil_images: &[ComplexImage]) -> Result<Image2D> {
    let Some(first) = coil_images.first() else {
        return invalid("sum-of-squares needs at least one coil image");
    };
    let (h, w) = first.dims();
    if coil_images.iter().any(|c| c.dims() != (h, w)) {
        return invalid("coil images have different dims");
    }
    let mut acc = vec![0.0; h * w];
    for coil in coil_images {
        for (a, v) in acc.iter_mut().zip(coil.data()) {
            *a += v.norm_sqr();
        }
    }
    Image2D::new(h, w, acc.into_iter().map(f64::sqrt).collect())
}

/// Divides by the maximum; returns the normalized image and that maximum.
pub fn normalize(image: &Image2D) -> Result<(Image2D, f64)> {
    let scale = image.max();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "cannot normalize image with maximum {scale}"
        )));
    }
    Ok((image.scaled(1.0 / scale), scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cplx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sos_single_and_identical_coils() {
        let coil = ComplexImage::new(1, 2, vec![cplx(3.0, 4.0), cplx(0.0, -2.0)]).unwrap();
        assert_eq!(sos_combine(&[coil.clone()]).unwrap().data(), &[5.0, 2.0]);
        let two = sos_combine(&[coil.clone(), coil]).unwrap();
        assert!((two.data()[0] - 5.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(sos_combine(&[]).is_err());
    }

    #[test]
    fn normalize_contract() {
        let (n, s) = normalize(&Image2D::filled(3, 3, 5.0)).unwrap();
        assert_eq!(s, 5.0);
        assert!(n.data().iter().all(|&v| v == 1.0));
        let img = Image2D::from_fn(4, 4, |r, c| (r * 4 + c) as f64 / 15.0);
        let (n, s) = normalize(&img).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(n, img);
        let img = Image2D::from_fn(4, 4, |r, c| 0.3 + (r * c) as f64 * 1.7);
        let (n, s) = normalize(&img).unwrap();
        for (a, b) in n.scaled(s).data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(normalize(&Image2D::zeros(2, 2)), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn mask_application() {
        let coil = ComplexImage::new(4, 2, (0..8).map(|i| cplx(i as f64 + 1.0, 0.5)).collect())
            .unwrap();
        let vol = KSpaceVolume::new(vec![coil.clone(), coil]).unwrap();
        let full = make_cartesian_mask(4, 2, 1.0, 0.25, 0).unwrap();
        assert_eq!(apply_mask(&vol, &full).unwrap(), vol);

        let centre = SamplingMask::from_lines(2, vec![false, false, true, false]).unwrap();
        let masked = apply_mask(&vol, &centre).unwrap();
        for coil in masked.coils() {
            for r in 0..4 {
                for c in 0..2 {
                    assert_eq!(coil.get(r, c).norm() != 0.0, r == 2);
                }
            }
        }
        assert_eq!(apply_mask(&masked, &centre).unwrap(), masked);

        let wrong = make_cartesian_mask(8, 2, 1.0, 0.25, 0).unwrap();
        assert!(apply_mask(&vol, &wrong).is_err());
    }

    #[test]
    fn volume_dims_must_agree() {
        assert!(KSpaceVolume::new(vec![]).is_err());
        assert!(KSpaceVolume::new(vec![ComplexImage::zeros(2, 2), ComplexImage::zeros(2, 4)])
            .is_err());
    }

    #[test]
    fn zero_fill_of_zero_kspace() {
        let vol = KSpaceVolume::new(vec![ComplexImage::zeros(8, 8)]).unwrap();
        let imgs = zero_fill_recon(&vol).unwrap();
        assert!(imgs[0].data().iter().all(|v| v.norm() == 0.0));
    }
}
