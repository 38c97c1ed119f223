//! Synthetic multicoil phantoms built from superposed ellipses.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{fft2c, ComplexImage, KSpaceVolume};
use crate::error::{invalid, Result};
use crate::image::Image2D;

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub coils: usize,
    /// Random interior ellipses on top of the fixed head outline.
    pub ellipses: usize,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self { height: 64, width: 64, coils: 4, ellipses: 6, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    /// Magnitude image in `[0, 1]` with maximum 1.
    pub ground_truth: Image2D,
    /// Coil sensitivities, unit root-sum-of-squares at every pixel.
    pub sensitivities: Vec<ComplexImage>,
    pub kspace: KSpaceVolume,
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    angle: f64,
    intensity: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

fn random_ellipses(rng: &mut ChaCha8Rng, count: usize) -> Vec<Ellipse> {
    let cx = rng.gen_range(-0.05..0.05);
    let cy = rng.gen_range(-0.05..0.05);
    let a = rng.gen_range(0.68..0.82);
    let b = rng.gen_range(0.80..0.92);
    let angle = rng.gen_range(-0.2..0.2);
    let mut out = vec![
        Ellipse { cx, cy, a, b, angle, intensity: 1.0 },
        Ellipse { cx, cy, a: a * 0.9, b: b * 0.92, angle, intensity: -0.6 },
    ];
    for _ in 0..count {
        let r = 0.5 * rng.gen::<f64>().sqrt();
        let t = rng.gen_range(0.0..2.0 * PI);
        out.push(Ellipse {
            cx: cx + r * a * t.cos(),
            cy: cy + r * b * t.sin(),
            a: rng.gen_range(0.05..0.3),
            b: rng.gen_range(0.05..0.3),
            angle: rng.gen_range(0.0..PI),
            intensity: rng.gen_range(-0.2..0.45),
        });
    }
    out
}

/// Rasterizes with 2x2 supersampling so edges carry partial-volume values.
fn rasterize(ellipses: &[Ellipse], height: usize, width: usize) -> Image2D {
    let offsets = [0.25, 0.75];
    let img = Image2D::from_fn(height, width, |r, c| {
        let mut acc = 0.0;
        for oy in offsets {
            for ox in offsets {
                let x = 2.0 * (c as f64 + ox) / width as f64 - 1.0;
                let y = 2.0 * (r as f64 + oy) / height as f64 - 1.0;
                acc += ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.intensity).sum::<f64>();
            }
        }
        (acc / 4.0).max(0.0)
    });
    let max = img.max();
    img.scaled(1.0 / max)
}

/// Gaussian bumps spaced around the field of view with a gentle phase ramp,
/// normalized so the root-sum-of-squares is 1 everywhere.
fn coil_sensitivities(coils: usize, height: usize, width: usize) -> Vec<ComplexImage> {
    let sigma2 = 2.0 * 0.6 * 0.6;
    let mut maps: Vec<ComplexImage> = (0..coils)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / coils as f64;
            let (px, py) = (0.7 * t.cos(), 0.7 * t.sin());
            let data = (0..height * width)
                .map(|i| {
                    let (r, c) = (i / width, i % width);
                    let x = 2.0 * (c as f64 + 0.5) / width as f64 - 1.0;
                    let y = 2.0 * (r as f64 + 0.5) / height as f64 - 1.0;
                    let mag = (-((x - px).powi(2) + (y - py).powi(2)) / sigma2).exp();
                    let phase = 0.5 * (x * t.cos() + y * t.sin());
                    Complex64::from_polar(mag, phase)
                })
                .collect();
            ComplexImage::new(height, width, data).expect("dims checked by caller")
        })
        .collect();
    for i in 0..height * width {
        let rss = maps.iter().map(|m| m.data()[i].norm_sqr()).sum::<f64>().sqrt();
        for m in maps.iter_mut() {
            m.data_mut()[i] /= rss;
        }
    }
    maps
}

/// Generates one phantom slice and its fully sampled multicoil k-space.
pub fn phantom_generate(spec: &PhantomSpec) -> Result<Phantom> {
    if spec.coils == 0 {
        return invalid("phantom needs at least one coil");
    }
    if spec.height < 2 || spec.width < 2 {
        return invalid(format!("phantom dims too small: {}x{}", spec.height, spec.width));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ellipses = random_ellipses(&mut rng, spec.ellipses);
    let ground_truth = rasterize(&ellipses, spec.height, spec.width);
    let sensitivities = coil_sensitivities(spec.coils, spec.height, spec.width);
    let coils = sensitivities
        .iter()
        .map(|s| {
            let data = s.data().iter().zip(ground_truth.data()).map(|(s, g)| s * g).collect();
            fft2c(&ComplexImage::new(spec.height, spec.width, data)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Phantom { ground_truth, sensitivities, kspace: KSpaceVolume::new(coils)? })
}
