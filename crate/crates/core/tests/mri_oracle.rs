//! Transforms, masks and coil combination against direct-summation oracles.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use proptest::prelude::*;
use qmri_core::image::Image2D;
use qmri_core::mri::{
    apply_mask, default_center_fraction, fft2c, ifft2c, make_cartesian_mask, normalize,
    phantom_generate, sos_combine, zero_fill_recon, ComplexImage, KSpaceVolume, PhantomSpec,
    SamplingMask,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `K[u, v] = sum_{y, x} img[y, x] exp(-+2 pi i (u y / H + v x / W)) / sqrt(HW)`
/// with every index measured from the center sample `n / 2`.
fn direct_dft(img: &ComplexImage, inverse: bool) -> ComplexImage {
    let (h, w) = img.dims();
    let sign = if inverse { 1.0 } else { -1.0 };
    let centered = |i: usize, n: usize| i as f64 - (n / 2) as f64;
    let mut out = ComplexImage::zeros(h, w);
    for u in 0..h {
        for v in 0..w {
            let mut acc = C::new(0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = sign
                        * 2.0
                        * PI
                        * (centered(u, h) * centered(y, h) / h as f64
                            + centered(v, w) * centered(x, w) / w as f64);
                    acc += img.get(y, x) * C::from_polar(1.0, phase);
                }
            }
            out.set(u, v, acc / ((h * w) as f64).sqrt());
        }
    }
    out
}

fn random_complex(h: usize, w: usize, seed: u64) -> ComplexImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..h * w).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    ComplexImage::new(h, w, data).unwrap()
}

fn max_diff(a: &ComplexImage, b: &ComplexImage) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn inner(a: &ComplexImage, b: &ComplexImage) -> C {
    a.data().iter().zip(b.data()).map(|(x, y)| x.conj() * y).sum()
}

#[test]
fn fft_matches_direct_dft() {
    for (h, w, seed) in [(8, 8, 1), (16, 4, 2), (2, 32, 3), (1, 8, 4)] {
        let img = random_complex(h, w, seed);
        assert!(max_diff(&fft2c(&img).unwrap(), &direct_dft(&img, false)) < 1e-10);
        assert!(max_diff(&ifft2c(&img).unwrap(), &direct_dft(&img, true)) < 1e-10);
    }
}

#[test]
fn round_trip_and_adjoint() {
    for (h, w) in [(16, 16), (32, 8), (64, 64)] {
        let x = random_complex(h, w, 7);
        let y = random_complex(h, w, 8);
        assert!(max_diff(&ifft2c(&fft2c(&x).unwrap()).unwrap(), &x) < 1e-10);
        assert!(max_diff(&fft2c(&ifft2c(&x).unwrap()).unwrap(), &x) < 1e-10);
        let lhs = inner(&fft2c(&x).unwrap(), &y);
        let rhs = inner(&x, &ifft2c(&y).unwrap());
        assert!((lhs - rhs).norm() < 1e-10);
        assert!((fft2c(&x).unwrap().norm() - x.norm()).abs() < 1e-10);
    }
}

#[test]
fn non_power_of_two_rejected() {
    assert!(fft2c(&ComplexImage::zeros(12, 16)).is_err());
    assert!(ifft2c(&ComplexImage::zeros(16, 6)).is_err());
}

#[test]
fn zero_fill_is_a_projection_onto_measured_lines() {
    let mask = make_cartesian_mask(32, 32, 4.0, 0.08, 5).unwrap();
    let coil = random_complex(32, 32, 9);
    let volume = KSpaceVolume::new(vec![coil.clone()]).unwrap();
    let recon = &zero_fill_recon(&apply_mask(&volume, &mask).unwrap()).unwrap()[0];
    let again = fft2c(recon).unwrap();
    let mut worst = 0.0f64;
    for r in 0..32 {
        for c in 0..32 {
            let expected = if mask.is_selected(r) { coil.get(r, c) } else { C::new(0.0, 0.0) };
            worst = worst.max((again.get(r, c) - expected).norm());
        }
    }
    assert!(worst < 1e-10, "{worst}");
    let twice = apply_mask(&apply_mask(&volume, &mask).unwrap(), &mask).unwrap();
    assert_eq!(twice.coils()[0], apply_mask(&volume, &mask).unwrap().coils()[0]);
}

#[test]
fn mask_counts_at_256() {
    for (r, cf) in [(2.0, 0.08), (4.0, 0.04)] {
        let mask = make_cartesian_mask(256, 256, r, cf, 7).unwrap();
        let expected = (256.0f64 / r).ceil() as usize;
        assert_eq!(mask.selected_count(), expected);
        let n_center = (cf * 256.0).ceil() as usize;
        let start = 128 - n_center / 2;
        assert!((start..start + n_center).all(|l| mask.is_selected(l)));
        assert_eq!(mask.center_lines(), start..start + n_center);
        assert!((mask.achieved_acceleration() - r).abs() / r < 0.05);
    }
}

#[test]
fn mask_edge_cases() {
    let full = make_cartesian_mask(16, 8, 1.0, 0.1, 0).unwrap();
    assert!(full.lines().iter().all(|&l| l));
    assert!(make_cartesian_mask(16, 16, 0.5, 0.1, 0).is_err());
    assert!(make_cartesian_mask(16, 16, 8.0, 0.5, 0).is_err());
    assert!(make_cartesian_mask(16, 16, 2.0, 0.0, 0).is_err());
    assert_eq!(default_center_fraction(2.0), 0.08);
    assert_eq!(default_center_fraction(4.0), 0.04);
    let a = make_cartesian_mask(64, 64, 4.0, 0.04, 3).unwrap();
    assert_eq!(a, make_cartesian_mask(64, 64, 4.0, 0.04, 3).unwrap());
    assert_ne!(a.lines(), make_cartesian_mask(64, 64, 4.0, 0.04, 4).unwrap().lines());
    let back = SamplingMask::from_image(&a.to_image()).unwrap();
    assert_eq!(back.lines(), a.lines());
}

#[test]
fn sos_matches_brute_force() {
    let coils: Vec<ComplexImage> = (0..3).map(|s| random_complex(4, 5, 20 + s)).collect();
    let sos = sos_combine(&coils).unwrap();
    for r in 0..4 {
        for c in 0..5 {
            let mut acc = 0.0;
            for coil in &coils {
                let z = coil.get(r, c);
                acc += z.re * z.re + z.im * z.im;
            }
            assert!((sos.get(r, c) - acc.sqrt()).abs() < 1e-14);
        }
    }
    assert!(sos_combine(&[]).is_err());
}

#[test]
fn phantom_round_trip_and_determinism() {
    let spec = PhantomSpec { height: 32, width: 32, coils: 4, ellipses: 5, seed: 3 };
    let p = phantom_generate(&spec).unwrap();
    assert!(p.ground_truth.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!((p.ground_truth.max() - 1.0).abs() < 1e-12);
    let sos = sos_combine(&zero_fill_recon(&p.kspace).unwrap()).unwrap();
    let worst = sos
        .data()
        .iter()
        .zip(p.ground_truth.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
    let q = phantom_generate(&spec).unwrap();
    assert_eq!(p.kspace.coils(), q.kspace.coils());

    let single = phantom_generate(&PhantomSpec { coils: 1, ..spec }).unwrap();
    let mag = ifft2c(&single.kspace.coils()[0]).unwrap().magnitude();
    let worst = mag
        .data()
        .iter()
        .zip(single.ground_truth.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn normalize_rejects_blank_images() {
    assert!(normalize(&Image2D::zeros(4, 4)).is_err());
    let (n, s) = normalize(&Image2D::filled(2, 2, 0.5)).unwrap();
    assert_eq!(s, 0.5);
    assert_eq!(n.max(), 1.0);
}

proptest! {
    #[test]
    fn mask_count_is_exact(log_h in 4u32..9, r in 1.0f64..6.0, seed in 0u64..1000) {
        let h = 1usize << log_h;
        let cf = default_center_fraction(r);
        let budget = (h as f64 / r).ceil() as usize;
        match make_cartesian_mask(h, 8, r, cf, seed) {
            Ok(m) => {
                prop_assert_eq!(m.selected_count(), budget);
                let center = m.center_lines();
                prop_assert!(center.clone().all(|l| m.is_selected(l)));
            }
            Err(_) => prop_assert!(((cf * h as f64).ceil() as usize) > budget),
        }
    }

    #[test]
    fn fft_preserves_energy(seed in 0u64..500, log_h in 1u32..6, log_w in 1u32..6) {
        let img = random_complex(1 << log_h, 1 << log_w, seed);
        let k = fft2c(&img).unwrap();
        prop_assert!((k.norm() - img.norm()).abs() < 1e-10);
        prop_assert!(max_diff(&ifft2c(&k).unwrap(), &img) < 1e-10);
    }
}
