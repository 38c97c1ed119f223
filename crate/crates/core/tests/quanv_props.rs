//! Quanvolution shape rules, patch layout and the quantized cache path.

use proptest::prelude::*;
use qmri_core::image::Image2D;
use qmri_core::qsim::{run_patch_circuit, CircuitConfig, Entanglement, Readout};
use qmri_core::quanv::{
    encode_patch, quantization_error_bound, quantize_image, quanvolve, quanvolve_cached,
    PatchCache,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(h: usize, w: usize, seed: u64) -> Image2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image2D::from_fn(h, w, |_, _| rng.gen_range(0.0..1.0))
}

#[test]
fn cached_path_stays_within_lipschitz_bound() {
    let img = random_image(64, 64, 1);
    for cfg in [
        CircuitConfig::default(),
        CircuitConfig { readout: Readout::PerQubitZ, entanglement: Entanglement::Ring, angle_scale: 1.5 },
    ] {
        let exact = quanvolve(&img, &cfg).unwrap();
        let mut cache = PatchCache::new();
        let cached = quanvolve_cached(&img, &cfg, 64, &mut cache).unwrap();
        let worst = exact
            .data()
            .iter()
            .zip(cached.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let bound = quantization_error_bound(&cfg, 64);
        assert!(worst <= bound, "{worst} > {bound}");
        assert!(worst > 0.0);
        assert_eq!(cached, quanvolve(&quantize_image(&img, 64).unwrap(), &cfg).unwrap());
        let stats = cache.stats();
        assert_eq!(stats.circuit_runs + stats.hits, 32 * 32);
        assert_eq!(stats.circuit_runs, cache.len());
    }
}

#[test]
fn cache_reuse_across_images() {
    let cfg = CircuitConfig::default();
    let mut cache = PatchCache::new();
    let a = random_image(16, 16, 2);
    quanvolve_cached(&a, &cfg, 8, &mut cache).unwrap();
    let runs = cache.stats().circuit_runs;
    quanvolve_cached(&a, &cfg, 8, &mut cache).unwrap();
    assert_eq!(cache.stats().circuit_runs, runs);
    assert_eq!(cache.stats().hits, 2 * 64 - runs);
}

#[test]
fn patch_pixels_map_row_major_to_qubits() {
    let cfg = CircuitConfig { readout: Readout::PerQubitZ, ..CircuitConfig::default() };
    let img = Image2D::new(2, 2, vec![0.1, 0.4, 0.7, 0.9]).unwrap();
    let fm = quanvolve(&img, &cfg).unwrap();
    let direct = run_patch_circuit(&encode_patch([0.1, 0.4, 0.7, 0.9]), &cfg).unwrap();
    let swapped = run_patch_circuit(&encode_patch([0.1, 0.7, 0.4, 0.9]), &cfg).unwrap();
    for q in 0..4 {
        assert_eq!(fm.get(q, 0, 0), direct[q]);
    }
    assert_ne!(direct, swapped);
}

#[test]
fn single_channel_view() {
    let cfg = CircuitConfig { readout: Readout::PerQubitZ, ..CircuitConfig::default() };
    let fm = quanvolve(&random_image(6, 4, 3), &cfg).unwrap();
    let ch = fm.channel(2);
    assert_eq!(ch.dims(), (3, 2));
    assert_eq!(ch.get(1, 1), fm.get(2, 1, 1));
}

proptest! {
    #[test]
    fn output_shape_and_range(h in 2usize..20, w in 2usize..20, seed in 0u64..100, per_qubit in any::<bool>()) {
        let readout = if per_qubit { Readout::PerQubitZ } else { Readout::MeanZ };
        let cfg = CircuitConfig { readout, ..CircuitConfig::default() };
        let fm = quanvolve(&random_image(h, w, seed), &cfg).unwrap();
        prop_assert_eq!((fm.channels(), fm.height(), fm.width()), (readout.channels(), h / 2, w / 2));
        prop_assert!(fm.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn trailing_row_and_column_are_ignored(seed in 0u64..100) {
        let cfg = CircuitConfig::default();
        let big = random_image(9, 7, seed);
        let cropped = Image2D::from_fn(8, 6, |r, c| big.get(r, c));
        prop_assert_eq!(quanvolve(&big, &cfg).unwrap(), quanvolve(&cropped, &cfg).unwrap());
    }
}
