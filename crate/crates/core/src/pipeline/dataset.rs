//! Turning fully sampled k-space into normalized (input, target) pairs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{readout_name, topology_name, DataSource, PhantomSet, TrainConfig};
use crate::error::{invalid, Error, Result};
use crate::formats::{parse_key_values, sha256_hex, write_atomic, KeyValues, TensorData, TensorFile};
use crate::image::Image2D;
use crate::mri::{
    apply_mask, make_cartesian_mask, normalize, phantom_generate, sos_combine, zero_fill_recon,
    ComplexImage, KSpaceVolume, Phantom, PhantomSpec, SamplingMask,
};
use crate::nn::Tensor;
use crate::qsim::CircuitConfig;
use crate::quanv::quanvolve;

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    /// Zero-filled SOS image divided by `scale`.
    pub input: Image2D,
    /// Fully sampled SOS image divided by the same `scale`.
    pub target: Image2D,
    /// Maximum of the zero-filled SOS image.
    pub scale: f64,
    /// Index into [`Dataset::masks`].
    pub mask_index: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub pairs: Vec<SamplePair>,
    pub masks: Vec<SamplingMask>,
    /// Quanvolution of each input as `[1, C, H/2, W/2]`, when precomputed.
    pub features: Option<Vec<Tensor>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.pairs.first().map(|p| p.input.dims())
    }

    pub fn mask_for(&self, index: usize) -> &SamplingMask {
        &self.masks[self.pairs[index].mask_index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Masks, zero-fills, coil-combines and normalizes one slice.
pub fn make_pair(kspace: &KSpaceVolume, mask: &SamplingMask, mask_index: usize) -> Result<SamplePair> {
    let full = sos_combine(&zero_fill_recon(kspace)?)?;
    let zero_filled = sos_combine(&zero_fill_recon(&apply_mask(kspace, mask)?)?)?;
    let (input, scale) = normalize(&zero_filled)?;
    let target = full.scaled(1.0 / scale);
    Ok(SamplePair { input, target, scale, mask_index })
}

/// Per-slice phantom seeds drawn from one stream seeded by `base`.
pub fn slice_seeds(base: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    (0..count).map(|_| rng.next_u64()).collect()
}

pub fn phantom_slices(set: &PhantomSet, split: Split) -> Result<Vec<Phantom>> {
    let (count, base) = match split {
        Split::Train => (set.train_slices, set.train_seed),
        Split::Test => (set.test_slices, set.test_seed),
    };
    slice_seeds(base, count)
        .into_iter()
        .map(|seed| {
            phantom_generate(&PhantomSpec {
                height: set.image_size,
                width: set.image_size,
                coils: set.coils,
                ellipses: set.ellipses,
                seed,
            })
        })
        .collect()
}

pub fn kspace_file_name(index: usize) -> String {
    format!("slice_{index:04}_kspace.qmrt")
}

pub fn ground_truth_file_name(index: usize) -> String {
    format!("slice_{index:04}_gt.qmrt")
}

/// Writes each phantom's ground truth and multicoil k-space.
pub fn write_phantom_slices(dir: &Path, phantoms: &[Phantom]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, p) in phantoms.iter().enumerate() {
        TensorFile::from_image(&p.ground_truth).write(&dir.join(ground_truth_file_name(i)))?;
        TensorFile::from_complex_images(p.kspace.coils())?
            .write(&dir.join(kspace_file_name(i)))?;
    }
    Ok(())
}

/// Zero-pads k-space up to the next power of two per axis, keeping the
/// centered zero frequency at index `n / 2`.
pub fn pad_kspace(coil: &ComplexImage) -> ComplexImage {
    let (h, w) = coil.dims();
    let (ph, pw) = (h.next_power_of_two(), w.next_power_of_two());
    if (ph, pw) == (h, w) {
        return coil.clone();
    }
    let (r0, c0) = (ph / 2 - h / 2, pw / 2 - w / 2);
    let mut out = ComplexImage::zeros(ph, pw);
    for r in 0..h {
        for c in 0..w {
            out.set(r + r0, c + c0, coil.get(r, c));
        }
    }
    out
}

/// Reads every `slice_*_kspace.qmrt` in `dir`, in file-name order.
pub fn load_kspace_dir(dir: &Path) -> Result<Vec<KSpaceVolume>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("slice_") && n.ends_with("_kspace.qmrt"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let coils = TensorFile::read(p)?.to_complex_images()?;
            KSpaceVolume::new(coils.iter().map(pad_kspace).collect())
        })
        .collect()
}

fn split_kspace(config: &TrainConfig, split: Split) -> Result<Vec<KSpaceVolume>> {
    match &config.data {
        DataSource::Phantom(set) => {
            Ok(phantom_slices(set, split)?.into_iter().map(|p| p.kspace).collect())
        }
        DataSource::Directory(dir) => load_kspace_dir(&dir.join(split.name())),
    }
}

fn mask_seed_for(config: &TrainConfig, split: Split, slice: usize) -> u64 {
    match split {
        Split::Train => config.mask_seed.wrapping_add(slice as u64),
        Split::Test => config.mask_seed.wrapping_add(1 << 32).wrapping_add(slice as u64),
    }
}

/// Builds the pairs of one split from already loaded k-space.
pub fn prepare_pairs(
    config: &TrainConfig,
    split: Split,
    slices: &[KSpaceVolume],
) -> Result<Dataset> {
    let Some(first) = slices.first() else {
        return invalid(format!("the {} split has no slices", split.name()));
    };
    let (h, w) = first.dims();
    if slices.iter().any(|s| s.dims() != (h, w)) {
        return invalid(format!("{} slices differ in size", split.name()));
    }
    if h < 16 || w < 16 || h % 8 != 0 || w % 8 != 0 {
        return invalid(format!("slices must be at least 16x16 and multiples of 8, got {h}x{w}"));
    }
    let cf = config.center_fraction_for(config.acceleration);
    let make = |seed| make_cartesian_mask(h, w, config.acceleration, cf, seed);
    let masks = if config.per_slice_masks {
        (0..slices.len()).map(|i| make(mask_seed_for(config, split, i))).collect::<Result<_>>()?
    } else {
        vec![make(config.mask_seed)?]
    };
    let pairs = slices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let m = if config.per_slice_masks { i } else { 0 };
            make_pair(s, &masks[m], m)
        })
        .collect::<Result<_>>()?;
    Ok(Dataset { pairs, masks, features: None })
}

/// Prepares one split. Quantum features are attached (and cached under
/// `out_dir/quanv_cache`) when the config uses the quantum front end with
/// precomputation enabled.
pub fn prepare_dataset(config: &TrainConfig, split: Split) -> Result<Dataset> {
    config.validate()?;
    let slices = split_kspace(config, split)?;
    let mut data = prepare_pairs(config, split, &slices)?;
    if config.front_end == crate::nn::FrontEndKind::Quantum && config.precompute_quanv {
        let cache = config.out_dir.join("quanv_cache");
        data.features = Some(precompute_features(&data, &config.circuit, Some(&cache))?);
    }
    Ok(data)
}

fn circuit_key(circuit: &CircuitConfig) -> String {
    format!(
        "readout={};topology={};angle_scale={:016x}",
        readout_name(circuit.readout),
        topology_name(circuit.entanglement),
        circuit.angle_scale.to_bits()
    )
}

/// Cache file name for one image under one circuit.
pub fn feature_cache_key(image: &Image2D, circuit: &CircuitConfig) -> String {
    let mut bytes = TensorFile::from_image(image).encode();
    bytes.extend_from_slice(circuit_key(circuit).as_bytes());
    sha256_hex(&bytes)
}

/// Quanvolution of every input, read from or written to `cache_dir`.
pub fn precompute_features(
    data: &Dataset,
    circuit: &CircuitConfig,
    cache_dir: Option<&Path>,
) -> Result<Vec<Tensor>> {
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir)?;
    }
    data.pairs
        .iter()
        .map(|pair| {
            let path = cache_dir
                .map(|d| d.join(format!("{}.qmrt", feature_cache_key(&pair.input, circuit))));
            if let Some(p) = path.as_ref().filter(|p| p.exists()) {
                if let Ok(t) = TensorFile::read(p).and_then(|f| f.to_tensor()) {
                    return Ok(t);
                }
            }
            let fm = quanvolve(&pair.input, circuit)?;
            let t = Tensor::from_vec([1, fm.channels(), fm.height(), fm.width()], fm.into_data())?;
            if let Some(p) = path {
                write_atomic(&p, &TensorFile::from_tensor(&t).encode())?;
            }
            Ok(t)
        })
        .collect()
}

const MANIFEST: &str = "manifest.cfg";
const MANIFEST_KEYS: &[&str] = &["count", "masks", "protocol_hash"];

/// Stores a prepared split so it can be evaluated later.
pub fn write_prepared(dir: &Path, data: &Dataset, protocol_hash: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, p) in data.pairs.iter().enumerate() {
        TensorFile::from_image(&p.input).write(&dir.join(format!("pair_{i:04}_input.qmrt")))?;
        TensorFile::from_image(&p.target).write(&dir.join(format!("pair_{i:04}_target.qmrt")))?;
    }
    for (i, m) in data.masks.iter().enumerate() {
        TensorFile::from_image(&m.to_image()).write(&dir.join(format!("mask_{i:04}.qmrt")))?;
    }
    let scales = TensorFile::new(
        vec![data.len()],
        TensorData::F64(data.pairs.iter().map(|p| p.scale).collect()),
    )?;
    scales.write(&dir.join("scales.qmrt"))?;
    let indices = TensorFile::new(
        vec![data.len()],
        TensorData::F64(data.pairs.iter().map(|p| p.mask_index as f64).collect()),
    )?;
    indices.write(&dir.join("mask_index.qmrt"))?;
    let mut kv = KeyValues::default();
    kv.insert("count", data.len().to_string());
    kv.insert("masks", data.masks.len().to_string());
    kv.insert("protocol_hash", protocol_hash);
    write_atomic(&dir.join(MANIFEST), kv.render().as_bytes())?;
    Ok(())
}

fn f64_vector(file: TensorFile, expected: usize, what: &str) -> Result<Vec<f64>> {
    let dims = file.dims().to_vec();
    match (dims.as_slice(), file.into_data()) {
        ([n], TensorData::F64(v)) if *n == expected => Ok(v),
        _ => Err(Error::Format(format!("{what}: expected f64 vector of length {expected}"))),
    }
}

/// Loads a split written by [`write_prepared`]; returns it with its protocol hash.
pub fn read_prepared(dir: &Path) -> Result<(Dataset, String)> {
    let text = fs::read_to_string(dir.join(MANIFEST)).map_err(|e| {
        Error::InvalidArgument(format!("{} is not a prepared dataset: {e}", dir.display()))
    })?;
    let kv = parse_key_values(&text, MANIFEST_KEYS)?;
    let number = |key: &str| -> Result<usize> {
        kv.get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format(format!("manifest: missing or bad {key}")))
    };
    let (count, mask_count) = (number("count")?, number("masks")?);
    let hash = kv
        .get("protocol_hash")
        .ok_or_else(|| Error::Format("manifest: missing protocol_hash".into()))?
        .to_string();
    let scales = f64_vector(TensorFile::read(&dir.join("scales.qmrt"))?, count, "scales")?;
    let indices = f64_vector(TensorFile::read(&dir.join("mask_index.qmrt"))?, count, "mask_index")?;
    let masks = (0..mask_count)
        .map(|i| {
            SamplingMask::from_image(&TensorFile::read(&dir.join(format!("mask_{i:04}.qmrt")))?.to_image()?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::with_capacity(count);
    for i in 0..count {
        let input = TensorFile::read(&dir.join(format!("pair_{i:04}_input.qmrt")))?.to_image()?;
        let target = TensorFile::read(&dir.join(format!("pair_{i:04}_target.qmrt")))?.to_image()?;
        let mask_index = indices[i] as usize;
        if mask_index >= masks.len() || input.dims() != target.dims() {
            return Err(Error::Format(format!("prepared pair {i} is inconsistent")));
        }
        pairs.push(SamplePair { input, target, scale: scales[i], mask_index });
    }
    if pairs.is_empty() {
        return invalid("prepared dataset is empty");
    }
    Ok((Dataset { pairs, masks, features: None }, hash))
}
