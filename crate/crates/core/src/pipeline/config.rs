//! Experiment configuration and its `key = value` mapping.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::formats::{parse_key_values, sha256_hex, KeyValues};
use crate::mri::default_center_fraction;
use crate::nn::{FrontEndKind, NetworkConfig};
use crate::qsim::{CircuitConfig, Entanglement, Readout};

/// Every key accepted in a run config file.
pub const CONFIG_KEYS: &[&str] = &[
    "accel",
    "angle_scale",
    "batch_size",
    "center_frac",
    "coils",
    "compare_accels",
    "data_dir",
    "ellipses",
    "epochs",
    "front_end",
    "image_size",
    "lr",
    "mask_seed",
    "out_dir",
    "per_slice_masks",
    "phantom_seed",
    "precompute_quanv",
    "readout",
    "seed",
    "shuffle",
    "test_phantom_seed",
    "test_slices",
    "topology",
    "train_slices",
    "width_scale",
];

/// Keys that determine which (input, target) pairs a run sees.
const PROTOCOL_KEYS: &[&str] = &[
    "accel",
    "center_frac",
    "coils",
    "data_dir",
    "ellipses",
    "image_size",
    "mask_seed",
    "per_slice_masks",
    "phantom_seed",
    "test_phantom_seed",
    "test_slices",
    "train_slices",
];

/// Synthetic phantom train/test sets, generated from disjoint seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSet {
    pub image_size: usize,
    pub coils: usize,
    pub ellipses: usize,
    pub train_slices: usize,
    pub test_slices: usize,
    pub train_seed: u64,
    pub test_seed: u64,
}

impl Default for PhantomSet {
    fn default() -> Self {
        Self {
            image_size: 64,
            coils: 4,
            ellipses: 6,
            train_slices: 32,
            test_slices: 8,
            train_seed: 1,
            test_seed: 1001,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Phantom(PhantomSet),
    /// `train/` and `test/` subdirectories of `slice_*_kspace.qmrt` files.
    Directory(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub front_end: FrontEndKind,
    pub circuit: CircuitConfig,
    pub acceleration: f64,
    /// `None` picks [`default_center_fraction`] for the acceleration.
    pub center_fraction: Option<f64>,
    pub mask_seed: u64,
    pub per_slice_masks: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub width_scale: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub data: DataSource,
    pub precompute_quanv: bool,
    pub out_dir: PathBuf,
    pub compare_accels: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            front_end: FrontEndKind::Quantum,
            circuit: CircuitConfig::default(),
            acceleration: 4.0,
            center_fraction: None,
            mask_seed: 0,
            per_slice_masks: false,
            epochs: 200,
            batch_size: 4,
            lr: 1e-3,
            width_scale: 1.0,
            seed: 0,
            shuffle: true,
            data: DataSource::Phantom(PhantomSet::default()),
            precompute_quanv: true,
            out_dir: PathBuf::from("runs/default"),
            compare_accels: vec![2.0, 4.0],
        }
    }
}

fn parse<T: std::str::FromStr>(kv: &KeyValues, key: &str, default: T) -> Result<T> {
    match kv.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {v:?}"))),
    }
}

fn parse_bool(kv: &KeyValues, key: &str, default: bool) -> Result<bool> {
    match kv.get(key) {
        None => Ok(default),
        Some("true" | "1" | "yes") => Ok(true),
        Some("false" | "0" | "no") => Ok(false),
        Some(v) => Err(Error::InvalidArgument(format!("{key}: expected true/false, got {v:?}"))),
    }
}

pub fn front_end_name(kind: FrontEndKind) -> &'static str {
    match kind {
        FrontEndKind::Quantum => "quantum",
        FrontEndKind::Classical => "classical",
    }
}

pub fn parse_front_end(s: &str) -> Result<FrontEndKind> {
    match s {
        "quantum" | "hybrid" => Ok(FrontEndKind::Quantum),
        "classical" => Ok(FrontEndKind::Classical),
        other => Err(Error::InvalidArgument(format!("unknown front end {other:?}"))),
    }
}

pub fn readout_name(r: Readout) -> &'static str {
    match r {
        Readout::MeanZ => "mean-z",
        Readout::PerQubitZ => "per-qubit-z",
    }
}

pub fn parse_readout(s: &str) -> Result<Readout> {
    match s {
        "mean-z" => Ok(Readout::MeanZ),
        "per-qubit-z" => Ok(Readout::PerQubitZ),
        other => Err(Error::InvalidArgument(format!("unknown readout {other:?}"))),
    }
}

pub fn topology_name(e: Entanglement) -> &'static str {
    match e {
        Entanglement::Chain => "chain",
        Entanglement::Ring => "ring",
    }
}

pub fn parse_topology(s: &str) -> Result<Entanglement> {
    match s {
        "chain" => Ok(Entanglement::Chain),
        "ring" => Ok(Entanglement::Ring),
        other => Err(Error::InvalidArgument(format!("unknown topology {other:?}"))),
    }
}

impl TrainConfig {
    /// Parses a run config; absent keys take their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let kv = parse_key_values(text, CONFIG_KEYS)?;
        Self::from_key_values(&kv)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let dp = PhantomSet::default();
        let circuit = CircuitConfig {
            entanglement: parse_topology(kv.get("topology").unwrap_or("chain"))?,
            readout: parse_readout(kv.get("readout").unwrap_or("mean-z"))?,
            angle_scale: parse(kv, "angle_scale", 1.0)?,
        };
        let center_fraction = match kv.get("center_frac") {
            None | Some("auto") => None,
            Some(_) => Some(parse(kv, "center_frac", 0.0)?),
        };
        let data = match kv.get("data_dir") {
            Some(dir) if !dir.is_empty() => DataSource::Directory(PathBuf::from(dir)),
            _ => DataSource::Phantom(PhantomSet {
                image_size: parse(kv, "image_size", dp.image_size)?,
                coils: parse(kv, "coils", dp.coils)?,
                ellipses: parse(kv, "ellipses", dp.ellipses)?,
                train_slices: parse(kv, "train_slices", dp.train_slices)?,
                test_slices: parse(kv, "test_slices", dp.test_slices)?,
                train_seed: parse(kv, "phantom_seed", dp.train_seed)?,
                test_seed: parse(kv, "test_phantom_seed", dp.test_seed)?,
            }),
        };
        let compare_accels = match kv.get("compare_accels") {
            None => d.compare_accels.clone(),
            Some(list) => list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("compare_accels: bad {s:?}")))
                })
                .collect::<Result<_>>()?,
        };
        let config = Self {
            front_end: parse_front_end(kv.get("front_end").unwrap_or("quantum"))?,
            circuit,
            acceleration: parse(kv, "accel", d.acceleration)?,
            center_fraction,
            mask_seed: parse(kv, "mask_seed", d.mask_seed)?,
            per_slice_masks: parse_bool(kv, "per_slice_masks", d.per_slice_masks)?,
            epochs: parse(kv, "epochs", d.epochs)?,
            batch_size: parse(kv, "batch_size", d.batch_size)?,
            lr: parse(kv, "lr", d.lr)?,
            width_scale: parse(kv, "width_scale", d.width_scale)?,
            seed: parse(kv, "seed", d.seed)?,
            shuffle: parse_bool(kv, "shuffle", d.shuffle)?,
            data,
            precompute_quanv: parse_bool(kv, "precompute_quanv", d.precompute_quanv)?,
            out_dir: PathBuf::from(kv.get("out_dir").unwrap_or("runs/default")),
            compare_accels,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.acceleration.is_finite() && self.acceleration >= 1.0) {
            return bad(format!("accel must be >= 1, got {}", self.acceleration));
        }
        if let Some(cf) = self.center_fraction {
            if !(cf > 0.0 && cf < 1.0) {
                return bad(format!("center_frac must be in (0, 1), got {cf}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.width_scale.is_finite() && self.width_scale > 0.0) {
            return bad(format!("width_scale must be positive, got {}", self.width_scale));
        }
        if self.compare_accels.is_empty() || self.compare_accels.iter().any(|&r| !(r >= 1.0)) {
            return bad("compare_accels must list accelerations >= 1".into());
        }
        if let DataSource::Phantom(p) = &self.data {
            if p.image_size < 8 || p.image_size % 8 != 0 || !p.image_size.is_power_of_two() {
                return bad(format!(
                    "image_size must be a power of two and >= 8, got {}",
                    p.image_size
                ));
            }
            if p.coils == 0 {
                return bad("coils must be >= 1".into());
            }
        }
        self.circuit.validate()
    }

    pub fn center_fraction_for(&self, acceleration: f64) -> f64 {
        self.center_fraction.unwrap_or_else(|| default_center_fraction(acceleration))
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            front_end: self.front_end,
            circuit: self.circuit,
            width_scale: self.width_scale,
            seed: self.seed,
        }
    }

    /// Every key, resolved, in canonical order.
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("front_end", front_end_name(self.front_end));
        kv.insert("readout", readout_name(self.circuit.readout));
        kv.insert("topology", topology_name(self.circuit.entanglement));
        kv.insert("angle_scale", self.circuit.angle_scale.to_string());
        kv.insert("accel", self.acceleration.to_string());
        kv.insert("center_frac", self.center_fraction_for(self.acceleration).to_string());
        kv.insert("mask_seed", self.mask_seed.to_string());
        kv.insert("per_slice_masks", self.per_slice_masks.to_string());
        kv.insert("epochs", self.epochs.to_string());
        kv.insert("batch_size", self.batch_size.to_string());
        kv.insert("lr", self.lr.to_string());
        kv.insert("width_scale", self.width_scale.to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("shuffle", self.shuffle.to_string());
        kv.insert("precompute_quanv", self.precompute_quanv.to_string());
        kv.insert("out_dir", self.out_dir.display().to_string());
        kv.insert(
            "compare_accels",
            self.compare_accels.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","),
        );
        match &self.data {
            DataSource::Phantom(p) => {
                kv.insert("data_dir", "");
                kv.insert("image_size", p.image_size.to_string());
                kv.insert("coils", p.coils.to_string());
                kv.insert("ellipses", p.ellipses.to_string());
                kv.insert("train_slices", p.train_slices.to_string());
                kv.insert("test_slices", p.test_slices.to_string());
                kv.insert("phantom_seed", p.train_seed.to_string());
                kv.insert("test_phantom_seed", p.test_seed.to_string());
            }
            DataSource::Directory(dir) => {
                kv.insert("data_dir", dir.display().to_string());
            }
        }
        kv
    }

    pub fn resolved_text(&self) -> String {
        self.to_key_values().render()
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.resolved_text().as_bytes())
    }

    /// Hash of the keys that determine the data pairs.
    pub fn protocol_hash(&self) -> String {
        let kv = self.to_key_values();
        let text: String = kv
            .iter()
            .filter(|(k, _)| PROTOCOL_KEYS.contains(k))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        sha256_hex(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let c = TrainConfig::default();
        let back = TrainConfig::from_text(&c.resolved_text()).unwrap();
        assert_eq!(back.resolved_text(), c.resolved_text());
        assert_eq!(back.config_hash(), c.config_hash());
    }

    #[test]
    fn parses_overrides() {
        let c = TrainConfig::from_text(
            "front_end = classical\naccel = 2\nreadout = per-qubit-z\ncompare_accels = 4\n\
             image_size = 32\ncenter_frac = 0.1\n",
        )
        .unwrap();
        assert_eq!(c.front_end, FrontEndKind::Classical);
        assert_eq!(c.acceleration, 2.0);
        assert_eq!(c.circuit.readout, Readout::PerQubitZ);
        assert_eq!(c.compare_accels, vec![4.0]);
        assert_eq!(c.center_fraction, Some(0.1));
        let DataSource::Phantom(p) = &c.data else { panic!() };
        assert_eq!(p.image_size, 32);
    }

    #[test]
    fn rejects_invalid_values() {
        for text in [
            "unknown_key = 1",
            "accel = 0.5",
            "lr = -1",
            "front_end = analog",
            "image_size = 48",
            "batch_size = 0",
            "shuffle = maybe",
        ] {
            assert!(TrainConfig::from_text(text).is_err(), "{text}");
        }
    }

    #[test]
    fn protocol_hash_ignores_training_keys() {
        let a = TrainConfig::default();
        let b = TrainConfig { epochs: 3, lr: 0.01, front_end: FrontEndKind::Classical, ..a.clone() };
        assert_eq!(a.protocol_hash(), b.protocol_hash());
        assert_ne!(a.config_hash(), b.config_hash());
        let c = TrainConfig { acceleration: 2.0, ..a.clone() };
        assert_ne!(a.protocol_hash(), c.protocol_hash());
    }
}
