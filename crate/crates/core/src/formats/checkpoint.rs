//! The `QMRC` checkpoint container.
//!
//! ```text
//! magic "QMRC" | version u8 (1)
//! config_hash [32] | protocol_hash [32]          raw SHA-256 digests
//! config_len u32 | config text (UTF-8)           resolved run config
//! lr f64 | beta1 f64 | beta2 f64 | eps f64 | step u64   optimizer
//! count u32, then per entry:
//!   name_len u16 | name (UTF-8) | tensor_len u32 | QMRT tensor file bytes
//! ```
//!
//! Entry names are unique. Network parameters use `param:<name>`,
//! batchnorm statistics `buffer:<name>` and Adam moments `adam.m:<name>` /
//! `adam.v:<name>`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::{write_atomic, Reader, TensorFile};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QMRC";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: TensorFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Hex SHA-256 of the resolved config text.
    pub config_hash: String,
    /// Hex SHA-256 of the data-protocol subset of the config.
    pub protocol_hash: String,
    pub config_text: String,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub tensors: Vec<NamedTensor>,
}

fn digest_bytes(hex_digest: &str) -> Result<[u8; 32]> {
    let bytes = hex::decode(hex_digest)
        .map_err(|e| Error::InvalidArgument(format!("bad hex digest: {e}")))?;
    bytes.try_into().map_err(|_| Error::InvalidArgument("digest must be 32 bytes".into()))
}

impl Checkpoint {
    pub fn find(&self, name: &str) -> Option<&TensorFile> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &t.tensor)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        out.extend_from_slice(&digest_bytes(&self.config_hash)?);
        out.extend_from_slice(&digest_bytes(&self.protocol_hash)?);
        let config = self.config_text.as_bytes();
        let config_len = u32::try_from(config.len())
            .map_err(|_| Error::InvalidArgument("config text too long".into()))?;
        out.extend_from_slice(&config_len.to_le_bytes());
        out.extend_from_slice(config);
        for v in [self.lr, self.beta1, self.beta2, self.eps] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        let mut seen = HashSet::new();
        for entry in &self.tensors {
            if !seen.insert(entry.name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate tensor {}", entry.name)));
            }
            let name = entry.name.as_bytes();
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::InvalidArgument("tensor name too long".into()))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name);
            let body = entry.tensor.encode();
            let body_len = u32::try_from(body.len())
                .map_err(|_| Error::InvalidArgument(format!("tensor {} too large", entry.name)))?;
            out.extend_from_slice(&body_len.to_le_bytes());
            out.extend_from_slice(&body);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad magic, expected QMRC".into()));
        }
        let version = r.u8()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let config_hash = hex::encode(r.take(32)?);
        let protocol_hash = hex::encode(r.take(32)?);
        let config_len = r.u32()? as usize;
        let config_text = std::str::from_utf8(r.take(config_len)?)
            .map_err(|_| Error::Format("config text is not UTF-8".into()))?
            .to_string();
        let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let step = r.u64()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(r.remaining() / 13 + 1));
        let mut seen = HashSet::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(Error::Format(format!("duplicate tensor {name}")));
            }
            let body_len = r.u32()? as usize;
            let tensor = TensorFile::decode(r.take(body_len)?)?;
            tensors.push(NamedTensor { name, tensor });
        }
        if r.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes in checkpoint", r.remaining())));
        }
        Ok(Self { config_hash, protocol_hash, config_text, lr, beta1, beta2, eps, step, tensors })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(write_atomic(path, &self.encode()?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{sha256_hex, TensorData};

    fn sample() -> Checkpoint {
        Checkpoint {
            config_hash: sha256_hex(b"a"),
            protocol_hash: sha256_hex(b"b"),
            config_text: "accel = 4\n".into(),
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 12,
            tensors: vec![
                NamedTensor {
                    name: "param:w".into(),
                    tensor: TensorFile::new(vec![2], TensorData::F64(vec![1.0, 2.0])).unwrap(),
                },
                NamedTensor {
                    name: "buffer:m".into(),
                    tensor: TensorFile::new(vec![1], TensorData::F64(vec![0.5])).unwrap(),
                },
            ],
        }
    }

    #[test]
    fn round_trip() {
        let ck = sample();
        let back = Checkpoint::decode(&ck.encode().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert!(back.find("param:w").is_some());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().encode().unwrap();
        for cut in [0, 3, 10, 80, bytes.len() - 1] {
            assert!(Checkpoint::decode(&bytes[..cut]).is_err());
        }
        let mut dup = sample();
        dup.tensors[1].name = "param:w".into();
        assert!(dup.encode().is_err());
    }
}
