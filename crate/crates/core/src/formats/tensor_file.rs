//! The `QMRT` tensor container.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "QMRT"
//! 4       1         version (1)
//! 5       1         dtype: 0 f32, 1 f64, 2 c64 (f32 re, im), 3 c128 (f64 re, im)
//! 6       1         ndim (1..=8)
//! 7       4*ndim    dims, u32 each, every dim >= 1
//! ..      rest      payload, row-major, product(dims) * dtype size bytes
//! ```

use std::fs;
use std::path::Path;

use num_complex::{Complex32, Complex64};

use super::{write_atomic, Reader};
use crate::error::{Error, Result};
use crate::image::Image2D;
use crate::mri::ComplexImage;
use crate::nn::Tensor;

pub const TENSOR_MAGIC: &[u8; 4] = b"QMRT";
pub const TENSOR_VERSION: u8 = 1;
const MAX_NDIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F64 = 1,
    C64 = 2,
    C128 = 3,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 | DType::C64 => 8,
            DType::C128 => 16,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => DType::F32,
            1 => DType::F64,
            2 => DType::C64,
            3 => DType::C128,
            other => return Err(Error::Format(format!("unknown dtype code {other}"))),
        })
    }
}

#[derive(Debug, Clone)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    C64(Vec<Complex32>),
    C128(Vec<Complex64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::C64(_) => DType::C64,
            TensorData::C128(_) => DType::C128,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::C64(v) => v.len(),
            TensorData::C128(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A dense array with its dims, as stored in a `QMRT` file.
#[derive(Debug, Clone)]
pub struct TensorFile {
    dims: Vec<usize>,
    data: TensorData,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_NDIM {
            return Err(Error::InvalidArgument(format!("ndim must be 1..={MAX_NDIM}")));
        }
        if dims.iter().any(|&d| d == 0 || d > u32::MAX as usize) {
            return Err(Error::InvalidArgument(format!("invalid dims {dims:?}")));
        }
        let count = dims.iter().product::<usize>();
        if count != data.len() {
            return Err(Error::InvalidArgument(format!(
                "dims {dims:?} need {count} elements, data has {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn encode(&self) -> Vec<u8> {
        let count = self.data.len();
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + count * self.dtype().size());
        out.extend_from_slice(TENSOR_MAGIC);
        out.push(TENSOR_VERSION);
        out.push(self.dtype() as u8);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::C64(v) => v.iter().for_each(|x| {
                out.extend_from_slice(&x.re.to_le_bytes());
                out.extend_from_slice(&x.im.to_le_bytes());
            }),
            TensorData::C128(v) => v.iter().for_each(|x| {
                out.extend_from_slice(&x.re.to_le_bytes());
                out.extend_from_slice(&x.im.to_le_bytes());
            }),
        }
        out
    }

    /// Parses a complete file; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let tf = Self::decode_from(&mut r)?;
        if r.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes after payload", r.remaining())));
        }
        Ok(tf)
    }

    pub(crate) fn decode_from(r: &mut Reader<'_>) -> Result<Self> {
        if r.take(4)? != TENSOR_MAGIC {
            return Err(Error::Format("bad magic, expected QMRT".into()));
        }
        let version = r.u8()?;
        if version != TENSOR_VERSION {
            return Err(Error::Format(format!("unsupported tensor file version {version}")));
        }
        let dtype = DType::from_code(r.u8()?)?;
        let ndim = r.u8()? as usize;
        if ndim == 0 || ndim > MAX_NDIM {
            return Err(Error::Format(format!("ndim {ndim} outside 1..={MAX_NDIM}")));
        }
        let mut dims = Vec::with_capacity(ndim);
        let mut count: usize = 1;
        for _ in 0..ndim {
            let d = r.u32()? as usize;
            if d == 0 {
                return Err(Error::Format("zero-length dimension".into()));
            }
            count = count
                .checked_mul(d)
                .ok_or_else(|| Error::Format("element count overflows".into()))?;
            dims.push(d);
        }
        let nbytes = count
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        let payload = r.take(nbytes)?;
        let data = match dtype {
            DType::F32 => TensorData::F32(
                payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
            ),
            DType::F64 => TensorData::F64(
                payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            ),
            DType::C64 => TensorData::C64(
                payload
                    .chunks_exact(8)
                    .map(|c| {
                        Complex32::new(
                            f32::from_le_bytes(c[..4].try_into().unwrap()),
                            f32::from_le_bytes(c[4..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            ),
            DType::C128 => TensorData::C128(
                payload
                    .chunks_exact(16)
                    .map(|c| {
                        Complex64::new(
                            f64::from_le_bytes(c[..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            ),
        };
        Ok(Self { dims, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(write_atomic(path, &self.encode())?)
    }

    pub fn from_image(image: &Image2D) -> Self {
        Self {
            dims: vec![image.height(), image.width()],
            data: TensorData::F64(image.data().to_vec()),
        }
    }

    /// A 2-D real image; `f32` data is widened. A leading unit dim is accepted.
    pub fn to_image(&self) -> Result<Image2D> {
        let (h, w) = match self.dims.as_slice() {
            [h, w] | [1, h, w] | [1, 1, h, w] => (*h, *w),
            other => return Err(Error::Format(format!("expected a 2-D image, got dims {other:?}"))),
        };
        let data = match &self.data {
            TensorData::F64(v) => v.clone(),
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            _ => return Err(Error::Format("expected real dtype for an image".into())),
        };
        Image2D::new(h, w, data)
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        Self { dims: t.shape().to_vec(), data: TensorData::F64(t.data().to_vec()) }
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        let TensorData::F64(v) = &self.data else {
            return Err(Error::Format("expected f64 tensor".into()));
        };
        let shape: [usize; 4] = self
            .dims
            .as_slice()
            .try_into()
            .map_err(|_| Error::Format(format!("expected 4-D tensor, got dims {:?}", self.dims)))?;
        Tensor::from_vec(shape, v.clone())
    }

    /// Stacks coil images as `[coils, H, W]` complex128.
    pub fn from_complex_images(images: &[ComplexImage]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidArgument("no complex images to store".into()))?;
        let (h, w) = first.dims();
        let mut data = Vec::with_capacity(images.len() * h * w);
        for img in images {
            if img.dims() != (h, w) {
                return Err(Error::InvalidArgument("complex images differ in dims".into()));
            }
            data.extend_from_slice(img.data());
        }
        Self::new(vec![images.len(), h, w], TensorData::C128(data))
    }

    /// Splits a `[coils, H, W]` (or `[H, W]`) complex tensor into coil images.
    pub fn to_complex_images(&self) -> Result<Vec<ComplexImage>> {
        let (c, h, w) = match self.dims.as_slice() {
            [c, h, w] => (*c, *h, *w),
            [h, w] => (1, *h, *w),
            other => {
                return Err(Error::Format(format!("expected [coils, H, W], got dims {other:?}")))
            }
        };
        let data: Vec<Complex64> = match &self.data {
            TensorData::C128(v) => v.clone(),
            TensorData::C64(v) => v.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect(),
            _ => return Err(Error::Format("expected complex dtype for k-space".into())),
        };
        (0..c).map(|i| ComplexImage::new(h, w, data[i * h * w..(i + 1) * h * w].to_vec())).collect()
    }
}

impl PartialEq for TensorFile {
    /// Bitwise comparison, so NaN payloads compare by bit pattern.
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.encode() == other.encode()
    }
}
