//! `MVOL` volume files: little-endian, magic `MVOL`, `u32` version (1),
//! `u32` dims[3], `f32` spacing[3], `u32` dtype, then row-major x-fastest data.
//! Values are stored in single precision.

use std::fs;
use std::path::Path;

use super::{ScalarVolume, VectorVolume};
use crate::error::{Error, Result};
use crate::Vec3;

const MAGIC: &[u8; 4] = b"MVOL";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 12 + 12 + 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    Vec3F32 = 1,
    Mask = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Volume {
    Scalar(ScalarVolume),
    Vector(VectorVolume),
    /// Stored as `u8`, loaded as 0.0 / 1.0.
    Mask(ScalarVolume),
}

impl Volume {
    /// Scalar view of a scalar or mask volume.
    pub fn into_scalar(self) -> Result<ScalarVolume> {
        match self {
            Volume::Scalar(v) | Volume::Mask(v) => Ok(v),
            Volume::Vector(_) => Err(Error::Format("expected a scalar volume, found a vector volume".into())),
        }
    }

    pub fn into_vector(self) -> Result<VectorVolume> {
        match self {
            Volume::Vector(v) => Ok(v),
            _ => Err(Error::Format("expected a vector volume".into())),
        }
    }
}

fn header(out: &mut Vec<u8>, dims: [usize; 3], spacing: [f64; 3], dtype: DType) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in spacing {
        out.extend_from_slice(&(s as f32).to_le_bytes());
    }
    out.extend_from_slice(&(dtype as u32).to_le_bytes());
}

pub fn encode_scalar(v: &ScalarVolume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * v.data().len());
    header(&mut out, v.dims(), v.spacing(), DType::F32);
    for x in v.data() {
        out.extend_from_slice(&(*x as f32).to_le_bytes());
    }
    out
}

pub fn encode_mask(v: &ScalarVolume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + v.data().len());
    header(&mut out, v.dims(), v.spacing(), DType::Mask);
    out.extend(v.data().iter().map(|&x| ScalarVolume::is_foreground(x) as u8));
    out
}

pub fn encode_vector(v: &VectorVolume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 12 * v.data().len());
    header(&mut out, v.dims(), v.spacing(), DType::Vec3F32);
    for x in v.data() {
        for c in x.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn f32_at(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("truncated header".into()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dims = [0, 1, 2].map(|a| u32_at(bytes, 8 + 4 * a) as usize);
    let spacing = [0, 1, 2].map(|a| f32_at(bytes, 20 + 4 * a) as f64);
    let dtype = u32_at(bytes, 32);
    let n: usize = dims.iter().product();
    let body = &bytes[HEADER_LEN..];
    let need = match dtype {
        0 => 4 * n,
        1 => 12 * n,
        2 => n,
        other => return Err(Error::Format(format!("unknown dtype {other}"))),
    };
    if body.len() != need {
        return Err(Error::Format(format!("expected {need} data bytes, found {}", body.len())));
    }
    Ok(match dtype {
        0 => {
            let data = (0..n).map(|i| f32_at(body, 4 * i) as f64).collect();
            Volume::Scalar(ScalarVolume::new(dims, spacing, data)?)
        }
        1 => {
            let data = (0..n)
                .map(|i| Vec3::from_fn(|c, _| f32_at(body, 12 * i + 4 * c) as f64))
                .collect();
            Volume::Vector(VectorVolume::new(dims, spacing, data)?)
        }
        _ => {
            let data = body.iter().map(|&b| if b != 0 { 1.0 } else { 0.0 }).collect();
            Volume::Mask(ScalarVolume::new(dims, spacing, data)?)
        }
    })
}

pub fn read(path: impl AsRef<Path>) -> Result<Volume> {
    decode(&fs::read(path)?)
}

pub fn write_scalar(path: impl AsRef<Path>, v: &ScalarVolume) -> Result<()> {
    Ok(fs::write(path, encode_scalar(v))?)
}

pub fn write_mask(path: impl AsRef<Path>, v: &ScalarVolume) -> Result<()> {
    Ok(fs::write(path, encode_mask(v))?)
}

pub fn write_vector(path: impl AsRef<Path>, v: &VectorVolume) -> Result<()> {
    Ok(fs::write(path, encode_vector(v))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let v = ScalarVolume::from_fn([2, 3, 4], |i, j, k| (i + j + k) as f64)
            .with_spacing([1.0, 0.5, 2.0])
            .unwrap();
        let bytes = encode_scalar(&v);
        assert_eq!(&bytes[..4], b"MVOL");
        assert_eq!(u32_at(&bytes, 4), 1);
        assert_eq!([u32_at(&bytes, 8), u32_at(&bytes, 12), u32_at(&bytes, 16)], [2, 3, 4]);
        assert_eq!(f32_at(&bytes, 24), 0.5);
        assert_eq!(u32_at(&bytes, 32), 0);
        assert_eq!(bytes.len(), 36 + 24 * 4);
        // x fastest: voxel (1,0,0) is the second value
        assert_eq!(f32_at(&bytes, 40), 1.0);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let v = ScalarVolume::filled([2, 2, 2], 1.0);
        let mut bytes = encode_mask(&v);
        assert_eq!(decode(&bytes[..bytes.len() - 1]).unwrap_err().to_string(), "expected 8 data bytes, found 7");
        bytes[0] = b'X';
        assert_eq!(decode(&bytes).unwrap_err().to_string(), "bad magic");
    }

    #[test]
    fn vector_data_is_interleaved() {
        let v = VectorVolume::from_fn([2, 1, 1], |i, _, _| Vec3::new(i as f64, 10.0 + i as f64, 20.0));
        let bytes = encode_vector(&v);
        let vals: Vec<f32> = (0..6).map(|i| f32_at(&bytes, 36 + 4 * i)).collect();
        assert_eq!(vals, vec![0.0, 10.0, 20.0, 1.0, 11.0, 20.0]);
        assert_eq!(decode(&bytes).unwrap(), Volume::Vector(v));
    }

    proptest! {
        #[test]
        fn f32_values_round_trip(vals in proptest::collection::vec(-1e6f32..1e6, 12)) {
            let v = ScalarVolume::new([3, 2, 2], [1.0; 3], vals.iter().map(|&x| x as f64).collect()).unwrap();
            prop_assert_eq!(decode(&encode_scalar(&v)).unwrap(), Volume::Scalar(v));
        }
    }
}
