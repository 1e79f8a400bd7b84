//! IDX tensors as used by the MNIST distribution.
//!
//! Layout (all integers big-endian): two zero bytes, a type code, the rank
//! `r`, then `r` dimension sizes as `u32`, then the row-major payload.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    U8(Vec<u8>),
    I8(Vec<i8>),
    I16(Vec<i16>),
    I32(Vec<i32>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl IdxData {
    pub fn type_code(&self) -> u8 {
        match self {
            IdxData::U8(_) => 0x08,
            IdxData::I8(_) => 0x09,
            IdxData::I16(_) => 0x0B,
            IdxData::I32(_) => 0x0C,
            IdxData::F32(_) => 0x0D,
            IdxData::F64(_) => 0x0E,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            IdxData::U8(v) => v.len(),
            IdxData::I8(v) => v.len(),
            IdxData::I16(v) => v.len(),
            IdxData::I32(v) => v.len(),
            IdxData::F32(v) => v.len(),
            IdxData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn element_width(code: u8) -> Option<usize> {
    match code {
        0x08 | 0x09 => Some(1),
        0x0B => Some(2),
        0x0C | 0x0D => Some(4),
        0x0E => Some(8),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: IdxData,
}

impl IdxTensor {
    pub fn new(dims: Vec<usize>, data: IdxData) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::domain(format!(
                "dims {dims:?} need {n} elements, buffer has {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Elements as `f64`; unsigned bytes are divided by 255 when `scale_bytes`.
    pub fn to_f64(&self, scale_bytes: bool) -> Vec<f64> {
        match &self.data {
            IdxData::U8(v) => {
                let s = if scale_bytes { 1.0 / 255.0 } else { 1.0 };
                v.iter().map(|b| *b as f64 * s).collect()
            }
            IdxData::I8(v) => v.iter().map(|b| *b as f64).collect(),
            IdxData::I16(v) => v.iter().map(|b| *b as f64).collect(),
            IdxData::I32(v) => v.iter().map(|b| *b as f64).collect(),
            IdxData::F32(v) => v.iter().map(|b| *b as f64).collect(),
            IdxData::F64(v) => v.clone(),
        }
    }

    /// Splits along the first axis into flat rows (e.g. one vector per image).
    pub fn rows_f64(&self, scale_bytes: bool) -> Vec<Vec<f64>> {
        let flat = self.to_f64(scale_bytes);
        let row: usize = self.dims.iter().skip(1).product();
        if row == 0 {
            return vec![Vec::new(); self.dims.first().copied().unwrap_or(0)];
        }
        flat.chunks(row).map(<[f64]>::to_vec).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![0, 0, self.data.type_code(), self.dims.len() as u8];
        for d in &self.dims {
            out.extend_from_slice(&(*d as u32).to_be_bytes());
        }
        match &self.data {
            IdxData::U8(v) => out.extend_from_slice(v),
            IdxData::I8(v) => out.extend(v.iter().map(|b| *b as u8)),
            IdxData::I16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
            IdxData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
            IdxData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
            IdxData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        }
        out
    }
}

fn err(offset: usize, reason: impl Into<String>) -> Error {
    Error::IdxParse {
        offset,
        reason: reason.into(),
    }
}

/// Type code and dims from the header; also returns the header length.
pub fn parse_header(bytes: &[u8]) -> Result<(u8, Vec<usize>, usize)> {
    if bytes.len() < 4 {
        return Err(err(bytes.len(), "truncated magic number"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(err(0, format!("bad magic {:02x}{:02x}, expected 0000", bytes[0], bytes[1])));
    }
    let code = bytes[2];
    if element_width(code).is_none() {
        return Err(err(2, format!("unsupported type code 0x{code:02x}")));
    }
    let rank = bytes[3] as usize;
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(err(bytes.len(), format!("truncated header: rank {rank} needs {header} bytes")));
    }
    let dims = (0..rank)
        .map(|i| {
            let o = 4 + 4 * i;
            u32::from_be_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
        })
        .collect();
    Ok((code, dims, header))
}

pub fn decode_idx(bytes: &[u8]) -> Result<IdxTensor> {
    let (code, dims, header) = parse_header(bytes)?;
    let width = element_width(code).expect("validated in parse_header");
    let count = dims
        .iter()
        .try_fold(1usize, |a, d| a.checked_mul(*d))
        .ok_or_else(|| err(4, "dimension product overflows"))?;
    let need = count
        .checked_mul(width)
        .and_then(|n| n.checked_add(header))
        .ok_or_else(|| err(4, "payload size overflows"))?;
    if bytes.len() < need {
        // first byte of the first incomplete element
        let whole = (bytes.len() - header) / width;
        return Err(err(
            header + whole * width,
            format!("truncated data: expected {count} elements, found {whole}"),
        ));
    }
    if bytes.len() > need {
        return Err(err(need, format!("{} trailing bytes", bytes.len() - need)));
    }
    let p = &bytes[header..need];
    let data = match code {
        0x08 => IdxData::U8(p.to_vec()),
        0x09 => IdxData::I8(p.iter().map(|b| *b as i8).collect()),
        0x0B => IdxData::I16(p.chunks_exact(2).map(|c| i16::from_be_bytes([c[0], c[1]])).collect()),
        0x0C => IdxData::I32(p.chunks_exact(4).map(|c| i32::from_be_bytes(c.try_into().unwrap())).collect()),
        0x0D => IdxData::F32(p.chunks_exact(4).map(|c| f32::from_be_bytes(c.try_into().unwrap())).collect()),
        0x0E => IdxData::F64(p.chunks_exact(8).map(|c| f64::from_be_bytes(c.try_into().unwrap())).collect()),
        _ => unreachable!(),
    };
    IdxTensor::new(dims, data)
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxTensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_idx(&bytes)
}

pub fn write_idx(path: impl AsRef<Path>, t: &IdxTensor) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, t.encode()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_train_images_header() {
        let mut h = vec![0x00, 0x00, 0x08, 0x03];
        for d in [60000u32, 28, 28] {
            h.extend_from_slice(&d.to_be_bytes());
        }
        assert_eq!(&h[..4], &[0x00, 0x00, 0x08, 0x03]);
        let (code, dims, len) = parse_header(&h).unwrap();
        assert_eq!((code, dims, len), (0x08, vec![60000, 28, 28], 16));
        // header alone: payload missing at byte 16
        match decode_idx(&h) {
            Err(Error::IdxParse { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn roundtrip_small_u8_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.idx");
        let t = IdxTensor::new(vec![2, 2], IdxData::U8(vec![0, 51, 255, 7])).unwrap();
        write_idx(&path, &t).unwrap();
        let back = read_idx(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.rows_f64(true)[0], vec![0.0, 0.2]);
    }

    #[test]
    fn roundtrip_wide_types() {
        for data in [
            IdxData::I16(vec![-3, 300]),
            IdxData::I32(vec![-70000, 5]),
            IdxData::F32(vec![1.5, -0.25]),
            IdxData::F64(vec![1e-300, 2.0]),
            IdxData::I8(vec![-1, 1]),
        ] {
            let t = IdxTensor::new(vec![2], data).unwrap();
            assert_eq!(decode_idx(&t.encode()).unwrap(), t);
        }
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let t = IdxTensor::new(vec![3], IdxData::I32(vec![1, 2, 3])).unwrap();
        let mut b = t.encode();
        b.truncate(b.len() - 2);
        match decode_idx(&b) {
            Err(Error::IdxParse { offset, .. }) => assert_eq!(offset, 8 + 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_type() {
        assert!(matches!(decode_idx(&[1, 0, 8, 1, 0, 0, 0, 0]), Err(Error::IdxParse { offset: 0, .. })));
        assert!(matches!(decode_idx(&[0, 0, 0x0A, 1, 0, 0, 0, 0]), Err(Error::IdxParse { offset: 2, .. })));
        assert!(matches!(decode_idx(&[0, 0, 8]), Err(Error::IdxParse { offset: 3, .. })));
        assert!(matches!(decode_idx(&[0, 0, 8, 2, 0, 0, 0, 1]), Err(Error::IdxParse { offset: 8, .. })));
    }
}
