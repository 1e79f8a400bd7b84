//! Binary container for synthetic mixture datasets.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GMMD"
//! 4       4     version (u32 LE, currently 1)
//! 8       4     d (u32 LE)
//! 12      8     labeled count n (u64 LE)
//! 20      8     unlabeled count m (u64 LE)
//! 28      ...   n records of (y as f64, x as d×f64), then m records of x
//! ```
//! All floats are little-endian IEEE-754 binary64.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gmm::{Dataset, Example, Sign};

pub const MAGIC: &[u8; 4] = b"GMMD";
pub const VERSION: u32 = 1;
const HEADER: usize = 28;

pub fn encode_container(ds: &Dataset<Sign>) -> Vec<u8> {
    let d = ds.d;
    let mut out = Vec::with_capacity(HEADER + 8 * (ds.labeled.len() * (d + 1) + ds.unlabeled.len() * d));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(ds.labeled.len() as u64).to_le_bytes());
    out.extend_from_slice(&(ds.unlabeled.len() as u64).to_le_bytes());
    for e in &ds.labeled {
        out.extend_from_slice(&e.y.value().to_le_bytes());
        e.x.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    for x in &ds.unlabeled {
        x.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    out
}

fn err(offset: usize, reason: impl Into<String>) -> Error {
    Error::ContainerParse {
        offset,
        reason: reason.into(),
    }
}

pub fn decode_container(bytes: &[u8]) -> Result<Dataset<Sign>> {
    if bytes.len() < HEADER {
        return Err(err(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(err(0, "bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(err(4, format!("unsupported version {version}")));
    }
    let d = u32_at(8) as usize;
    if d == 0 {
        return Err(err(8, "d must be >= 1"));
    }
    let n = u64_at(12) as usize;
    let m = u64_at(20) as usize;
    let floats = n
        .checked_mul(d + 1)
        .and_then(|a| m.checked_mul(d).and_then(|b| a.checked_add(b)))
        .ok_or_else(|| err(12, "record counts overflow"))?;
    let need = floats
        .checked_mul(8)
        .and_then(|b| b.checked_add(HEADER))
        .ok_or_else(|| err(12, "record counts overflow"))?;
    if bytes.len() != need {
        let at = bytes.len().min(need);
        return Err(err(at, format!("expected {need} bytes, found {}", bytes.len())));
    }
    let f = |i: usize| {
        let o = HEADER + 8 * i;
        f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
    };
    let mut labeled = Vec::with_capacity(n);
    for r in 0..n {
        let base = r * (d + 1);
        let y = match f(base) {
            v if v == 1.0 => Sign::Pos,
            v if v == -1.0 => Sign::Neg,
            v => return Err(err(HEADER + 8 * base, format!("label must be ±1, got {v}"))),
        };
        labeled.push(Example {
            x: (1..=d).map(|k| f(base + k)).collect(),
            y,
        });
    }
    let start = n * (d + 1);
    let unlabeled = (0..m)
        .map(|r| (0..d).map(|k| f(start + r * d + k)).collect())
        .collect();
    Dataset::new(labeled, unlabeled, d)
}

pub fn write_container(path: impl AsRef<Path>, ds: &Dataset<Sign>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_container(ds)).map_err(|e| Error::io(path, e))
}

pub fn read_container(path: impl AsRef<Path>) -> Result<Dataset<Sign>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn arb_dataset() -> impl Strategy<Value = Dataset<Sign>> {
        (1usize..6).prop_flat_map(|d| {
            let lab = prop::collection::vec(
                (prop::collection::vec(-1e6f64..1e6, d), any::<bool>()),
                0..5,
            );
            let unl = prop::collection::vec(prop::collection::vec(-1e6f64..1e6, d), 0..5);
            (lab, unl).prop_map(move |(lab, unl)| {
                let labeled = lab
                    .into_iter()
                    .map(|(x, p)| Example { x, y: if p { Sign::Pos } else { Sign::Neg } })
                    .collect();
                Dataset::new(labeled, unl, d).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn roundtrip(ds in arb_dataset()) {
            prop_assert_eq!(decode_container(&encode_container(&ds)).unwrap(), ds);
        }
    }

    #[test]
    fn header_layout() {
        let ds = Dataset::new(vec![Example { x: vec![0.5], y: Sign::Neg }], vec![vec![2.0]], 1).unwrap();
        let b = encode_container(&ds);
        assert_eq!(&b[..4], b"GMMD");
        assert_eq!(b.len(), 28 + 8 * 3);
        assert_eq!(f64::from_le_bytes(b[28..36].try_into().unwrap()), -1.0);
        let mut cut = b.clone();
        cut.pop();
        assert!(matches!(decode_container(&cut), Err(Error::ContainerParse { .. })));
        let mut bad = b;
        bad[28..36].copy_from_slice(&0.5f64.to_le_bytes());
        assert!(matches!(decode_container(&bad), Err(Error::ContainerParse { offset: 28, .. })));
    }
}
