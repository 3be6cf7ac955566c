//! Feature cache file.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "HVFC1" | version: u8
//! repeated until EOF:
//!   id_len: u32 | id bytes (utf-8)
//!   3 x (rows: u32 | cols: u32 | rows*cols f32, row-major)   time, spectral, cepstral
//!   label bitmask: u8 (bit i = subclass i; 0 = unlabeled)
//! ```

use std::fs;
use std::path::Path;

use super::{FeatureMatrix, MultiChannelFeatures};
use crate::error::{Error, Result};
use crate::labels::LabelVector;

pub const MAGIC: &[u8; 5] = b"HVFC1";
pub const VERSION: u8 = 1;

fn put_matrix(out: &mut Vec<u8>, m: &FeatureMatrix) {
    out.extend_from_slice(&(m.rows as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols as u32).to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(records: &[MultiChannelFeatures]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for r in records {
        out.extend_from_slice(&(r.id.len() as u32).to_le_bytes());
        out.extend_from_slice(r.id.as_bytes());
        for m in r.channels() {
            put_matrix(&mut out, m);
        }
        out.push(r.label.map(|l| l.to_bitmask()).unwrap_or(0));
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::BadCache(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn matrix(&mut self) -> Result<FeatureMatrix> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::BadCache("matrix size overflow".into()))?;
        let data = self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FeatureMatrix { rows, cols, data })
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<MultiChannelFeatures>> {
    if bytes.len() < 6 || &bytes[..5] != MAGIC {
        return Err(Error::BadCache("missing HVFC1 magic".into()));
    }
    if bytes[5] != VERSION {
        return Err(Error::BadCache(format!("unsupported version {}", bytes[5])));
    }
    let mut r = Reader { buf: bytes, pos: 6 };
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let id_len = r.u32()? as usize;
        let id = String::from_utf8(r.take(id_len)?.to_vec())
            .map_err(|e| Error::BadCache(e.to_string()))?;
        let time = r.matrix()?;
        let spectral = r.matrix()?;
        let cepstral = r.matrix()?;
        let mask = r.take(1)?[0];
        let label = if mask == 0 {
            None
        } else {
            Some(LabelVector::from_bitmask(mask)?)
        };
        out.push(MultiChannelFeatures {
            id,
            time,
            spectral,
            cepstral,
            label,
        });
    }
    Ok(out)
}

pub fn write(path: impl AsRef<Path>, records: &[MultiChannelFeatures]) -> Result<()> {
    fs::write(path, encode(records))?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<Vec<MultiChannelFeatures>> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Subclass;
    use proptest::prelude::*;

    fn matrix(rows: usize, cols: usize, seed: f32) -> FeatureMatrix {
        FeatureMatrix {
            rows,
            cols,
            data: (0..rows * cols).map(|i| seed * i as f32 - 3.25).collect(),
        }
    }

    #[test]
    fn rejects_bad_header_and_truncation() {
        assert!(decode(b"HVFC2\x01").is_err());
        assert!(decode(b"HVFC1\x09").is_err());
        let rec = MultiChannelFeatures {
            id: "a".into(),
            time: matrix(2, 5, 0.5),
            spectral: matrix(2, 5, 1.5),
            cepstral: matrix(3, 80, 0.1),
            label: Some(LabelVector::single(Subclass::Panic)),
        };
        let bytes = encode(&[rec]);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert_eq!(decode(&bytes).unwrap().len(), 1);
    }

    proptest! {
        #[test]
        fn round_trip(ids in prop::collection::vec("[a-z0-9/._-]{0,12}", 0..4), rows in 0usize..6, mask in 0u8..=255) {
            let records: Vec<MultiChannelFeatures> = ids
                .iter()
                .enumerate()
                .map(|(k, id)| MultiChannelFeatures {
                    id: id.clone(),
                    time: matrix(rows, 5, k as f32 + 0.1),
                    spectral: matrix(rows, if k % 2 == 0 { 5 } else { 0 }, 2.7),
                    cepstral: matrix(rows + 1, 80, -0.3),
                    label: if mask == 0 { None } else { LabelVector::from_bitmask(mask).ok() },
                })
                .collect();
            prop_assert_eq!(decode(&encode(&records)).unwrap(), records);
        }
    }
}
