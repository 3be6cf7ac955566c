//! HVCK1 checkpoint container shared by every model kind.
//!
//! ```text
//! "HVCK1" | version: u8
//! meta_len: u32 | meta: utf-8 `key=value` lines
//! repeated until EOF:
//!   name_len: u32 | name bytes | rank: u32 | rank x dim: u32 | f64 data (LE, row-major)
//! ```
//!
//! The meta block always carries a `kind` key naming the model family.

use std::fs;
use std::path::Path;

use super::array::Array;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"HVCK1";
pub const VERSION: u8 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::BadCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub arrays: Vec<(String, Array)>,
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Self {
            meta: vec![("kind".into(), kind.into())],
            arrays: Vec::new(),
        }
    }

    pub fn kind(&self) -> Option<&str> {
        self.get("kind")
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        match self.kind() {
            Some(k) if k == kind => Ok(()),
            other => Err(Error::BadCheckpoint(format!(
                "expected kind `{kind}`, found {other:?}"
            ))),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.meta.push((key.into(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::BadCheckpoint(format!("missing meta key `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::BadCheckpoint(format!("bad value `{raw}` for `{key}`")))
    }

    pub fn push(&mut self, name: impl Into<String>, array: Array) {
        self.arrays.push((name.into(), array));
    }

    pub fn array(&self, name: &str) -> Result<&Array> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a)
            .ok_or_else(|| Error::BadCheckpoint(format!("missing array `{name}`")))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        let meta: String = self
            .meta
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        for (name, a) in &self.arrays {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for &d in &a.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 || &bytes[..5] != MAGIC {
            return Err(Error::BadCheckpoint("missing HVCK1 magic".into()));
        }
        if bytes[5] != VERSION {
            return Err(Error::BadCheckpoint(format!(
                "unsupported version {}",
                bytes[5]
            )));
        }
        let mut r = Reader { bytes, pos: 6 };
        let meta_len = r.u32()?;
        let meta_text = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|e| Error::BadCheckpoint(e.to_string()))?;
        let meta = meta_text
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::BadCheckpoint(format!("bad meta line `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut arrays = Vec::new();
        while !r.is_done() {
            let name_len = r.u32()?;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|e| Error::BadCheckpoint(e.to_string()))?;
            let rank = r.u32()?;
            let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let data = r
                .take(n * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push((name, Array { shape, data }));
        }
        Ok(Self { meta, arrays })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}
