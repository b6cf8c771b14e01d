//! Binary tensor container.
//!
//! ```text
//! "LAML"                      4 bytes magic
//! version                     u32 LE (currently 1)
//! tensor count                u32 LE
//! per tensor:
//!   name length, name         u32 LE, UTF-8 bytes
//!   ndim, dims                u32 LE, ndim × u64 LE
//!   offset                    u64 LE, byte offset into the data section
//! data section                f64 LE values, tensors in manifest order
//! ```
//!
//! Encoding is canonical: equal checkpoints serialize to equal bytes.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LAML";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Checkpoint(format!("tensor {name:?} has shape {shape:?} but {} values", data.len())));
        }
        Ok(Tensor { name, shape, data })
    }

    pub fn vector(name: impl Into<String>, data: Vec<f64>) -> Self {
        let len = data.len();
        Tensor { name: name.into(), shape: vec![len], data }
    }

    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        Tensor { name: name.into(), shape: vec![1], data: vec![value] }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tensor: Tensor) -> &mut Self {
        self.tensors.push(tensor);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        let mut offset = 0u64;
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&offset.to_le_bytes());
            offset += 8 * t.data.len() as u64;
        }
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut manifest = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
                .to_string();
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let offset = r.u64()?;
            manifest.push((name, shape, offset));
        }
        let data = &bytes[r.pos..];
        let mut expected_offset = 0u64;
        let mut tensors = Vec::with_capacity(manifest.len());
        for (name, shape, offset) in manifest {
            if offset != expected_offset {
                return Err(Error::Checkpoint(format!(
                    "tensor {name:?} has offset {offset}, expected {expected_offset}"
                )));
            }
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Checkpoint("tensor too large".into()))?;
            let start = offset as usize;
            let end = start
                .checked_add(len.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)
                .filter(|&e| e <= data.len())
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name:?} runs past end of file")))?;
            let values = data[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            expected_offset = end as u64;
            tensors.push(Tensor { name, shape, data: values });
        }
        if expected_offset as usize != data.len() {
            return Err(Error::Checkpoint("trailing bytes after data section".into()));
        }
        Ok(Checkpoint { tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut ck = Checkpoint::new();
        ck.push(Tensor::scalar("x", 1.5));
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"LAML");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[bytes.len() - 8..], &1.5f64.to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let mut ck = Checkpoint::new();
        ck.push(Tensor::vector("a", vec![1.0, 2.0]));
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(Checkpoint::from_bytes(&long).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(tensors in prop::collection::vec(
            ("[a-z.]{1,8}", prop::collection::vec(1usize..4, 0..3)), 0..5)) {
            let mut ck = Checkpoint::new();
            for (k, (name, shape)) in tensors.into_iter().enumerate() {
                let n: usize = shape.iter().product();
                let data = (0..n).map(|i| (i as f64 + 0.25) * (k as f64 - 1.5)).collect();
                ck.push(Tensor::new(name, shape, data).unwrap());
            }
            let bytes = ck.to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &ck);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
