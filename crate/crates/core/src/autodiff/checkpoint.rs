//! Binary container of named tensors plus a JSON manifest.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "FLOWSSM\0"
//! version    u32
//! manifest   u64 length + UTF-8 JSON
//! count      u32
//! tensor*    u32 name length, name, u32 rank, u64 dims[rank], f64 data[prod(dims)]
//! ```

use std::path::Path;

use thiserror::Error;

use super::Tensor;

pub const MAGIC: &[u8; 8] = b"FLOWSSM\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic header)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("invalid manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("invalid tensor record `{0}`")]
    BadTensor(String),
    #[error("missing tensor `{0}`")]
    Missing(String),
}

#[derive(Clone, Debug, Default)]
pub struct TensorArchive {
    pub manifest: serde_json::Value,
    tensors: Vec<(String, Tensor)>,
}

impl TensorArchive {
    pub fn new(manifest: serde_json::Value) -> Self {
        Self {
            manifest,
            tensors: Vec::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        match self.tensors.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = tensor,
            None => self.tensors.push((name, tensor)),
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, CheckpointError> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| CheckpointError::Missing(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = serde_json::to_vec(&self.manifest).expect("json value serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let mlen = r.u64()? as usize;
        let manifest = serde_json::from_slice(r.take(mlen)?)?;
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec())
                .map_err(|_| CheckpointError::BadTensor("<non-utf8>".into()))?;
            let rank = r.u32()? as usize;
            if rank > 2 {
                return Err(CheckpointError::BadTensor(name));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let t = Tensor::new(shape, data).map_err(|_| CheckpointError::BadTensor(name.clone()))?;
            tensors.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::BadTensor("<trailing bytes>".into()));
        }
        Ok(Self { manifest, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        crate::fsutil::write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn archive_round_trip() {
        let mut a = TensorArchive::new(serde_json::json!({"d": 4}));
        a.insert("w", Tensor::matrix(2, 2, vec![1.0, -2.0, 3.5, f64::MIN_POSITIVE]).unwrap());
        a.insert("s", Tensor::scalar(0.25));
        let b = TensorArchive::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(b.manifest["d"], 4);
        assert_eq!(b.get("w").unwrap(), a.get("w").unwrap());
        assert_eq!(b.get("s").unwrap().shape(), &[] as &[usize]);
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let mut bytes = TensorArchive::new(serde_json::json!({})).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(TensorArchive::from_bytes(&bytes), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn truncation_is_detected() {
        let mut a = TensorArchive::new(serde_json::json!({}));
        a.insert("w", Tensor::vector(vec![1.0, 2.0]));
        let bytes = a.to_bytes();
        assert!(matches!(
            TensorArchive::from_bytes(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::Truncated)
        ));
    }
}
