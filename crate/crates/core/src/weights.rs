//! BCNW v1 tensor files and the [`WeightStore`] they decode into.
//!
//! Layout, little-endian, no padding:
//!
//! ```text
//! "BCNW" | u32 version (=1) | u32 count
//! count × ( u16 name_len | name (UTF-8) | u8 rank | rank × u32 dim | Π dims × f32 )
//! ```

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use crate::error::FormatError;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"BCNW";
pub const VERSION: u32 = 1;
pub const MAX_NAME_LEN: usize = 255;

/// Named tensors in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    entries: IndexMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), FormatError> {
        let name = name.into();
        if name.len() > MAX_NAME_LEN {
            return Err(FormatError::NameTooLong { name });
        }
        if self.entries.contains_key(&name) {
            return Err(FormatError::DuplicateName { name });
        }
        self.entries.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor, FormatError> {
        self.get(name).ok_or_else(|| FormatError::MissingTensor {
            name: name.to_string(),
        })
    }

    /// Like [`require`](Self::require), also checking dims.
    pub fn require_dims(&self, name: &str, dims: &[usize]) -> Result<&Tensor, FormatError> {
        let t = self.require(name)?;
        if t.dims() != dims {
            return Err(FormatError::ShapeMismatch {
                name: name.to_string(),
                expected: dims.to_vec(),
                found: t.dims().to_vec(),
            });
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// SHA-256 over the encoded file bytes.
    pub fn checksum(&self) -> String {
        hex_digest(&self.encode())
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload: usize = self
            .entries
            .iter()
            .map(|(k, t)| 2 + k.len() + 1 + 4 * t.rank() + 4 * t.len())
            .sum();
        let mut out = Vec::with_capacity(12 + payload);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.rank() as u8);
            for &d in t.dims() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        let header = "<header>";
        let magic: [u8; 4] = r.take(4, header)?.try_into().unwrap();
        if magic != MAGIC {
            return Err(FormatError::BadMagic { found: magic });
        }
        let version = r.u32(header)?;
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion { found: version });
        }
        let count = r.u32(header)?;
        let mut store = WeightStore::new();
        for index in 0..count {
            let placeholder = format!("<tensor #{index}>");
            let name_len = r.u16(&placeholder)? as usize;
            let name_bytes = r.take(name_len, &placeholder)?;
            let name = std::str::from_utf8(name_bytes)
                .map_err(|_| FormatError::InvalidName {
                    bytes: name_bytes.to_vec(),
                })?
                .to_string();
            if name.len() > MAX_NAME_LEN {
                return Err(FormatError::NameTooLong { name });
            }
            let rank = r.u8(&name)?;
            if !(1..=4).contains(&rank) {
                return Err(FormatError::InvalidRank { name, rank });
            }
            let mut dims = Vec::with_capacity(rank as usize);
            for _ in 0..rank {
                dims.push(r.u32(&name)? as usize);
            }
            if dims.contains(&0) {
                return Err(FormatError::ZeroDim { name });
            }
            let count = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|c| c.checked_mul(4))
                .ok_or_else(|| FormatError::Truncated {
                    tensor: name.clone(),
                })?;
            let raw = r.take(count, &name)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let tensor = Tensor::new(dims, data).expect("dims validated above");
            store.insert(name, tensor)?;
        }
        if r.pos != bytes.len() {
            return Err(FormatError::TrailingBytes {
                count: bytes.len() - r.pos,
            });
        }
        Ok(store)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, tensor: &str) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| FormatError::Truncated {
                tensor: tensor.to_string(),
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, tensor: &str) -> Result<u8, FormatError> {
        Ok(self.take(1, tensor)?[0])
    }

    fn u16(&mut self, tensor: &str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(
            self.take(2, tensor)?.try_into().unwrap(),
        ))
    }

    fn u32(&mut self, tensor: &str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(
            self.take(4, tensor)?.try_into().unwrap(),
        ))
    }
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    WeightStore::decode(&bytes)
}

pub fn save_weights(path: impl AsRef<Path>, store: &WeightStore) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, store.encode()).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Short SHA-256 of a tensor's little-endian data bytes.
pub fn tensor_checksum(t: &Tensor) -> String {
    let mut hasher = Sha256::new();
    for v in t.data() {
        hasher.update(v.to_le_bytes());
    }
    hex_prefix(&hasher.finalize())
}

fn hex_digest(bytes: &[u8]) -> String {
    hex_prefix(&Sha256::digest(bytes))
}

fn hex_prefix(digest: &[u8]) -> String {
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
