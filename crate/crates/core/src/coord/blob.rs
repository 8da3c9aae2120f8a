use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::nn::{read_u32, ParamVector};

/// Immutable, checksummed sequence of [`ParamVector`]s.
///
/// Wire form: `u32` vector count, then each vector in its own encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlob {
    bytes: Arc<[u8]>,
    checksum: u32,
}

impl ParamBlob {
    pub fn from_vectors(vectors: &[ParamVector]) -> Self {
        let mut bytes = Vec::with_capacity(4 + vectors.iter().map(|v| v.encoded_len()).sum::<usize>());
        bytes.extend_from_slice(&(vectors.len() as u32).to_le_bytes());
        for v in vectors {
            v.write_to(&mut bytes);
        }
        let checksum = crc32fast::hash(&bytes);
        ParamBlob {
            bytes: bytes.into(),
            checksum,
        }
    }

    /// Accepts only bytes that parse as a complete vector sequence.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        decode(bytes)?;
        Ok(ParamBlob {
            bytes: bytes.into(),
            checksum: crc32fast::hash(bytes),
        })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn checksum(&self) -> u32 {
        self.checksum
    }

    /// Whether the bytes still hash to the recorded checksum.
    pub fn verify(&self) -> bool {
        crc32fast::hash(&self.bytes) == self.checksum
    }

    pub fn vectors(&self) -> Result<Vec<ParamVector>> {
        if !self.verify() {
            return Err(invalid("param blob checksum mismatch"));
        }
        decode(&self.bytes)
    }
}

fn decode(bytes: &[u8]) -> Result<Vec<ParamVector>> {
    let mut buf = bytes;
    let n = read_u32(&mut buf)? as usize;
    let mut out = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        out.push(ParamVector::read_from(&mut buf)?);
    }
    if !buf.is_empty() {
        return Err(invalid(format!("{} trailing bytes after param blob", buf.len())));
    }
    Ok(out)
}
