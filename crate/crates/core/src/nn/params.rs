use crate::error::{invalid, Result};

/// Flat parameter storage for one network (or any real vector that crosses a
/// server boundary).
///
/// Wire format: a little-endian `u32` element count followed by that many
/// little-endian `f64` values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Number of bytes `write_to` appends.
    pub fn encoded_len(&self) -> usize {
        4 + 8 * self.0.len()
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.reserve(self.encoded_len());
        out.extend_from_slice(&(self.0.len() as u32).to_le_bytes());
        for v in &self.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut out);
        out
    }

    /// Decodes one vector from the front of `buf`, advancing it past the
    /// consumed bytes.
    pub fn read_from(buf: &mut &[u8]) -> Result<Self> {
        let len = read_u32(buf)? as usize;
        let need = len
            .checked_mul(8)
            .ok_or_else(|| invalid("param vector length overflows"))?;
        if buf.len() < need {
            return Err(invalid(format!(
                "param vector truncated: need {need} bytes, have {}",
                buf.len()
            )));
        }
        let (body, rest) = buf.split_at(need);
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        *buf = rest;
        Ok(ParamVector(values))
    }

    /// Decodes a buffer holding exactly one vector.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut buf = bytes;
        let v = Self::read_from(&mut buf)?;
        if !buf.is_empty() {
            return Err(invalid(format!("{} trailing bytes after param vector", buf.len())));
        }
        Ok(v)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl std::ops::Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn read_u32(buf: &mut &[u8]) -> Result<u32> {
    if buf.len() < 4 {
        return Err(invalid("truncated u32"));
    }
    let (head, rest) = buf.split_at(4);
    *buf = rest;
    Ok(u32::from_le_bytes(head.try_into().expect("4 bytes")))
}

pub(crate) fn read_u64(buf: &mut &[u8]) -> Result<u64> {
    if buf.len() < 8 {
        return Err(invalid("truncated u64"));
    }
    let (head, rest) = buf.split_at(8);
    *buf = rest;
    Ok(u64::from_le_bytes(head.try_into().expect("8 bytes")))
}

pub(crate) fn read_f64(buf: &mut &[u8]) -> Result<f64> {
    read_u64(buf).map(f64::from_bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_length_prefixed_little_endian() {
        let bytes = ParamVector::new(vec![1.0]).to_bytes();
        assert_eq!(&bytes[..4], &[1, 0, 0, 0]);
        assert_eq!(&bytes[4..], &1.0f64.to_le_bytes());
    }

    #[test]
    fn truncated_and_trailing_inputs_are_rejected() {
        let bytes = ParamVector::new(vec![1.0, 2.0]).to_bytes();
        assert!(ParamVector::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ParamVector::from_bytes(&extra).is_err());
        assert!(ParamVector::from_bytes(&[]).is_err());
    }

    proptest! {
        #[test]
        fn bytes_round_trip_is_bit_exact(values in proptest::collection::vec(any::<f64>(), 0..64)) {
            let v = ParamVector::new(values);
            let back = ParamVector::from_bytes(&v.to_bytes()).unwrap();
            let a: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = back.iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
