use crate::error::{invalid, Result};
use crate::nn::{read_u32, read_u64};

/// Size of the fixed header: type, version, payload length.
pub const HEADER_LEN: usize = 1 + 8 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    PushParams = 1,
    PullParams = 2,
    PushTrajectory = 3,
    Drain = 4,
}

impl MessageKind {
    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => MessageKind::PushParams,
            2 => MessageKind::PullParams,
            3 => MessageKind::PushTrajectory,
            4 => MessageKind::Drain,
            other => return Err(invalid(format!("unknown message type {other}"))),
        })
    }
}

/// Framed server message: 1-byte type, 8-byte LE version, 4-byte LE payload
/// length, payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub version: u64,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes one message from the front of `buf`, advancing it.
    pub fn decode(buf: &mut &[u8]) -> Result<Self> {
        let (&kind, rest) = buf.split_first().ok_or_else(|| invalid("empty message"))?;
        *buf = rest;
        let kind = MessageKind::from_byte(kind)?;
        let version = read_u64(buf)?;
        let len = read_u32(buf)? as usize;
        if buf.len() < len {
            return Err(invalid(format!("message payload truncated: need {len}, have {}", buf.len())));
        }
        let (payload, rest) = buf.split_at(len);
        *buf = rest;
        Ok(Message {
            kind,
            version,
            payload: payload.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coord::ParamBlob;
    use crate::nn::ParamVector;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let m = Message {
            kind: MessageKind::PushParams,
            version: 0x0102,
            payload: vec![9, 8, 7],
        };
        let b = m.encode();
        assert_eq!(b.len(), HEADER_LEN + 3);
        assert_eq!(b[0], 1);
        assert_eq!(&b[1..9], &[2, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[9..13], &[3, 0, 0, 0]);
        let mut bad = b.clone();
        bad[0] = 9;
        assert!(Message::decode(&mut bad.as_slice()).is_err());
        assert!(Message::decode(&mut &b[..b.len() - 1]).is_err());
    }

    #[test]
    fn carries_a_param_blob() {
        let blob = ParamBlob::from_vectors(&[ParamVector::new(vec![1.5, -2.0])]);
        let m = Message {
            kind: MessageKind::PushParams,
            version: 3,
            payload: blob.as_bytes().to_vec(),
        };
        let back = Message::decode(&mut m.encode().as_slice()).unwrap();
        assert_eq!(ParamBlob::from_bytes(&back.payload).unwrap(), blob);
    }

    proptest! {
        #[test]
        fn stream_of_messages_round_trips(msgs in proptest::collection::vec((1u8..=4, any::<u64>(), proptest::collection::vec(any::<u8>(), 0..32)), 0..6)) {
            let msgs: Vec<Message> = msgs
                .into_iter()
                .map(|(k, v, p)| Message { kind: MessageKind::from_byte(k).unwrap(), version: v, payload: p })
                .collect();
            let bytes: Vec<u8> = msgs.iter().flat_map(|m| m.encode()).collect();
            let mut buf = bytes.as_slice();
            for m in &msgs {
                prop_assert_eq!(&Message::decode(&mut buf).unwrap(), m);
            }
            prop_assert!(buf.is_empty());
        }
    }
}
