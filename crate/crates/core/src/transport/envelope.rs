use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const WIRE_VERSION: u8 = 1;
/// Receiver id meaning "the server" on uplink and "everyone" on downlink.
pub const SERVER_ID: u16 = 0xFFFF;
pub const HEADER_LEN: usize = 14;
pub const MAX_PAYLOAD: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum MsgType {
    SetupParams = 1,
    PkShare = 2,
    SecretShare = 3,
    CpkBcast = 4,
    CtUpload = 5,
    AggBcast = 6,
    SelectCoeffs = 7,
    DecShare = 8,
    RoundResult = 9,
    NewUserReq = 10,
    AuxShare = 11,
    Register = 12,
}

impl TryFrom<u8> for MsgType {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        use MsgType::*;
        Ok(match v {
            1 => SetupParams,
            2 => PkShare,
            3 => SecretShare,
            4 => CpkBcast,
            5 => CtUpload,
            6 => AggBcast,
            7 => SelectCoeffs,
            8 => DecShare,
            9 => RoundResult,
            10 => NewUserReq,
            11 => AuxShare,
            12 => Register,
            other => return Err(Error::Decode(format!("unknown message type {other}"))),
        })
    }
}

/// Fixed 14-byte little-endian header followed by the payload:
///
/// ```text
/// version:u8 | msg_type:u8 | round:u32 | sender:u16 | receiver:u16 | payload_len:u32
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub version: u8,
    pub msg_type: MsgType,
    pub round: u32,
    pub sender: u16,
    pub receiver: u16,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(msg_type: MsgType, round: u32, sender: u16, receiver: u16, payload: Vec<u8>) -> Self {
        Self {
            version: WIRE_VERSION,
            msg_type,
            round,
            sender,
            receiver,
            payload,
        }
    }

    pub fn is_broadcast(&self) -> bool {
        self.sender == SERVER_ID && self.receiver == SERVER_ID
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn header_bytes(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0] = self.version;
        h[1] = self.msg_type as u8;
        h[2..6].copy_from_slice(&self.round.to_le_bytes());
        h[6..8].copy_from_slice(&self.sender.to_le_bytes());
        h[8..10].copy_from_slice(&self.receiver.to_le_bytes());
        h[10..14].copy_from_slice(&(self.payload.len() as u32).to_le_bytes());
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&self.header_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parse a header, returning the envelope skeleton and the announced
    /// payload length.
    fn parse_header(h: &[u8; HEADER_LEN]) -> Result<(Self, usize)> {
        if h[0] != WIRE_VERSION {
            return Err(Error::Decode(format!("unsupported wire version {}", h[0])));
        }
        let msg_type = MsgType::try_from(h[1])?;
        let round = u32::from_le_bytes(h[2..6].try_into().unwrap());
        let sender = u16::from_le_bytes(h[6..8].try_into().unwrap());
        let receiver = u16::from_le_bytes(h[8..10].try_into().unwrap());
        let len = u32::from_le_bytes(h[10..14].try_into().unwrap()) as usize;
        if len > MAX_PAYLOAD {
            return Err(Error::Decode(format!("payload length {len} exceeds limit")));
        }
        Ok((Self::new(msg_type, round, sender, receiver, Vec::new()), len))
    }

    /// Decode exactly one envelope; trailing bytes are an error.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Decode("truncated header".into()));
        }
        let (mut env, len) = Self::parse_header(bytes[..HEADER_LEN].try_into().unwrap())?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != len {
            return Err(Error::Decode(format!(
                "payload length {} does not match header {len}",
                body.len()
            )));
        }
        env.payload = body.to_vec();
        Ok(env)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.header_bytes())?;
        w.write_all(&self.payload)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut h = [0u8; HEADER_LEN];
        r.read_exact(&mut h)?;
        let (mut env, len) = Self::parse_header(&h)?;
        env.payload = vec![0; len];
        r.read_exact(&mut env.payload)?;
        Ok(env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let env = Envelope::new(MsgType::CtUpload, 0x01020304, 7, SERVER_ID, vec![0xAA, 0xBB]);
        let b = env.to_bytes();
        assert_eq!(
            b,
            vec![1, 5, 4, 3, 2, 1, 7, 0, 0xFF, 0xFF, 2, 0, 0, 0, 0xAA, 0xBB]
        );
        assert_eq!(Envelope::from_bytes(&b).unwrap(), env);
    }

    #[test]
    fn rejects_bad_frames() {
        let env = Envelope::new(MsgType::PkShare, 1, 2, SERVER_ID, vec![1, 2, 3]);
        let b = env.to_bytes();
        assert!(Envelope::from_bytes(&b[..10]).is_err());
        assert!(Envelope::from_bytes(&b[..b.len() - 1]).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(Envelope::from_bytes(&extra).is_err());
        let mut bad_type = b.clone();
        bad_type[1] = 99;
        assert!(Envelope::from_bytes(&bad_type).is_err());
        let mut bad_version = b.clone();
        bad_version[0] = 2;
        assert!(Envelope::from_bytes(&bad_version).is_err());
        let mut huge = b;
        huge[10..14].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(Envelope::read_from(&mut huge.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn any_envelope_round_trips(
            t in 1u8..=12, round: u32, sender: u16, receiver: u16,
            payload in proptest::collection::vec(any::<u8>(), 0..256)
        ) {
            let env = Envelope::new(MsgType::try_from(t).unwrap(), round, sender, receiver, payload);
            let bytes = env.to_bytes();
            prop_assert_eq!(Envelope::from_bytes(&bytes).unwrap(), env.clone());
            prop_assert_eq!(Envelope::read_from(&mut bytes.as_slice()).unwrap(), env);
        }

        #[test]
        fn fuzzed_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = Envelope::from_bytes(&bytes);
            let _ = Envelope::read_from(&mut bytes.as_slice());
        }
    }
}
