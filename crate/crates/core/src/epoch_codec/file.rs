//! Epoch code files: `EPC1`, then `n`, `b` and the epoch index as big-endian
//! `u32`, then the bit stream with its trailer byte.

use super::code::EpochCode;
use super::EpochCodecError;
use crate::codec::BitStream;

pub const MAGIC: &[u8; 4] = b"EPC1";

pub fn epoch_code_to_bytes(code: &EpochCode) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + code.stream.len() as usize / 8 + 1);
    out.extend_from_slice(MAGIC);
    for v in [code.n, code.b, code.epoch] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    out.extend_from_slice(&code.stream.to_bytes());
    out
}

pub fn epoch_code_from_bytes(bytes: &[u8]) -> Result<EpochCode, EpochCodecError> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(EpochCodecError::Format("missing EPC1 header".into()));
    }
    let word = |k: usize| u32::from_be_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().expect("4 bytes")) as usize;
    let stream = BitStream::from_bytes(&bytes[16..])
        .map_err(|e| EpochCodecError::Format(e.to_string()))?;
    Ok(EpochCode {
        n: word(0),
        b: word(1),
        epoch: word(2),
        stream,
    })
}
