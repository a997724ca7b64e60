//! Checkpoint files: `d` and `s` as little-endian `u32`, then `d` raw
//! mantissas as little-endian `i64`.

use super::EngineError;
use crate::numerics::FixedVector;

pub fn checkpoint_to_bytes(w: &FixedVector, scale: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * w.len());
    out.extend_from_slice(&(w.len() as u32).to_le_bytes());
    out.extend_from_slice(&scale.to_le_bytes());
    for r in w.raw() {
        out.extend_from_slice(&r.to_le_bytes());
    }
    out
}

/// Returns the weights and the scale `s`.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(FixedVector, u32), EngineError> {
    let bad = |m: &str| EngineError::Format(format!("checkpoint: {m}"));
    if bytes.len() < 8 {
        return Err(bad("shorter than the header"));
    }
    let d = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let s = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let body = &bytes[8..];
    if body.len() != 8 * d {
        return Err(bad(&format!("expected {} payload bytes, found {}", 8 * d, body.len())));
    }
    let raw = body
        .chunks_exact(8)
        .map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes")));
    Ok((FixedVector::from_raw(raw), s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let w = FixedVector::from_raw([1, -2, i64::MAX, i64::MIN]);
        let bytes = checkpoint_to_bytes(&w, 16);
        assert_eq!(&bytes[..8], &[4, 0, 0, 0, 16, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &1i64.to_le_bytes());
        assert_eq!(checkpoint_from_bytes(&bytes).unwrap(), (w, 16));
        assert!(checkpoint_from_bytes(&bytes[..20]).is_err());
        assert!(checkpoint_from_bytes(&[1, 0]).is_err());
    }
}
