//! MSB-first bit stream with exact lengths.
//!
//! On disk a stream is its bits packed MSB-first into bytes, zero padded,
//! followed by one trailer byte holding `len mod 8`.

use num_bigint::BigUint;
use num_traits::Zero;

use super::CodecError;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitStream {
    bytes: Vec<u8>,
    len: u64,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Length in bits.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push_bit(&mut self, bit: bool) {
        let byte = (self.len / 8) as usize;
        if byte == self.bytes.len() {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[byte] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub fn bit(&self, pos: u64) -> Option<bool> {
        if pos >= self.len {
            return None;
        }
        Some(self.bytes[(pos / 8) as usize] & (0x80 >> (pos % 8)) != 0)
    }

    /// Write `value` in exactly `width` bits, big-endian.
    pub fn write_u64(&mut self, value: u64, width: u32) -> Result<(), CodecError> {
        if width < 64 && value >> width != 0 {
            return Err(CodecError::ValueTooWide {
                bits: 64 - value.leading_zeros() as u64,
                width: width as u64,
            });
        }
        for i in (0..width).rev() {
            self.push_bit(i < 64 && (value >> i) & 1 == 1);
        }
        Ok(())
    }

    /// Write a big integer in exactly `width` bits, big-endian.
    pub fn write_big(&mut self, value: &BigUint, width: u64) -> Result<(), CodecError> {
        if value.bits() > width {
            return Err(CodecError::ValueTooWide {
                bits: value.bits(),
                width,
            });
        }
        for i in (0..width).rev() {
            self.push_bit(value.bit(i));
        }
        Ok(())
    }

    pub fn append(&mut self, other: &BitStream) {
        for pos in 0..other.len {
            self.push_bit(other.bit(pos).expect("in range"));
        }
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader {
            stream: self,
            pos: 0,
        }
    }

    /// Flip one bit in place (used to exercise corruption handling).
    pub fn flip(&mut self, pos: u64) {
        assert!(pos < self.len);
        self.bytes[(pos / 8) as usize] ^= 0x80 >> (pos % 8);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.bytes.clone();
        out.push((self.len % 8) as u8);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let (&trailer, data) = bytes.split_last().ok_or(CodecError::BadTrailer)?;
        if trailer >= 8 || (trailer != 0 && data.is_empty()) {
            return Err(CodecError::BadTrailer);
        }
        let len = if trailer == 0 {
            data.len() as u64 * 8
        } else {
            (data.len() as u64 - 1) * 8 + trailer as u64
        };
        if trailer != 0 {
            let pad_mask = 0xffu8 >> trailer;
            if data[data.len() - 1] & pad_mask != 0 {
                return Err(CodecError::BadTrailer);
            }
        }
        Ok(BitStream {
            bytes: data.to_vec(),
            len,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BitReader<'a> {
    stream: &'a BitStream,
    pos: u64,
}

impl BitReader<'_> {
    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.stream.len - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool, CodecError> {
        let b = self
            .stream
            .bit(self.pos)
            .ok_or(CodecError::EndOfStream { at: self.pos })?;
        self.pos += 1;
        Ok(b)
    }

    pub fn read_u64(&mut self, width: u32) -> Result<u64, CodecError> {
        if width > 64 {
            return Err(CodecError::ValueTooWide {
                bits: width as u64,
                width: 64,
            });
        }
        if self.remaining() < width as u64 {
            return Err(CodecError::EndOfStream { at: self.pos });
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_big(&mut self, width: u64) -> Result<BigUint, CodecError> {
        if self.remaining() < width {
            return Err(CodecError::EndOfStream { at: self.pos });
        }
        let mut v = BigUint::zero();
        for i in (0..width).rev() {
            if self.read_bit()? {
                v.set_bit(i, true);
            }
        }
        Ok(v)
    }
}
