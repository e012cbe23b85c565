//! Little-endian bit packing: bit `i` of a stream lives at
//! `bytes[i / 8]` bit position `i % 8`; fields are written LSB-first.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An immutable packed bit stream with an exact bit length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitStream {
    bytes: Vec<u8>,
    len_bits: usize,
}

impl BitStream {
    pub fn empty() -> Self {
        BitStream {
            bytes: Vec::new(),
            len_bits: 0,
        }
    }

    pub fn len_bits(&self) -> usize {
        self.len_bits
    }

    /// Packed bytes; the last byte is zero-padded.
    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn from_bytes(bytes: Vec<u8>, len_bits: usize) -> Result<Self> {
        if bytes.len() != len_bits.div_ceil(8) {
            return Err(Error::SparseDecode {
                bit_offset: 0,
                reason: format!(
                    "stream of {len_bits} bits needs {} bytes, got {}",
                    len_bits.div_ceil(8),
                    bytes.len()
                ),
            });
        }
        Ok(BitStream { bytes, len_bits })
    }
}

#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len_bits: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `width` bits of `value`, LSB first. `width` may be 0.
    pub fn write_bits(&mut self, value: u64, width: u8) {
        debug_assert!(width <= 64);
        for i in 0..width {
            let bit = (value >> i) & 1;
            let pos = self.len_bits;
            if pos / 8 == self.bytes.len() {
                self.bytes.push(0);
            }
            if bit == 1 {
                self.bytes[pos / 8] |= 1 << (pos % 8);
            }
            self.len_bits += 1;
        }
    }

    pub fn len_bits(&self) -> usize {
        self.len_bits
    }

    pub fn finish(self) -> BitStream {
        BitStream {
            bytes: self.bytes,
            len_bits: self.len_bits,
        }
    }
}

pub struct BitReader<'a> {
    stream: &'a BitStream,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(stream: &'a BitStream) -> Self {
        BitReader { stream, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.stream.len_bits - self.pos
    }

    /// Reads `width` bits as an unsigned value, LSB first.
    pub fn read_bits(&mut self, width: u8) -> Result<u64> {
        if self.remaining() < width as usize {
            return Err(Error::SparseDecode {
                bit_offset: self.pos,
                reason: format!(
                    "truncated stream: wanted {width} bits, {} left",
                    self.remaining()
                ),
            });
        }
        let mut out = 0u64;
        for i in 0..width {
            let pos = self.pos;
            let bit = (self.stream.bytes[pos / 8] >> (pos % 8)) & 1;
            out |= (bit as u64) << i;
            self.pos += 1;
        }
        Ok(out)
    }
}

/// Sign-extends the low `width` bits of `raw` (two's complement).
pub fn sign_extend(raw: u64, width: u8) -> i64 {
    if width == 0 || width >= 64 {
        return raw as i64;
    }
    let shift = 64 - width as u32;
    ((raw << shift) as i64) >> shift
}
