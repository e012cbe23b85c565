//! Container serialization for encoded tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "SBE1"
//! format tag   1 byte   0=ubm 1=uop 2=cp 3=rle
//! value_bits   1 byte
//! rle_run_bits 1 byte
//! n            u64
//! metadata_bits u64
//! payload_bits  u64
//! metadata     ceil(metadata_bits/8) bytes, zero-padded
//! payload      ceil(payload_bits/8) bytes, zero-padded
//! ```

use crate::error::{Error, Result};
use crate::sparse::bitio::BitStream;
use crate::sparse::formats::{SparseEncoding, SparseFormat};

const MAGIC: &[u8; 4] = b"SBE1";

fn format_tag(f: SparseFormat) -> u8 {
    match f {
        SparseFormat::Ubm => 0,
        SparseFormat::Uop => 1,
        SparseFormat::Cp => 2,
        SparseFormat::Rle => 3,
    }
}

fn tag_format(tag: u8) -> Result<SparseFormat> {
    Ok(match tag {
        0 => SparseFormat::Ubm,
        1 => SparseFormat::Uop,
        2 => SparseFormat::Cp,
        3 => SparseFormat::Rle,
        other => {
            return Err(Error::Parse(format!("unknown format tag {other}")));
        }
    })
}

pub fn to_bytes(enc: &SparseEncoding) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(format_tag(enc.format));
    out.push(enc.value_bits);
    out.push(enc.rle_run_bits);
    out.extend_from_slice(&(enc.n as u64).to_le_bytes());
    out.extend_from_slice(&(enc.metadata_bits() as u64).to_le_bytes());
    out.extend_from_slice(&(enc.payload_bits() as u64).to_le_bytes());
    out.extend_from_slice(enc.metadata.bytes());
    out.extend_from_slice(enc.payload.bytes());
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<SparseEncoding> {
    let err = |why: &str| Error::Parse(format!("sparse container: {why}"));
    if bytes.len() < 31 {
        return Err(err("truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(err("bad magic"));
    }
    let format = tag_format(bytes[4])?;
    let value_bits = bytes[5];
    let rle_run_bits = bytes[6];
    let read_u64 = |off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let n = read_u64(7) as usize;
    let metadata_bits = read_u64(15) as usize;
    let payload_bits = read_u64(23) as usize;
    let meta_len = metadata_bits.div_ceil(8);
    let pay_len = payload_bits.div_ceil(8);
    let body = &bytes[31..];
    if body.len() != meta_len + pay_len {
        return Err(err("body length does not match header"));
    }
    Ok(SparseEncoding {
        format,
        n,
        value_bits,
        rle_run_bits,
        metadata: BitStream::from_bytes(body[..meta_len].to_vec(), metadata_bits)?,
        payload: BitStream::from_bytes(body[meta_len..].to_vec(), payload_bits)?,
    })
}

pub fn write_file(enc: &SparseEncoding, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_bytes(enc)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn read_file(path: &std::path::Path) -> Result<SparseEncoding> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::formats::{decode, encode, FormatParams};

    #[test]
    fn container_roundtrip_all_formats() {
        let values = [0i64, -3, 0, 0, 7, 1, 0, 0, 0, 2];
        for f in SparseFormat::ALL {
            let enc = encode(&values, f, 6, &FormatParams::default()).unwrap();
            let bytes = to_bytes(&enc);
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, enc);
            assert_eq!(decode(&back).unwrap(), values);
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let values = [1i64];
        let enc = encode(&values, SparseFormat::Ubm, 2, &FormatParams::default()).unwrap();
        let mut bytes = to_bytes(&enc);
        bytes[0] = b'X';
        assert!(from_bytes(&bytes).is_err());
    }

    #[test]
    fn truncated_body_rejected() {
        let values = [1i64, 0, 2, 0, 0, 0, 5];
        let enc = encode(&values, SparseFormat::Rle, 8, &FormatParams::default()).unwrap();
        let bytes = to_bytes(&enc);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
