//! Sparse storage formats with bit-exact size accounting.

mod bitio;
pub mod container;
mod formats;

pub use bitio::{BitReader, BitStream, BitWriter};
pub use formats::{
    best_format, best_format_exact, ceil_log2, decode, encode, expected_rle_entries,
    expected_size_bits, rle_entry_count, size_from_counts, FormatParams, SparseEncoding,
    SparseFormat,
};
