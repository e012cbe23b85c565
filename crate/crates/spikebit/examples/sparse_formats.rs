//! The four sparse storage formats: bit-exact encode/decode, size
//! accounting, the density crossover, and the container file.
//!
//! Run with: cargo run -p spikebit --example sparse_formats

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikebit::sparse::{
    best_format, container, decode, encode, expected_size_bits, FormatParams, SparseFormat,
};

fn main() {
    let params = FormatParams::default(); // 4-bit RLE run fields

    // a small vector with mixed runs
    let values: Vec<i64> = vec![0, 0, 3, 0, 1, 0, 0, 0, 0, 0, -2, 7, 0, 0, 0, 0];
    println!("encoding {values:?} at 8-bit codes:");
    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "format", "metadata", "payload", "total"
    );
    for format in SparseFormat::ALL {
        let enc = encode(&values, format, 8, &params).unwrap();
        assert_eq!(decode(&enc).unwrap(), values);
        println!(
            "{:>6} {:>10} {:>10} {:>10}",
            format.label(),
            enc.metadata_bits(),
            enc.payload_bits(),
            enc.total_bits()
        );
    }

    // expected sizes over density for a large tensor
    let n = 16384;
    println!("\nexpected bits for n = {n}, 8-bit values (best format starred):");
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10}",
        "density", "ubm", "uop", "cp", "rle"
    );
    for density in [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
        let (best, _) = best_format(density, n, 8, &params);
        let cell = |f: SparseFormat| {
            let bits = expected_size_bits(f, n, density, 8, &params);
            let star = if f == best { "*" } else { "" };
            format!("{:.0}{star}", bits)
        };
        println!(
            "{:>8} {:>10} {:>10} {:>10} {:>10}",
            density,
            cell(SparseFormat::Ubm),
            cell(SparseFormat::Uop),
            cell(SparseFormat::Cp),
            cell(SparseFormat::Rle)
        );
    }

    // container roundtrip through bytes
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let big: Vec<i64> = (0..2048)
        .map(|_| if rng.random::<f64>() < 0.1 { rng.random_range(-8..8) } else { 0 })
        .collect();
    let enc = encode(&big, SparseFormat::Rle, 5, &params).unwrap();
    let bytes = container::to_bytes(&enc);
    let back = container::from_bytes(&bytes).unwrap();
    println!(
        "\ncontainer: {} logical bits in {} bytes, decode identical: {}",
        enc.total_bits(),
        bytes.len(),
        decode(&back).unwrap() == big
    );
}
