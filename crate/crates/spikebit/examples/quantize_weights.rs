//! Learnable-scale quantization across precisions: scale initialization,
//! clip-round behavior, induced sparsity and the straight-through backward.
//!
//! Run with: cargo run -p spikebit --example quantize_weights

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spikebit::quant::{
    induced_sparsity, init_scales, qat_backward, quantize, Precision, QuantConfig,
};
use spikebit::tensor::Tensor;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal = Normal::new(0.0, 0.12).unwrap();
    let weights = Tensor::new(vec![4096], (0..4096).map(|_| normal.sample(&mut rng)).collect())
        .unwrap();
    let range = init_scales(&weights).unwrap();
    println!("weight range scale (mean + 3 std) = {range:.4}\n");

    println!(
        "{:>8} {:>10} {:>16} {:>14}",
        "prec", "step", "induced sparsity", "levels used"
    );
    for precision in [
        Precision::Bits(8),
        Precision::Bits(6),
        Precision::Bits(4),
        Precision::Bits(3),
        Precision::Ternary,
    ] {
        let qmax = match precision {
            Precision::Ternary => 1.0,
            Precision::Bits(b) => (1u64 << (b - 1)) as f64,
        };
        let step = range / qmax;
        let cfg = QuantConfig::new(precision, step, step, 0.1).unwrap();
        let q = quantize(&weights, &cfg).unwrap();
        let sparsity = induced_sparsity(&q).unwrap();
        let mut levels: Vec<i64> = q
            .data()
            .iter()
            .map(|v| (v / cfg.s_out).round() as i64)
            .collect();
        levels.sort_unstable();
        levels.dedup();
        println!(
            "{:>8} {:>10.5} {:>16.4} {:>14}",
            precision.label(),
            step,
            sparsity,
            levels.len()
        );
    }

    // backward: straight-through with residual gradient scaling
    println!("\nqat backward on x = 2.4 (step 1, delta 0.1):");
    let cfg = QuantConfig::new(Precision::Bits(3), 1.0, 1.0, 0.1).unwrap();
    let up = Tensor::scalar(1.0).unwrap();
    let x = Tensor::scalar(2.4).unwrap();
    let g = qat_backward(&up, &x, &cfg).unwrap();
    println!(
        "  grad_x = {:.4} (residual 0.4 scaled by delta), grad_s_in = {:.4}, grad_s_out = {:.4}",
        g.grad_x.data()[0],
        g.grad_s_in,
        g.grad_s_out
    );
    let clipped = Tensor::scalar(9.0).unwrap();
    let g = qat_backward(&up, &clipped, &cfg).unwrap();
    println!("  grad_x at clipped x = 9.0: {}", g.grad_x.data()[0]);
}
