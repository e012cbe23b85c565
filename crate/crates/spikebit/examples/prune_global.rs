//! Global magnitude pruning: exact-count masks across the sparsity sweep
//! and a prune-aware fine-tune where the mask blocks regrowth.
//!
//! Run with: cargo run --release -p spikebit --example prune_global

use spikebit::prune::global_prune_mask;
use spikebit::scheme::{scheme_hooks, SchemeConfig, SchemeKind};
use spikebit::snn::{LayerSpec, NetworkSpec};
use spikebit::train::{
    rate_coded_two_class, train, BpttConfig, TrainHook, TrainSchedule,
};

fn main() {
    let net = NetworkSpec {
        layers: vec![
            LayerSpec::Dense { input: 12, output: 2, affine: None },
            LayerSpec::Lif { tau: 0.9, v_th: 1.0 },
        ],
        input_shape: vec![12],
        timesteps: 6,
        classes: 2,
    };
    let init = net.init_weights(9).unwrap();
    let total: usize = init.iter().map(|w| w.len()).sum();

    println!("{:>8} {:>8} {:>12}", "omega", "pruned", "exact floor");
    for omega in [0.75, 0.80, 0.85, 0.90, 0.925, 0.95, 0.975] {
        let mask = global_prune_mask(&init, omega).unwrap();
        println!(
            "{:>8} {:>8} {:>12}",
            omega,
            mask.pruned_count(),
            (omega * total as f64).floor() as usize
        );
    }

    // prune-aware fine-tune: the frozen mask survives every update
    let data = rate_coded_two_class(16, 6, 12, 0.8, 0.05, 3).unwrap();
    let scheme = SchemeConfig {
        kind: SchemeKind::PruneOnly,
        omega: 0.8,
        quant: None,
        epochs: 30,
            scale_overrides: None,
    };
    let mut hook = scheme_hooks(&scheme).unwrap();
    let sched = TrainSchedule {
        epochs: 30,
        peak_lr: 0.2,
        warmup_frac: 0.1,
        seed: 5,
        batch_size: 8,
        momentum: 0.9,
    };
    let out = train(&net, &init, &data, &sched, &BpttConfig::default(), &mut hook).unwrap();
    let deployed = hook.effective_weights(&out.weights).unwrap();
    let zeros: usize = deployed.iter().map(|w| w.zero_count()).sum();
    let last = out.trace.last().unwrap();
    println!(
        "\nfine-tuned at omega=0.8: accuracy {:.3}, {} of {} weights zero, mask intact: {}",
        last.accuracy,
        zeros,
        total,
        hook.mask().unwrap().holds_on(&out.weights)
    );
}
