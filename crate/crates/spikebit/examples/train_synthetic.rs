//! Trains the desk-scale convolutional SNN on the synthetic four-class task
//! with surrogate-gradient BPTT and prints the accuracy trace.
//!
//! Run with: cargo run --release -p spikebit --example train_synthetic

use spikebit::snn::{LayerSpec, NetworkSpec};
use spikebit::train::{
    evaluate, synthetic_poisson, train, BpttConfig, NoHook, SyntheticSpec, TrainSchedule,
};

fn main() {
    let net = NetworkSpec {
        layers: vec![
            LayerSpec::Conv2d {
                in_channels: 2,
                out_channels: 4,
                kernel: (3, 3),
                stride: 1,
                affine: None,
            },
            LayerSpec::Lif { tau: 0.9, v_th: 1.0 },
            LayerSpec::MaxPool2d { window: 2 },
            LayerSpec::Conv2d {
                in_channels: 4,
                out_channels: 6,
                kernel: (2, 2),
                stride: 1,
                affine: None,
            },
            LayerSpec::Lif { tau: 0.9, v_th: 1.0 },
            LayerSpec::Dense { input: 24, output: 4, affine: None },
            LayerSpec::Lif { tau: 0.9, v_th: 1.0 },
        ],
        input_shape: vec![2, 8, 8],
        timesteps: 8,
        classes: 4,
    };
    let params: usize = net
        .weight_shapes()
        .iter()
        .map(|s| s.iter().product::<usize>())
        .sum();
    println!("network: {} layers, {params} weights, T={}", net.layers.len(), net.timesteps);

    let data = |per_class: usize, noise_seed: u64| {
        synthetic_poisson(&SyntheticSpec {
            classes: 4,
            samples_per_class: per_class,
            timesteps: 8,
            frame_shape: vec![2, 8, 8],
            rate_lo: 0.02,
            rate_hi: 0.5,
            seed: 50,
            noise_seed,
        })
        .unwrap()
    };
    let train_data = data(32, 100);
    let eval_data = data(16, 200);

    let sched = TrainSchedule {
        epochs: 25,
        peak_lr: 0.1,
        warmup_frac: 0.1,
        seed: 21,
        batch_size: 16,
        momentum: 0.9,
    };
    let init = net.init_weights(12).unwrap();
    let out = train(&net, &init, &train_data, &sched, &BpttConfig::default(), &mut NoHook)
        .unwrap();

    println!("{:>6} {:>10} {:>10} {:>10}", "epoch", "loss", "accuracy", "lr");
    for row in out.trace.iter().step_by(4).chain(out.trace.last()) {
        println!(
            "{:>6} {:>10.4} {:>10.3} {:>10.5}",
            row.epoch, row.loss, row.accuracy, row.lr
        );
    }
    let eval_acc = evaluate(&net, &out.weights, &eval_data).unwrap();
    println!("\nheld-out accuracy: {eval_acc:.3}");
}
