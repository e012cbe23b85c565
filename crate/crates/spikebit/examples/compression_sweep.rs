//! A miniature compression sweep: float baseline, quantization and joint
//! points through the full pipeline, then the Pareto frontier and report
//! files.
//!
//! Run with: cargo run --release -p spikebit --example compression_sweep

use spikebit::arch::{ArchitectureSpec, Objective};
use spikebit::harness::{
    pareto, pretrain_float, report, sweep, Manifest, RunConfig, StoragePolicy,
};
use spikebit::quant::Precision;
use spikebit::scheme::{QuantSettings, SchemeConfig, SchemeKind};
use spikebit::snn::{LayerSpec, NetworkSpec};
use spikebit::sparse::FormatParams;
use spikebit::train::{synthetic_poisson, BpttConfig, SyntheticSpec, TrainSchedule};

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
            LayerSpec::Dense { input: 36, output: 4, affine: None },
            LayerSpec::Lif { tau: 0.9, v_th: 1.0 },
        ],
        input_shape: vec![2, 8, 8],
        timesteps: 6,
        classes: 4,
    };
    let data = |per_class: usize, noise_seed: u64| {
        synthetic_poisson(&SyntheticSpec {
            classes: 4,
            samples_per_class: per_class,
            timesteps: 6,
            frame_shape: vec![2, 8, 8],
            rate_lo: 0.02,
            rate_hi: 0.5,
            seed: 50,
            noise_seed,
        })
        .unwrap()
    };
    let train_data = data(24, 100);
    let eval_data = data(12, 200);
    let sched = TrainSchedule {
        epochs: 20,
        peak_lr: 0.1,
        warmup_frac: 0.1,
        seed: 21,
        batch_size: 16,
        momentum: 0.9,
    };
    let bptt = BpttConfig::default();
    println!("pre-training the float model...");
    let float_weights = pretrain_float(&net, &train_data, &sched, &bptt, 12).unwrap();

    let base = RunConfig {
        net,
        train_data,
        eval_data,
        sched,
        bptt,
        scheme: None,
        init_weights: float_weights,
        arch: ArchitectureSpec::default(),
        weight_policy: StoragePolicy::Auto,
        spike_policy: StoragePolicy::Auto,
        rle: FormatParams::default(),
        search_budget: 1500,
        objective: Objective::Energy,
        weight_bits_override: None,
    };
    let quant = |kind: SchemeKind, omega: f64, precision: Precision| {
        Some(SchemeConfig {
            kind,
            omega,
            quant: Some(QuantSettings { precision, delta: 0.1 }),
            epochs: 20,
            scale_overrides: None,
        })
    };
    let grid: Vec<RunConfig> = [
        None,
        quant(SchemeKind::QuantOnly, 0.0, Precision::Bits(8)),
        quant(SchemeKind::QuantOnly, 0.0, Precision::Bits(4)),
        quant(SchemeKind::QuantOnly, 0.0, Precision::Ternary),
        Some(SchemeConfig {
            kind: SchemeKind::PruneOnly,
            omega: 0.8,
            quant: None,
            epochs: 20,
            scale_overrides: None,
        }),
        quant(SchemeKind::Joint, 0.8, Precision::Bits(4)),
        quant(SchemeKind::Cumulative, 0.8, Precision::Bits(4)),
    ]
    .into_iter()
    .map(|scheme| RunConfig { scheme, ..base.clone() })
    .collect();

    println!("running {} points...", grid.len());
    let outcome = sweep(&grid).unwrap();
    for f in &outcome.failures {
        eprintln!("point {} failed: {}", f.index, f.error);
    }
    println!(
        "\n{:<12} {:>8} {:>6} {:>9} {:>9} {:>7} {:>12} {:>14}",
        "scheme", "prec", "omega", "accuracy", "sparsity", "format", "energy", "edp"
    );
    for r in &outcome.records {
        let p = &r.point;
        println!(
            "{:<12} {:>8} {:>6} {:>9.3} {:>9.3} {:>7} {:>12.0} {:>14.0}",
            p.scheme, p.precision, p.omega, p.accuracy, p.model_sparsity, p.format, p.energy, p.edp
        );
    }

    let points: Vec<_> = outcome.records.iter().map(|r| r.point.clone()).collect();
    let frontier = pareto(&points, Objective::Energy);
    println!("\nenergy/accuracy Pareto frontier:");
    for p in &frontier {
        println!(
            "  {} {} omega={}: accuracy {:.3}, energy {:.0}",
            p.scheme, p.precision, p.omega, p.accuracy, p.energy
        );
    }

    let out_dir = std::path::Path::new("target/sweep_report");
    let manifest = Manifest::new(b"compression_sweep example", 21, Objective::Energy);
    let files = report(&outcome.records, Objective::Energy, &manifest, out_dir).unwrap();
    println!("\nreport files:");
    for f in files {
        println!("  {}", f.display());
    }
}
