//! Concurrency contract: immutable values after construction, so separate
//! network instances (or shared read-only ones) run in parallel safely.

use spikebit::snn::{forward, LayerSpec, NetworkSpec};
use spikebit::tensor::SpikeTrain;
use std::sync::Arc;

fn assert_send_sync<T: Send + Sync>() {}

#[test]
fn core_types_are_send_and_sync() {
    assert_send_sync::<spikebit::tensor::Tensor>();
    assert_send_sync::<SpikeTrain>();
    assert_send_sync::<NetworkSpec>();
    assert_send_sync::<spikebit::quant::QuantConfig>();
    assert_send_sync::<spikebit::prune::PruneMask>();
    assert_send_sync::<spikebit::sparse::SparseEncoding>();
    assert_send_sync::<spikebit::arch::ArchitectureSpec>();
    assert_send_sync::<spikebit::arch::Mapping>();
    assert_send_sync::<spikebit::harness::ExperimentPoint>();
}

#[test]
fn concurrent_forward_matches_serial() {
    let net = Arc::new(NetworkSpec {
        layers: vec![
            LayerSpec::Dense { input: 6, output: 3, affine: None },
            LayerSpec::Lif { tau: 0.9, v_th: 1.0 },
        ],
        input_shape: vec![6],
        timesteps: 4,
        classes: 3,
    });
    let weights = Arc::new(net.init_weights(8).unwrap());
    let inputs: Vec<SpikeTrain> = (0..8)
        .map(|i| {
            let data: Vec<u8> = (0..24).map(|j| ((i + j) % 3 == 0) as u8).collect();
            SpikeTrain::new(vec![4, 6], data).unwrap()
        })
        .collect();

    let serial: Vec<_> = inputs
        .iter()
        .map(|x| forward(&net, &weights, x).unwrap().0)
        .collect();

    let handles: Vec<_> = inputs
        .iter()
        .cloned()
        .map(|x| {
            let net = Arc::clone(&net);
            let weights = Arc::clone(&weights);
            std::thread::spawn(move || forward(&net, &weights, &x).unwrap().0)
        })
        .collect();
    for (h, want) in handles.into_iter().zip(serial) {
        assert_eq!(h.join().unwrap(), want);
    }
}
