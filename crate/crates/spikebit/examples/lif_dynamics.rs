//! Single-neuron leaky integrate-and-fire dynamics.
//!
//! Drives one neuron with a periodic input and prints the membrane
//! trajectory: leak, integration, threshold crossing and hard reset.
//!
//! Run with: cargo run -p spikebit --example lif_dynamics

use spikebit::snn::lif_step;
use spikebit::tensor::Tensor;

fn main() {
    let tau = 0.9;
    let v_th = 1.0;
    let mut u = Tensor::zeros(vec![1]);
    println!("tau = {tau}, v_th = {v_th}");
    println!("{:>4} {:>8} {:>10} {:>6}", "t", "input", "membrane", "spike");
    for t in 0..20 {
        // one input spike every third step, weighted by 0.45
        let drive = if t % 3 == 0 { 0.45 } else { 0.0 };
        let input = Tensor::new(vec![1], vec![drive]).unwrap();
        let (u_next, spikes) = lif_step(&u, &input, tau, v_th).unwrap();
        println!(
            "{:>4} {:>8.2} {:>10.4} {:>6}",
            t,
            drive,
            u_next.data()[0],
            if spikes.data()[0] == 1.0 { "*" } else { "" }
        );
        u = u_next;
    }
}
