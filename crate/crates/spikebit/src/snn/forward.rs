//! Time-stepped inference with spike-count readout and activity statistics.

use crate::error::{Error, Result};
use crate::snn::layer::{layer_apply, maxpool_apply, LayerSpec, NetworkSpec};
use crate::snn::lif::{lif_step, LifState};
use crate::tensor::{SpikeTrain, Tensor};

/// Per-layer activity counters. Densities are exact rationals over the
/// element counts seen during the run.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivity {
    pub layer_index: usize,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    pub input_nonzeros: u64,
    pub input_elems: u64,
    pub output_nonzeros: u64,
    pub output_elems: u64,
    pub weight_nonzeros: u64,
    pub weight_elems: u64,
}

impl LayerActivity {
    pub fn input_density(&self) -> f64 {
        ratio(self.input_nonzeros, self.input_elems)
    }
    pub fn output_density(&self) -> f64 {
        ratio(self.output_nonzeros, self.output_elems)
    }
    pub fn weight_density(&self) -> f64 {
        ratio(self.weight_nonzeros, self.weight_elems)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Activity measured over a forward run, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityStats {
    pub layers: Vec<LayerActivity>,
}

impl ActivityStats {
    fn new(net: &NetworkSpec, weights: &[Tensor]) -> Result<Self> {
        let shapes = net.shapes()?;
        let mut layers = Vec::with_capacity(net.layers.len());
        let mut w_iter = weights.iter();
        let mut in_shape = net.input_shape.clone();
        for (i, layer) in net.layers.iter().enumerate() {
            let (w_nnz, w_elems) = if layer.is_parameterized() {
                let w = w_iter
                    .next()
                    .ok_or(Error::InvalidNetwork("missing weight tensor".into()))?;
                ((w.len() - w.zero_count()) as u64, w.len() as u64)
            } else {
                (0, 0)
            };
            layers.push(LayerActivity {
                layer_index: i,
                input_shape: in_shape.clone(),
                output_shape: shapes[i].clone(),
                input_nonzeros: 0,
                input_elems: 0,
                output_nonzeros: 0,
                output_elems: 0,
                weight_nonzeros: w_nnz,
                weight_elems: w_elems,
            });
            in_shape = shapes[i].clone();
        }
        Ok(ActivityStats { layers })
    }

    fn record(&mut self, layer: usize, input: &Tensor, output: &Tensor) {
        let a = &mut self.layers[layer];
        a.input_elems += input.len() as u64;
        a.input_nonzeros += (input.len() - input.zero_count()) as u64;
        a.output_elems += output.len() as u64;
        a.output_nonzeros += (output.len() - output.zero_count()) as u64;
    }
}

/// Runs `net` for all timesteps from zero membrane state.
///
/// Returns the summed final-layer spike counts (one per class) and the
/// measured per-layer activity statistics. Deterministic: no randomness.
pub fn forward(
    net: &NetworkSpec,
    weights: &[Tensor],
    input: &SpikeTrain,
) -> Result<(Tensor, ActivityStats)> {
    net.validate()?;
    if input.timesteps() != net.timesteps {
        return Err(Error::InvalidArgument(format!(
            "input has {} timesteps, network expects {}",
            input.timesteps(),
            net.timesteps
        )));
    }
    if input.frame_shape() != net.input_shape.as_slice() {
        return Err(Error::ShapeMismatch {
            context: "forward input",
            lhs: input.frame_shape().to_vec(),
            rhs: net.input_shape.clone(),
        });
    }
    let expected_w = net.weight_shapes();
    if weights.len() != expected_w.len() {
        return Err(Error::InvalidNetwork(format!(
            "expected {} weight tensors, got {}",
            expected_w.len(),
            weights.len()
        )));
    }
    for (w, shape) in weights.iter().zip(&expected_w) {
        if w.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch {
                context: "forward weights",
                lhs: w.shape().to_vec(),
                rhs: shape.clone(),
            });
        }
    }

    let shapes = net.shapes()?;
    let mut stats = ActivityStats::new(net, weights)?;
    // membranes in lif-layer order, zero-initialized (resting potential)
    let lif_layers: Vec<usize> = net
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, LayerSpec::Lif { .. }))
        .map(|(i, _)| i)
        .collect();
    let lif_shapes: Vec<Vec<usize>> = lif_layers.iter().map(|&i| shapes[i].clone()).collect();
    let mut state = LifState::zeros(&lif_shapes);

    let mut counts = Tensor::zeros(vec![net.classes]);
    for t in 0..net.timesteps {
        let mut act = input.frame(t)?;
        let mut w_idx = 0usize;
        let mut lif_slot = 0usize;
        for (i, layer) in net.layers.iter().enumerate() {
            let out = match layer {
                LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. } => {
                    // dense layers accept any input shape with the right flat size
                    let flat = Tensor::new(vec![act.len()], act.data().to_vec())?;
                    let arg = if matches!(layer, LayerSpec::Dense { .. }) {
                        &flat
                    } else {
                        &act
                    };
                    let out = layer_apply(layer, Some(&weights[w_idx]), arg)?;
                    w_idx += 1;
                    out
                }
                LayerSpec::MaxPool2d { window } => maxpool_apply(*window, &act)?.0,
                LayerSpec::Lif { tau, v_th } => {
                    let (u_next, spikes) =
                        lif_step(&state.membranes[lif_slot], &act, *tau, *v_th)?;
                    state.membranes[lif_slot] = u_next;
                    lif_slot += 1;
                    spikes
                }
            };
            stats.record(i, &act, &out);
            act = out;
        }
        counts.add_scaled(&Tensor::new(vec![net.classes], act.data().to_vec())?, 1.0)?;
    }
    Ok((counts, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lif(tau: f64) -> LayerSpec {
        LayerSpec::Lif { tau, v_th: 1.0 }
    }

    fn single_dense_net(t: usize) -> NetworkSpec {
        NetworkSpec {
            layers: vec![
                LayerSpec::Dense {
                    input: 1,
                    output: 1,
                    affine: None,
                },
                lif(0.9),
            ],
            input_shape: vec![1],
            timesteps: t,
            classes: 1,
        }
    }

    #[test]
    fn one_step_threshold_crossing() {
        let net = single_dense_net(1);
        let w = vec![Tensor::new(vec![1, 1], vec![2.0]).unwrap()];
        let input = SpikeTrain::new(vec![1, 1], vec![1]).unwrap();
        let (counts, stats) = forward(&net, &w, &input).unwrap();
        assert_eq!(counts.data(), &[1.0]);
        assert_eq!(stats.layers[0].input_density(), 1.0);
    }

    #[test]
    fn zero_input_zero_counts() {
        let net = single_dense_net(3);
        let w = vec![Tensor::new(vec![1, 1], vec![2.0]).unwrap()];
        let input = SpikeTrain::zeros(vec![3, 1]).unwrap();
        let (counts, stats) = forward(&net, &w, &input).unwrap();
        assert_eq!(counts.data(), &[0.0]);
        assert_eq!(stats.layers[0].input_density(), 0.0);
        assert_eq!(stats.layers[1].output_density(), 0.0);
    }

    /// Independent step-by-step reference interpreter for a dense+lif,
    /// dense+lif stack, written directly from the membrane update rule.
    fn reference_two_layer(
        w1: &[f64],
        w2: &[f64],
        dims: (usize, usize, usize),
        input: &[Vec<u8>],
        tau: f64,
        v_th: f64,
    ) -> Vec<f64> {
        let (n_in, n_hidden, n_out) = dims;
        let mut u1 = vec![0.0; n_hidden];
        let mut u2 = vec![0.0; n_out];
        let mut counts = vec![0.0; n_out];
        for frame in input {
            let mut s1 = vec![0.0; n_hidden];
            for j in 0..n_hidden {
                let mut z = 0.0;
                for i in 0..n_in {
                    z += w1[j * n_in + i] * frame[i] as f64;
                }
                let cand = tau * u1[j] + z;
                if cand >= v_th {
                    s1[j] = 1.0;
                    u1[j] = 0.0;
                } else {
                    u1[j] = cand;
                }
            }
            for k in 0..n_out {
                let mut z = 0.0;
                for j in 0..n_hidden {
                    z += w2[k * n_hidden + j] * s1[j];
                }
                let cand = tau * u2[k] + z;
                if cand >= v_th {
                    counts[k] += 1.0;
                    u2[k] = 0.0;
                } else {
                    u2[k] = cand;
                }
            }
        }
        counts
    }

    #[test]
    fn two_layer_matches_reference_interpreter() {
        let net = NetworkSpec {
            layers: vec![
                LayerSpec::Dense {
                    input: 3,
                    output: 4,
                    affine: None,
                },
                lif(0.8),
                LayerSpec::Dense {
                    input: 4,
                    output: 2,
                    affine: None,
                },
                lif(0.8),
            ],
            input_shape: vec![3],
            timesteps: 3,
            classes: 2,
        };
        // fixed-seed weights
        let weights = net.init_weights(42).unwrap();
        let scaled: Vec<Tensor> = weights.iter().map(|w| w.map(|v| v * 3.0)).collect();
        let frames: Vec<Vec<u8>> = vec![vec![1, 0, 1], vec![0, 1, 1], vec![1, 1, 0]];
        let flat: Vec<u8> = frames.concat();
        let input = SpikeTrain::new(vec![3, 3], flat).unwrap();
        let (counts, _) = forward(&net, &scaled, &input).unwrap();
        let reference = reference_two_layer(
            scaled[0].data(),
            scaled[1].data(),
            (3, 4, 2),
            &frames,
            0.8,
            1.0,
        );
        assert_eq!(counts.data(), reference.as_slice());
    }

    #[test]
    fn forward_is_deterministic() {
        let net = single_dense_net(2);
        let w = vec![Tensor::new(vec![1, 1], vec![0.7]).unwrap()];
        let input = SpikeTrain::new(vec![2, 1], vec![1, 1]).unwrap();
        let a = forward(&net, &w, &input).unwrap();
        let b = forward(&net, &w, &input).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn wrong_timestep_count_rejected() {
        let net = single_dense_net(2);
        let w = vec![Tensor::new(vec![1, 1], vec![0.7]).unwrap()];
        let input = SpikeTrain::new(vec![1, 1], vec![1]).unwrap();
        assert!(forward(&net, &w, &input).is_err());
    }
}
