//! Backpropagation through time over the unrolled timestep graph.
//!
//! The loss is softmax cross-entropy on the time-summed output spike counts.
//! In the backward pass the Heaviside derivative is replaced by the
//! arc-tangent surrogate and the reset branch is a stop-gradient: the
//! membrane carry uses the recorded gate `(1 - spike)` as a constant.
//!
//! Two forward modes share the tape machinery: `Hard` is the binary-spike
//! simulation used for training, `Smooth` replaces the step with the smooth
//! arc-tangent spike so the resulting loss is differentiable and the BPTT
//! gradient can be checked against central finite differences.

use crate::error::{Error, Result};
use crate::snn::{maxpool_apply, ChannelAffine, LayerSpec, NetworkSpec};
use crate::tensor::{SpikeTrain, Tensor};
use crate::train::surrogate::{surrogate_grad, surrogate_spike, SurrogateConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    /// Binary spikes with threshold-and-reset semantics.
    Hard,
    /// Smooth arc-tangent spikes; used by gradient checks.
    Smooth,
}

#[derive(Debug, Clone, Copy)]
pub struct BpttConfig {
    pub surrogate: SurrogateConfig,
    pub mode: SpikeMode,
}

impl Default for BpttConfig {
    fn default() -> Self {
        BpttConfig {
            surrogate: SurrogateConfig::default(),
            mode: SpikeMode::Hard,
        }
    }
}

enum LayerTrace {
    Weighted { input: Tensor },
    Pool { argmax: Vec<usize>, input_shape: Vec<usize> },
    Lif { u_cand: Tensor, spike: Tensor },
}

struct Tape {
    /// traces[t][layer]
    steps: Vec<Vec<LayerTrace>>,
    counts: Tensor,
}

fn weighted_forward(
    layer: &LayerSpec,
    weights: &Tensor,
    act: &Tensor,
) -> Result<Tensor> {
    match layer {
        LayerSpec::Dense { input, output, affine } => {
            if act.len() != *input {
                return Err(Error::ShapeMismatch {
                    context: "bptt dense input",
                    lhs: act.shape().to_vec(),
                    rhs: vec![*input],
                });
            }
            let x = act.data();
            let wd = weights.data();
            let mut out = vec![0.0; *output];
            for (o, item) in out.iter_mut().enumerate() {
                let row = &wd[o * input..(o + 1) * input];
                let mut acc = 0.0;
                for i in 0..*input {
                    acc += row[i] * x[i];
                }
                *item = acc;
            }
            if let Some(a) = affine {
                for (o, item) in out.iter_mut().enumerate() {
                    *item = a.scale[o] * *item + a.bias[o];
                }
            }
            Tensor::new(vec![*output], out)
        }
        LayerSpec::Conv2d { .. } => {
            crate::snn::layer_apply(layer, Some(weights), act)
        }
        _ => unreachable!("weighted_forward on non-weighted layer"),
    }
}

/// Forward pass recording everything the backward pass needs.
fn forward_tape(
    net: &NetworkSpec,
    weights: &[Tensor],
    input: &SpikeTrain,
    cfg: &BpttConfig,
) -> Result<Tape> {
    let shapes = net.shapes()?;
    let mut membranes: Vec<Option<Tensor>> = net
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            matches!(l, LayerSpec::Lif { .. }).then(|| Tensor::zeros(shapes[i].clone()))
        })
        .collect();

    // a non-finite value anywhere in the unrolled graph becomes an error
    // carrying the offending layer and timestep
    let non_finite = |e: Error, layer: usize, timestep: usize| match e {
        Error::NonFinite(_) => Error::NonFiniteLoss { layer, timestep },
        other => other,
    };

    let mut steps = Vec::with_capacity(net.timesteps);
    let mut counts = Tensor::zeros(vec![net.classes]);
    for t in 0..net.timesteps {
        let mut act = input.frame(t)?;
        let mut traces = Vec::with_capacity(net.layers.len());
        let mut w_idx = 0usize;
        for (i, layer) in net.layers.iter().enumerate() {
            match layer {
                LayerSpec::Dense { .. } => {
                    let flat = Tensor::new(vec![act.len()], act.data().to_vec())?;
                    let out = weighted_forward(layer, &weights[w_idx], &flat)
                        .map_err(|e| non_finite(e, i, t))?;
                    traces.push(LayerTrace::Weighted { input: flat });
                    w_idx += 1;
                    act = out;
                }
                LayerSpec::Conv2d { .. } => {
                    let out = weighted_forward(layer, &weights[w_idx], &act)
                        .map_err(|e| non_finite(e, i, t))?;
                    traces.push(LayerTrace::Weighted { input: act.clone() });
                    w_idx += 1;
                    act = out;
                }
                LayerSpec::MaxPool2d { window } => {
                    let input_shape = act.shape().to_vec();
                    let (out, argmax) = maxpool_apply(*window, &act)?;
                    traces.push(LayerTrace::Pool { argmax, input_shape });
                    act = out;
                }
                LayerSpec::Lif { tau, v_th } => {
                    let u_prev = membranes[i].as_ref().expect("membrane slot");
                    let mut u_cand = u_prev.map(|v| v * tau);
                    u_cand.add_scaled(&act, 1.0)?;
                    if u_cand.data().iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFiniteLoss { layer: i, timestep: t });
                    }
                    let spike = match cfg.mode {
                        SpikeMode::Hard => u_cand.map(|v| (v >= *v_th) as u8 as f64),
                        SpikeMode::Smooth => {
                            u_cand.map(|v| surrogate_spike(v - v_th, &cfg.surrogate))
                        }
                    };
                    // hard reset via the (detached) gate: u_post = u_cand * (1 - s)
                    let u_post = u_cand.zip_map(&spike, |u, s| u * (1.0 - s))?;
                    membranes[i] = Some(u_post);
                    traces.push(LayerTrace::Lif {
                        u_cand,
                        spike: spike.clone(),
                    });
                    act = spike;
                }
            }
        }
        counts.add_scaled(&Tensor::new(vec![net.classes], act.data().to_vec())?, 1.0)?;
        steps.push(traces);
    }
    Ok(Tape { steps, counts })
}

/// Numerically stable softmax.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + logits
            .iter()
            .map(|&v| (v - max).exp())
            .sum::<f64>()
            .ln();
    lse - logits[label]
}

fn backward_weighted(
    layer: &LayerSpec,
    weights: &Tensor,
    input: &Tensor,
    grad_out: &Tensor,
    grad_w: &mut Tensor,
) -> Result<Tensor> {
    match layer {
        LayerSpec::Dense { input: n_in, output: n_out, affine } => {
            let mut g = grad_out.data().to_vec();
            if let Some(a) = affine {
                for (o, item) in g.iter_mut().enumerate() {
                    *item *= a.scale[o];
                }
            }
            let x = input.data();
            let wd = weights.data();
            let gw = grad_w.data_mut();
            let mut gx = vec![0.0; *n_in];
            for o in 0..*n_out {
                let go = g[o];
                if go == 0.0 {
                    continue;
                }
                for i in 0..*n_in {
                    gw[o * n_in + i] += go * x[i];
                    gx[i] += wd[o * n_in + i] * go;
                }
            }
            Tensor::new(vec![*n_in], gx)
        }
        LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, affine } => {
            let (c, m) = (*in_channels, *out_channels);
            let (r, s) = *kernel;
            let (h, wdt) = (input.shape()[1], input.shape()[2]);
            let (p, q) = (grad_out.shape()[1], grad_out.shape()[2]);
            let x = input.data();
            let wd = weights.data();
            let gw = grad_w.data_mut();
            let mut gx = vec![0.0; c * h * wdt];
            let affine_scale =
                |om: usize| affine.as_ref().map_or(1.0, |a: &ChannelAffine| a.scale[om]);
            for om in 0..m {
                let sc = affine_scale(om);
                for op in 0..p {
                    for oq in 0..q {
                        let go = grad_out.data()[(om * p + op) * q + oq] * sc;
                        if go == 0.0 {
                            continue;
                        }
                        for ic in 0..c {
                            for kr in 0..r {
                                let iy = op * stride + kr;
                                for ks in 0..s {
                                    let ix = oq * stride + ks;
                                    let widx = ((om * c + ic) * r + kr) * s + ks;
                                    let xidx = (ic * h + iy) * wdt + ix;
                                    gw[widx] += go * x[xidx];
                                    gx[xidx] += wd[widx] * go;
                                }
                            }
                        }
                    }
                }
            }
            Tensor::new(vec![c, h, wdt], gx)
        }
        _ => unreachable!(),
    }
}

/// Output of a gradient evaluation over a batch.
#[derive(Debug, Clone)]
pub struct BpttOutput {
    /// Mean gradient per weight tensor.
    pub grads: Vec<Tensor>,
    /// Mean loss.
    pub loss: f64,
    /// Correct argmax predictions in the batch (hard mode semantics).
    pub correct: usize,
}

/// Reverse-mode gradients of the spike-count cross-entropy through the
/// unrolled network, averaged over the batch.
pub fn bptt_grad(
    net: &NetworkSpec,
    weights: &[Tensor],
    batch: &[(SpikeTrain, usize)],
    cfg: &BpttConfig,
) -> Result<BpttOutput> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    net.validate()?;
    for w in weights {
        w.check_finite("bptt_grad weights")?;
    }
    let mut grads: Vec<Tensor> = weights
        .iter()
        .map(|w| Tensor::zeros(w.shape().to_vec()))
        .collect();
    let mut total_loss = 0.0;
    let mut correct = 0usize;
    let inv = 1.0 / batch.len() as f64;

    for (train, label) in batch {
        if *label >= net.classes {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {} classes",
                net.classes
            )));
        }
        let tape = forward_tape(net, weights, train, cfg)?;
        let loss = cross_entropy(tape.counts.data(), *label);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                layer: net.layers.len() - 1,
                timestep: net.timesteps - 1,
            });
        }
        total_loss += loss * inv;
        let pred = argmax(tape.counts.data());
        if pred == *label {
            correct += 1;
        }

        // dL/dcounts
        let mut dcounts = softmax(tape.counts.data());
        dcounts[*label] -= 1.0;

        // grad wrt u_post[t] flowing back from t+1, per lif layer index
        let mut carry: Vec<Option<Tensor>> = net
            .layers
            .iter()
            .map(|l| {
                matches!(l, LayerSpec::Lif { .. }).then(|| Tensor::zeros(vec![0]))
            })
            .collect();
        let shapes = net.shapes()?;
        for (i, layer) in net.layers.iter().enumerate() {
            if matches!(layer, LayerSpec::Lif { .. }) {
                carry[i] = Some(Tensor::zeros(shapes[i].clone()));
            }
        }

        let n_weighted = weights.len();
        for t in (0..net.timesteps).rev() {
            // counts gradient enters the final layer's spikes at every step
            let mut grad_act = Tensor::new(vec![net.classes], dcounts.clone())?;
            let mut w_idx = n_weighted;
            for (i, layer) in net.layers.iter().enumerate().rev() {
                let trace = &tape.steps[t][i];
                match (layer, trace) {
                    (LayerSpec::Lif { tau, v_th }, LayerTrace::Lif { u_cand, spike }) => {
                        let carry_t = carry[i].as_ref().unwrap();
                        let mut grad_u_cand = Tensor::zeros(u_cand.shape().to_vec());
                        {
                            let gu = grad_u_cand.data_mut();
                            let gs = grad_act.data();
                            let cu = u_cand.data();
                            let sp = spike.data();
                            let cy = carry_t.data();
                            for k in 0..gu.len() {
                                let sg = surrogate_grad(cu[k] - v_th, &cfg.surrogate);
                                // reset branch detached: gate is a constant
                                gu[k] = gs[k] * sg + cy[k] * (1.0 - sp[k]);
                            }
                        }
                        carry[i] = Some(grad_u_cand.map(|v| v * tau));
                        grad_act = grad_u_cand;
                    }
                    (LayerSpec::MaxPool2d { .. }, LayerTrace::Pool { argmax, input_shape }) => {
                        let mut gx = Tensor::zeros(input_shape.clone());
                        for (o, &src) in argmax.iter().enumerate() {
                            gx.data_mut()[src] += grad_act.data()[o];
                        }
                        grad_act = gx;
                    }
                    (LayerSpec::Dense { .. }, LayerTrace::Weighted { input })
                    | (LayerSpec::Conv2d { .. }, LayerTrace::Weighted { input }) => {
                        w_idx -= 1;
                        // reshape grad to this layer's output shape
                        let grad_out = Tensor::new(
                            shapes[i].clone(),
                            grad_act.data().to_vec(),
                        )?;
                        let gx = backward_weighted(
                            layer,
                            &weights[w_idx],
                            input,
                            &grad_out,
                            &mut grads[w_idx],
                        )?;
                        grad_act = gx;
                    }
                    _ => unreachable!("trace/layer mismatch"),
                }
            }
        }
    }
    for g in &mut grads {
        for v in g.data_mut() {
            *v *= inv;
        }
    }
    Ok(BpttOutput {
        grads,
        loss: total_loss,
        correct,
    })
}

/// Loss of a batch without gradients (same forward modes).
pub fn batch_loss(
    net: &NetworkSpec,
    weights: &[Tensor],
    batch: &[(SpikeTrain, usize)],
    cfg: &BpttConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for (train, label) in batch {
        let tape = forward_tape(net, weights, train, cfg)?;
        total += cross_entropy(tape.counts.data(), *label);
    }
    Ok(total / batch.len() as f64)
}

/// Spike counts from the tape forward (used by tests to cross-check the
/// plain inference path).
pub fn tape_counts(
    net: &NetworkSpec,
    weights: &[Tensor],
    input: &SpikeTrain,
    cfg: &BpttConfig,
) -> Result<Tensor> {
    Ok(forward_tape(net, weights, input, cfg)?.counts)
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn two_neuron_net() -> NetworkSpec {
        NetworkSpec {
            layers: vec![
                LayerSpec::Dense { input: 1, output: 2, affine: None },
                LayerSpec::Lif { tau: 0.5, v_th: 1.0 },
            ],
            input_shape: vec![1],
            timesteps: 2,
            classes: 2,
        }
    }

    #[test]
    fn zero_weights_zero_input_zero_gradients() {
        let net = two_neuron_net();
        let w = vec![Tensor::zeros(vec![2, 1])];
        let input = SpikeTrain::zeros(vec![2, 1]).unwrap();
        let out = bptt_grad(&net, &w, &[(input, 0)], &BpttConfig::default()).unwrap();
        assert_eq!(out.grads[0].data(), &[0.0, 0.0]);
    }

    #[test]
    fn matches_hand_unrolled_two_step_chain() {
        // Per-neuron scalar chains, hand-derived:
        //   w0 = 1.2 spikes at both steps (gate 0 after t0), so
        //     dc0/dw0 = sg(0.2) + sg(0.2)
        //   w1 = 0.4 never spikes (gate 1), membrane carries with tau:
        //     dc1/dw1 = sg(-0.6) + sg(-0.4) * (tau * 1 + 1)
        // with sg(x) = 1 / (1 + (pi x)^2) for alpha = 2.
        let net = two_neuron_net();
        let w = vec![Tensor::new(vec![2, 1], vec![1.2, 0.4]).unwrap()];
        let input = SpikeTrain::new(vec![2, 1], vec![1, 1]).unwrap();
        let out = bptt_grad(&net, &w, &[(input, 0)], &BpttConfig::default()).unwrap();

        let sg = |x: f64| 1.0 / (1.0 + (PI * x) * (PI * x));
        let counts = [2.0f64, 0.0f64];
        let z = counts[0].exp() + counts[1].exp();
        let p = [counts[0].exp() / z, counts[1].exp() / z];
        let dc = [p[0] - 1.0, p[1]];
        let want0 = dc[0] * (sg(0.2) + sg(0.2));
        let want1 = dc[1] * (sg(-0.6) + sg(-0.4) * 1.5);
        assert!((out.grads[0].data()[0] - want0).abs() < 1e-12);
        assert!((out.grads[0].data()[1] - want1).abs() < 1e-12);
    }

    #[test]
    fn tape_counts_match_plain_forward_in_hard_mode() {
        let net = NetworkSpec {
            layers: vec![
                LayerSpec::Conv2d {
                    in_channels: 1,
                    out_channels: 2,
                    kernel: (2, 2),
                    stride: 1,
                    affine: None,
                },
                LayerSpec::Lif { tau: 0.8, v_th: 1.0 },
                LayerSpec::MaxPool2d { window: 2 },
                LayerSpec::Dense { input: 2, output: 2, affine: None },
                LayerSpec::Lif { tau: 0.8, v_th: 1.0 },
            ],
            input_shape: vec![1, 3, 3],
            timesteps: 4,
            classes: 2,
        };
        let weights = net.init_weights(5).unwrap();
        let scaled: Vec<Tensor> = weights.iter().map(|w| w.map(|v| v * 4.0)).collect();
        let mut data = Vec::new();
        for t in 0..4 {
            for i in 0..9 {
                data.push(((t + i) % 2) as u8);
            }
        }
        let input = SpikeTrain::new(vec![4, 1, 3, 3], data).unwrap();
        let (counts, _) = crate::snn::forward(&net, &scaled, &input).unwrap();
        let tape = tape_counts(&net, &scaled, &input, &BpttConfig::default()).unwrap();
        assert_eq!(counts, tape);
    }

    #[test]
    fn label_out_of_range_rejected() {
        let net = two_neuron_net();
        let w = vec![Tensor::zeros(vec![2, 1])];
        let input = SpikeTrain::zeros(vec![2, 1]).unwrap();
        assert!(bptt_grad(&net, &w, &[(input, 5)], &BpttConfig::default()).is_err());
    }
}
