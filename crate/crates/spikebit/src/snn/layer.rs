//! Layer specs, network specs and the weighted-sum layer application.
//!
//! Inputs to dense/conv layers are binary spikes, so the "multiplication"
//! is a selection-sum of weights; no multiplier semantics are required.
//! Batch norm exists only as folded per-channel affine constants.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Folded inference-time batch norm: `y = scale[ch] * x + bias[ch]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAffine {
    pub scale: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        affine: Option<ChannelAffine>,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        affine: Option<ChannelAffine>,
    },
    MaxPool2d {
        window: usize,
    },
    Lif {
        /// Leak factor in [0, 1]; membrane decays by this factor each step.
        tau: f64,
        /// Spike threshold, strictly positive.
        v_th: f64,
    },
}

impl LayerSpec {
    pub fn is_parameterized(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    /// Shape of the weight tensor, if the layer has one.
    /// Dense: `[out, in]`; conv: `[M, C, R, S]`.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match self {
            LayerSpec::Dense { input, output, .. } => Some(vec![*output, *input]),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some(vec![*out_channels, *in_channels, kernel.0, kernel.1]),
            _ => None,
        }
    }

    /// Output shape given the input shape, validating consistency.
    pub fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        match self {
            LayerSpec::Dense { input, output, .. } => {
                let flat: usize = input_shape.iter().product();
                if flat != *input {
                    return Err(Error::InvalidLayer(format!(
                        "dense layer expects {input} inputs, got shape {input_shape:?}"
                    )));
                }
                Ok(vec![*output])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                affine,
            } => {
                if *stride == 0 {
                    return Err(Error::InvalidLayer("conv stride must be >= 1".into()));
                }
                if input_shape.len() != 3 || input_shape[0] != *in_channels {
                    return Err(Error::InvalidLayer(format!(
                        "conv2d expects [C={in_channels}, H, W] input, got {input_shape:?}"
                    )));
                }
                let (h, w) = (input_shape[1], input_shape[2]);
                let (r, s) = *kernel;
                if r == 0 || s == 0 || h < r || w < s {
                    return Err(Error::InvalidLayer(format!(
                        "kernel {kernel:?} does not fit input {h}x{w}"
                    )));
                }
                if let Some(a) = affine {
                    if a.scale.len() != *out_channels || a.bias.len() != *out_channels {
                        return Err(Error::InvalidLayer(
                            "affine constants must have one entry per output channel".into(),
                        ));
                    }
                }
                let p = (h - r) / stride + 1;
                let q = (w - s) / stride + 1;
                Ok(vec![*out_channels, p, q])
            }
            LayerSpec::MaxPool2d { window } => {
                if *window == 0 {
                    return Err(Error::InvalidLayer("pool window must be >= 1".into()));
                }
                if input_shape.len() != 3 {
                    return Err(Error::InvalidLayer(format!(
                        "maxpool2d expects [C, H, W] input, got {input_shape:?}"
                    )));
                }
                let (c, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
                if h % window != 0 || w % window != 0 {
                    return Err(Error::InvalidLayer(format!(
                        "pool window {window} does not divide input {h}x{w}"
                    )));
                }
                Ok(vec![c, h / window, w / window])
            }
            LayerSpec::Lif { tau, v_th } => {
                if !(0.0..=1.0).contains(tau) {
                    return Err(Error::InvalidLayer(format!("tau {tau} outside [0, 1]")));
                }
                if !v_th.is_finite() || *v_th <= 0.0 {
                    return Err(Error::InvalidLayer(format!("v_th {v_th} must be > 0")));
                }
                Ok(input_shape.to_vec())
            }
        }
    }
}

/// Ordered layer graph plus input shape, timestep count and class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub input_shape: Vec<usize>,
    pub timesteps: usize,
    pub classes: usize,
}

impl NetworkSpec {
    /// Per-layer output shapes; errors on any inconsistency.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut cur = self.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            cur = layer.output_shape(&cur)?;
            out.push(cur.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.timesteps == 0 {
            return Err(Error::InvalidNetwork("timesteps must be >= 1".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("no layers".into()));
        }
        let shapes = self.shapes()?;
        let last = shapes.last().unwrap();
        let flat: usize = last.iter().product();
        if flat != self.classes {
            return Err(Error::InvalidNetwork(format!(
                "final layer produces {flat} outputs, expected {} classes",
                self.classes
            )));
        }
        if !matches!(self.layers.last(), Some(LayerSpec::Lif { .. })) {
            return Err(Error::InvalidNetwork(
                "final layer must be lif (spike-count classification)".into(),
            ));
        }
        Ok(())
    }

    /// Weight shapes for the parameterized layers, in layer order.
    pub fn weight_shapes(&self) -> Vec<Vec<usize>> {
        self.layers.iter().filter_map(|l| l.weight_shape()).collect()
    }

    /// Deterministic fan-in-scaled normal initialization. The 3x gain keeps
    /// unit-threshold LIF layers spiking on binary inputs at init.
    pub fn init_weights(&self, seed: u64) -> Result<Vec<Tensor>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for layer in &self.layers {
            let Some(shape) = layer.weight_shape() else {
                continue;
            };
            let fan_in: usize = shape[1..].iter().product();
            let std = 3.0 * (1.0 / fan_in.max(1) as f64).sqrt();
            let normal = Normal::new(0.0, std)
                .map_err(|e| Error::InvalidArgument(format!("weight init: {e}")))?;
            let len: usize = shape.iter().product();
            let data: Vec<f64> = (0..len).map(|_| normal.sample(&mut rng)).collect();
            out.push(Tensor::new(shape, data)?);
        }
        Ok(out)
    }
}

/// Weighted-sum pre-activation for dense/conv layers and window max for pools.
///
/// `weights` must be `Some` exactly for parameterized layers. LIF layers are
/// stepped with [`crate::snn::lif_step`], not applied here.
pub fn layer_apply(layer: &LayerSpec, weights: Option<&Tensor>, input: &Tensor) -> Result<Tensor> {
    match layer {
        LayerSpec::Dense { .. } => {
            let w = weights.ok_or(Error::InvalidLayer("dense layer needs weights".into()))?;
            dense_apply(layer, w, input)
        }
        LayerSpec::Conv2d { .. } => {
            let w = weights.ok_or(Error::InvalidLayer("conv layer needs weights".into()))?;
            conv_apply(layer, w, input)
        }
        LayerSpec::MaxPool2d { window } => maxpool_apply(*window, input).map(|(t, _)| t),
        LayerSpec::Lif { .. } => Err(Error::InvalidLayer(
            "lif layers are stepped, not applied".into(),
        )),
    }
}

fn dense_apply(layer: &LayerSpec, w: &Tensor, input: &Tensor) -> Result<Tensor> {
    let LayerSpec::Dense { input: n_in, output: n_out, affine } = layer else {
        unreachable!()
    };
    if input.len() != *n_in {
        return Err(Error::ShapeMismatch {
            context: "dense_apply input",
            lhs: input.shape().to_vec(),
            rhs: vec![*n_in],
        });
    }
    if w.shape() != [*n_out, *n_in] {
        return Err(Error::ShapeMismatch {
            context: "dense_apply weights",
            lhs: w.shape().to_vec(),
            rhs: vec![*n_out, *n_in],
        });
    }
    let x = input.data();
    let wd = w.data();
    let mut out = vec![0.0; *n_out];
    for (o, item) in out.iter_mut().enumerate() {
        let row = &wd[o * n_in..(o + 1) * n_in];
        let mut acc = 0.0;
        for i in 0..*n_in {
            acc += row[i] * x[i];
        }
        *item = acc;
    }
    if let Some(a) = affine {
        for (o, item) in out.iter_mut().enumerate() {
            *item = a.scale[o] * *item + a.bias[o];
        }
    }
    Tensor::new(vec![*n_out], out)
}

fn conv_apply(layer: &LayerSpec, w: &Tensor, input: &Tensor) -> Result<Tensor> {
    let LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, affine } = layer else {
        unreachable!()
    };
    let out_shape = layer.output_shape(input.shape())?;
    let (c, m) = (*in_channels, *out_channels);
    let (r, s) = *kernel;
    let (p, q) = (out_shape[1], out_shape[2]);
    let (h, wid) = (input.shape()[1], input.shape()[2]);
    if w.shape() != [m, c, r, s] {
        return Err(Error::ShapeMismatch {
            context: "conv_apply weights",
            lhs: w.shape().to_vec(),
            rhs: vec![m, c, r, s],
        });
    }
    let x = input.data();
    let wd = w.data();
    let mut out = vec![0.0; m * p * q];
    for om in 0..m {
        for op in 0..p {
            for oq in 0..q {
                let mut acc = 0.0;
                for ic in 0..c {
                    for kr in 0..r {
                        let iy = op * stride + kr;
                        for ks in 0..s {
                            let ix = oq * stride + ks;
                            acc += wd[((om * c + ic) * r + kr) * s + ks]
                                * x[(ic * h + iy) * wid + ix];
                        }
                    }
                }
                out[(om * p + op) * q + oq] = acc;
            }
        }
    }
    if let Some(a) = affine {
        for om in 0..m {
            for i in 0..p * q {
                let idx = om * p * q + i;
                out[idx] = a.scale[om] * out[idx] + a.bias[om];
            }
        }
    }
    Tensor::new(vec![m, p, q], out)
}

/// Window max with stride equal to the window (non-overlapping).
/// Also returns the flat source index of each output's maximum, first-in-scan
/// order on ties, for gradient routing.
pub fn maxpool_apply(window: usize, input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let spec = LayerSpec::MaxPool2d { window };
    let out_shape = spec.output_shape(input.shape())?;
    let (c, ph, pw) = (out_shape[0], out_shape[1], out_shape[2]);
    let (h, w) = (input.shape()[1], input.shape()[2]);
    let x = input.data();
    let mut out = vec![0.0; c * ph * pw];
    let mut argmax = vec![0usize; c * ph * pw];
    for ic in 0..c {
        for oy in 0..ph {
            for ox in 0..pw {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for ky in 0..window {
                    for kx in 0..window {
                        let idx = (ic * h + oy * window + ky) * w + ox * window + kx;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (ic * ph + oy) * pw + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    Ok((Tensor::new(out_shape, out)?, argmax))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(input: usize, output: usize) -> LayerSpec {
        LayerSpec::Dense {
            input,
            output,
            affine: None,
        }
    }

    #[test]
    fn dense_selection_sum_with_binary_input() {
        let layer = dense(2, 2);
        let w = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = Tensor::new(vec![2], vec![1.0, 0.0]).unwrap();
        let y = layer_apply(&layer, Some(&w), &x).unwrap();
        assert_eq!(y.data(), &[1.0, 3.0]);
    }

    #[test]
    fn conv_identity_shaped_kernel() {
        let layer = LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 1,
            kernel: (1, 1),
            stride: 1,
            affine: None,
        };
        let w = Tensor::new(vec![1, 1, 1, 1], vec![2.0]).unwrap();
        let x = Tensor::new(vec![1, 2, 2], vec![1.0; 4]).unwrap();
        let y = layer_apply(&layer, Some(&w), &x).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert_eq!(y.data(), &[2.0; 4]);
    }

    #[test]
    fn maxpool_window_max() {
        let x = Tensor::new(vec![1, 2, 2], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let y = layer_apply(&LayerSpec::MaxPool2d { window: 2 }, None, &x).unwrap();
        assert_eq!(y.data(), &[1.0]);
    }

    #[test]
    fn maxpool_tie_routes_to_first_in_scan_order() {
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let (_, argmax) = maxpool_apply(2, &x).unwrap();
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn conv_rejects_inconsistent_shapes() {
        let layer = LayerSpec::Conv2d {
            in_channels: 2,
            out_channels: 1,
            kernel: (3, 3),
            stride: 1,
            affine: None,
        };
        let x = Tensor::new(vec![1, 4, 4], vec![0.0; 16]).unwrap();
        assert!(layer.output_shape(x.shape()).is_err());
        let too_small = Tensor::new(vec![2, 2, 2], vec![0.0; 8]).unwrap();
        assert!(layer.output_shape(too_small.shape()).is_err());
    }

    #[test]
    fn conv_affine_applies_per_channel() {
        let layer = LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 1,
            kernel: (1, 1),
            stride: 1,
            affine: Some(ChannelAffine {
                scale: vec![2.0],
                bias: vec![0.5],
            }),
        };
        let w = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let x = Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap();
        let y = layer_apply(&layer, Some(&w), &x).unwrap();
        assert_eq!(y.data(), &[2.5]);
    }

    #[test]
    fn network_shape_chain_and_class_check() {
        let net = NetworkSpec {
            layers: vec![
                LayerSpec::Conv2d {
                    in_channels: 2,
                    out_channels: 3,
                    kernel: (3, 3),
                    stride: 1,
                    affine: None,
                },
                LayerSpec::Lif { tau: 0.9, v_th: 1.0 },
                LayerSpec::MaxPool2d { window: 2 },
                dense(3 * 2 * 2, 4),
                LayerSpec::Lif { tau: 0.9, v_th: 1.0 },
            ],
            input_shape: vec![2, 6, 6],
            timesteps: 4,
            classes: 4,
        };
        net.validate().unwrap();
        let shapes = net.shapes().unwrap();
        assert_eq!(shapes[0], vec![3, 4, 4]);
        assert_eq!(shapes[2], vec![3, 2, 2]);
        assert_eq!(shapes[4], vec![4]);
    }

    #[test]
    fn bad_tau_rejected() {
        let l = LayerSpec::Lif { tau: 1.5, v_th: 1.0 };
        assert!(l.output_shape(&[2]).is_err());
    }
}
