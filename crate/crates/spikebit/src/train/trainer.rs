//! Mini-batch SGD with momentum, warmup/cosine schedule and per-step hooks.
//!
//! Hooks are where compression schemes attach: they can substitute the
//! weights seen by forward/backward, rewrite gradients, and touch the
//! weights after each optimizer step. With no hook attached, training is
//! plain SGD with momentum, exactly.

use crate::error::{Error, Result};
use crate::snn::{forward, NetworkSpec};
use crate::tensor::Tensor;
use crate::train::bptt::{argmax, bptt_grad, BpttConfig};
use crate::train::data::Dataset;
use crate::train::schedule::{lr_at, TrainSchedule};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Per-step training hook. Default implementations are no-ops.
pub trait TrainHook {
    fn on_epoch_start(&mut self, _epoch: usize, _weights: &[Tensor]) -> Result<()> {
        Ok(())
    }

    /// Weights used by forward/backward this step (e.g. masked, quantized).
    fn effective_weights(&self, weights: &[Tensor]) -> Result<Vec<Tensor>> {
        Ok(weights.to_vec())
    }

    /// Rewrites gradients (w.r.t. effective weights) into gradients w.r.t.
    /// the raw weights; may also accumulate internal state (scale grads).
    fn transform_grads(&mut self, _weights: &[Tensor], _grads: &mut [Tensor]) -> Result<()> {
        Ok(())
    }

    /// Runs after the optimizer step (mask re-application, scale updates).
    fn after_step(&mut self, _weights: &mut [Tensor], _lr: f64) -> Result<()> {
        Ok(())
    }
}

/// The do-nothing hook: train() with NoHook is plain SGD.
pub struct NoHook;

impl TrainHook for NoHook {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub weights: Vec<Tensor>,
    pub trace: Vec<TraceRow>,
}

/// Classification accuracy of `weights` over `dataset` (argmax of spike
/// counts; ties resolve to the lowest class index).
pub fn evaluate(net: &NetworkSpec, weights: &[Tensor], dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut correct = 0usize;
    for (train, label) in &dataset.samples {
        let (counts, _) = forward(net, weights, train)?;
        if argmax(counts.data()) == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Renders an accuracy trace as CSV (epoch, loss, accuracy, lr).
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("epoch,loss,accuracy,lr\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch, row.loss, row.accuracy, row.lr
        ));
    }
    out
}

/// Fine-tunes `init` on `dataset`. Deterministic given the schedule seed:
/// batch order, gradient reduction and all hook effects are fixed-order.
pub fn train(
    net: &NetworkSpec,
    init: &[Tensor],
    dataset: &Dataset,
    sched: &TrainSchedule,
    bptt_cfg: &BpttConfig,
    hook: &mut dyn TrainHook,
) -> Result<TrainOutput> {
    sched.validate()?;
    net.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut weights: Vec<Tensor> = init.to_vec();
    let mut velocity: Vec<Tensor> = init
        .iter()
        .map(|w| Tensor::zeros(w.shape().to_vec()))
        .collect();
    let n = dataset.len();
    let batches_per_epoch = n.div_ceil(sched.batch_size);
    let total_steps = sched.epochs * batches_per_epoch;
    let mut trace = Vec::with_capacity(sched.epochs);
    let mut step = 0usize;

    for epoch in 0..sched.epochs {
        hook.on_epoch_start(epoch, &weights)?;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(
            sched
                .seed
                .wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut last_lr = 0.0;
        for chunk in order.chunks(sched.batch_size) {
            let lr = lr_at(step, total_steps, sched)?;
            last_lr = lr;
            let batch: Vec<(crate::tensor::SpikeTrain, usize)> = chunk
                .iter()
                .map(|&i| dataset.samples[i].clone())
                .collect();
            let w_eff = hook.effective_weights(&weights)?;
            let out = match bptt_grad(net, &w_eff, &batch, bptt_cfg) {
                Ok(out) => out,
                Err(Error::NonFiniteLoss { .. }) => {
                    return Err(Error::Diverged { epoch, step, trace });
                }
                Err(e) => return Err(e),
            };
            let mut grads = out.grads;
            hook.transform_grads(&weights, &mut grads)?;
            for ((w, v), g) in weights.iter_mut().zip(velocity.iter_mut()).zip(grads.iter()) {
                let vd = v.data_mut();
                let wd = w.data_mut();
                for i in 0..vd.len() {
                    vd[i] = sched.momentum * vd[i] + g.data()[i];
                    wd[i] -= lr * vd[i];
                }
            }
            hook.after_step(&mut weights, lr)?;
            epoch_loss += out.loss;
            step += 1;
        }
        let w_eff = hook.effective_weights(&weights)?;
        let accuracy = evaluate(net, &w_eff, dataset)?;
        trace.push(TraceRow {
            epoch,
            loss: epoch_loss / batches_per_epoch as f64,
            accuracy,
            lr: last_lr,
        });
    }
    Ok(TrainOutput { weights, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::LayerSpec;
    use crate::train::data::rate_coded_two_class;

    fn toy_net(neurons: usize) -> NetworkSpec {
        NetworkSpec {
            layers: vec![
                LayerSpec::Dense { input: neurons, output: 2, affine: None },
                LayerSpec::Lif { tau: 0.9, v_th: 1.0 },
            ],
            input_shape: vec![neurons],
            timesteps: 6,
            classes: 2,
        }
    }

    fn sched(epochs: usize, peak_lr: f64) -> TrainSchedule {
        TrainSchedule {
            epochs,
            peak_lr,
            warmup_frac: 0.1,
            seed: 7,
            batch_size: 8,
            momentum: 0.9,
        }
    }

    #[test]
    fn zero_lr_leaves_weights_unchanged() {
        let net = toy_net(8);
        let ds = rate_coded_two_class(8, 6, 8, 0.8, 0.05, 1).unwrap();
        let init = net.init_weights(3).unwrap();
        let out = train(
            &net,
            &init,
            &ds,
            &sched(1, 0.0),
            &BpttConfig::default(),
            &mut NoHook,
        )
        .unwrap();
        assert_eq!(out.weights, init);
    }

    #[test]
    fn same_seed_bit_identical_weights_and_trace() {
        let net = toy_net(8);
        let ds = rate_coded_two_class(8, 6, 8, 0.8, 0.05, 1).unwrap();
        let init = net.init_weights(3).unwrap();
        let run = || {
            train(
                &net,
                &init,
                &ds,
                &sched(3, 0.05),
                &BpttConfig::default(),
                &mut NoHook,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn separable_task_reaches_95_percent() {
        let net = toy_net(10);
        let ds = rate_coded_two_class(20, 6, 10, 0.9, 0.02, 5).unwrap();
        let init = net.init_weights(2).unwrap();
        let out = train(
            &net,
            &init,
            &ds,
            &TrainSchedule {
                epochs: 50,
                peak_lr: 0.5,
                warmup_frac: 0.1,
                seed: 9,
                batch_size: 8,
                momentum: 0.9,
            },
            &BpttConfig::default(),
            &mut NoHook,
        )
        .unwrap();
        let best = out
            .trace
            .iter()
            .map(|r| r.accuracy)
            .fold(0.0f64, f64::max);
        assert!(best >= 0.95, "best accuracy {best}");
    }

    #[test]
    fn hooks_with_default_impls_are_transparent() {
        struct Passthrough;
        impl TrainHook for Passthrough {}
        let net = toy_net(8);
        let ds = rate_coded_two_class(8, 6, 8, 0.8, 0.05, 1).unwrap();
        let init = net.init_weights(3).unwrap();
        let run = |hook: &mut dyn TrainHook| {
            train(&net, &init, &ds, &sched(3, 0.05), &BpttConfig::default(), hook).unwrap()
        };
        let plain = run(&mut NoHook);
        let hooked = run(&mut Passthrough);
        assert_eq!(plain.weights, hooked.weights);
        assert_eq!(plain.trace, hooked.trace);
    }

    #[test]
    fn divergence_aborts_with_trace() {
        let net = toy_net(4);
        let ds = rate_coded_two_class(4, 6, 4, 0.9, 0.05, 1).unwrap();
        // membrane overflow on the first forward: weights near f64 max
        let init = vec![Tensor::new(vec![2, 4], vec![1e308; 8]).unwrap()];
        let err = train(
            &net,
            &init,
            &ds,
            &sched(2, 0.1),
            &BpttConfig::default(),
            &mut NoHook,
        )
        .unwrap_err();
        match err {
            Error::Diverged { epoch, step, trace } => {
                assert_eq!(epoch, 0);
                assert_eq!(step, 0);
                assert!(trace.is_empty());
            }
            other => panic!("expected Diverged, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_shape() {
        let rows = vec![TraceRow { epoch: 0, loss: 1.5, accuracy: 0.5, lr: 0.01 }];
        let csv = trace_to_csv(&rows);
        assert!(csv.starts_with("epoch,loss,accuracy,lr\n"));
        assert!(csv.contains("0,1.5,0.5,0.01"));
    }
}
