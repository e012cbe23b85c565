//! Leaky integrate-and-fire step: leak, integrate, threshold, hard reset.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Membrane tensors for the LIF layers of a network, in layer order.
#[derive(Debug, Clone)]
pub struct LifState {
    pub membranes: Vec<Tensor>,
}

impl LifState {
    /// Zero-initialized state for every LIF layer of `shapes` (the per-layer
    /// output shapes of the network; non-LIF entries are skipped by caller).
    pub fn zeros(shapes: &[Vec<usize>]) -> Self {
        LifState {
            membranes: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
        }
    }
}

/// One membrane update: `u_cand = tau * u_prev + input`; spikes where
/// `u_cand >= v_th` (ties fire), with a hard reset to 0 on spiking elements.
///
/// Returns `(u_next, spikes)`; spikes are a 0.0/1.0 tensor.
pub fn lif_step(
    u_prev: &Tensor,
    weighted_input: &Tensor,
    tau: f64,
    v_th: f64,
) -> Result<(Tensor, Tensor)> {
    if u_prev.shape() != weighted_input.shape() {
        return Err(Error::ShapeMismatch {
            context: "lif_step",
            lhs: u_prev.shape().to_vec(),
            rhs: weighted_input.shape().to_vec(),
        });
    }
    if !v_th.is_finite() || v_th <= 0.0 {
        return Err(Error::InvalidArgument(format!("v_th {v_th} must be > 0")));
    }
    u_prev.check_finite("lif_step u_prev")?;
    weighted_input.check_finite("lif_step input")?;

    let n = u_prev.len();
    let mut u_next = vec![0.0; n];
    let mut spikes = vec![0.0; n];
    let up = u_prev.data();
    let inp = weighted_input.data();
    for i in 0..n {
        let cand = tau * up[i] + inp[i];
        if cand >= v_th {
            spikes[i] = 1.0;
            // u_next stays 0 (resting potential)
        } else {
            u_next[i] = cand;
        }
    }
    Ok((
        Tensor::new(u_prev.shape().to_vec(), u_next)?,
        Tensor::new(u_prev.shape().to_vec(), spikes)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn subthreshold_integrates_with_leak() {
        let (u, s) = lif_step(&scalar(0.5), &scalar(0.4), 0.9, 1.0).unwrap();
        assert!((u.data()[0] - 0.85).abs() < 1e-15);
        assert_eq!(s.data()[0], 0.0);
    }

    #[test]
    fn crossing_spikes_and_resets() {
        let (u, s) = lif_step(&scalar(1.0), &scalar(0.6), 0.5, 1.0).unwrap();
        assert_eq!(u.data()[0], 0.0);
        assert_eq!(s.data()[0], 1.0);
    }

    #[test]
    fn no_leak_identity() {
        let (u, s) = lif_step(&scalar(0.3), &scalar(0.0), 1.0, 1.0).unwrap();
        assert_eq!(u.data()[0], 0.3);
        assert_eq!(s.data()[0], 0.0);
    }

    #[test]
    fn exact_threshold_fires() {
        let (u, s) = lif_step(&scalar(0.0), &scalar(1.0), 0.9, 1.0).unwrap();
        assert_eq!(s.data()[0], 1.0);
        assert_eq!(u.data()[0], 0.0);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let a = Tensor::zeros(vec![2]);
        let b = Tensor::zeros(vec![3]);
        assert!(lif_step(&a, &b, 0.9, 1.0).is_err());
    }

    #[test]
    fn reset_correctness_exact() {
        // spiked => u_next == 0; not spiked => u_next == tau*u_prev + input exactly
        let u = Tensor::new(vec![4], vec![0.2, 0.9, -0.3, 0.5]).unwrap();
        let x = Tensor::new(vec![4], vec![0.1, 0.5, 0.0, 0.6]).unwrap();
        let (un, s) = lif_step(&u, &x, 0.7, 1.0).unwrap();
        for i in 0..4 {
            if s.data()[i] == 1.0 {
                assert_eq!(un.data()[i], 0.0);
            } else {
                assert_eq!(un.data()[i], 0.7 * u.data()[i] + x.data()[i]);
            }
        }
    }
}
