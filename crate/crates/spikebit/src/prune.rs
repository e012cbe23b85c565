//! Global unstructured magnitude pruning with a frozen keep-mask.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Binary keep-masks (1 = keep) for a list of weight tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneMask {
    pub masks: Vec<Tensor>,
    pub omega: f64,
}

impl PruneMask {
    /// Total number of masked (pruned) positions.
    pub fn pruned_count(&self) -> usize {
        self.masks.iter().map(|m| m.zero_count()).sum()
    }

    pub fn total_count(&self) -> usize {
        self.masks.iter().map(|m| m.len()).sum()
    }

    /// Zeroes masked positions of `weights` in place.
    pub fn apply_in_place(&self, weights: &mut [Tensor]) -> Result<()> {
        if weights.len() != self.masks.len() {
            return Err(Error::InvalidArgument(format!(
                "mask covers {} tensors, got {}",
                self.masks.len(),
                weights.len()
            )));
        }
        for (w, m) in weights.iter_mut().zip(self.masks.iter()) {
            *w = apply_mask(w, m)?;
        }
        Ok(())
    }

    /// True when every masked position of `weights` is exactly zero.
    pub fn holds_on(&self, weights: &[Tensor]) -> bool {
        weights.len() == self.masks.len()
            && weights.iter().zip(self.masks.iter()).all(|(w, m)| {
                w.data()
                    .iter()
                    .zip(m.data().iter())
                    .all(|(&wv, &mv)| mv == 1.0 || wv == 0.0)
            })
    }
}

/// Ranks all weights by magnitude and masks exactly `floor(omega * N)` of the
/// smallest, breaking ties by ascending (layer index, flat index).
pub fn global_prune_mask(all_weights: &[Tensor], omega: f64) -> Result<PruneMask> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::InvalidArgument(format!(
            "sparsity target {omega} outside [0, 1]"
        )));
    }
    for w in all_weights {
        w.check_finite("global_prune_mask")?;
    }
    let total: usize = all_weights.iter().map(|w| w.len()).sum();
    let k = (omega * total as f64).floor() as usize;

    let mut ranked: Vec<(f64, usize, usize)> = Vec::with_capacity(total);
    for (li, w) in all_weights.iter().enumerate() {
        for (fi, &v) in w.data().iter().enumerate() {
            ranked.push((v.abs(), li, fi));
        }
    }
    ranked.sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut masks: Vec<Tensor> = all_weights
        .iter()
        .map(|w| Tensor::new(w.shape().to_vec(), vec![1.0; w.len()]).unwrap())
        .collect();
    for &(_, li, fi) in ranked.iter().take(k) {
        masks[li].data_mut()[fi] = 0.0;
    }
    Ok(PruneMask { masks, omega })
}

/// Elementwise product; masked positions become exactly 0.
pub fn apply_mask(weights: &Tensor, mask: &Tensor) -> Result<Tensor> {
    weights.zip_map(mask, |w, m| if m == 0.0 { 0.0 } else { w * m })
}
