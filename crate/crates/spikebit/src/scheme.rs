//! Compression scheme schedulers: prune-only, quantize-only, cumulative and
//! joint, expressed as training hooks.
//!
//! The prune mask is computed once at fine-tuning start and frozen; the
//! optimizer can zero more weights but never regrow a masked connection.
//! Under the joint scheme the forward weights are `quantize(mask * w)` —
//! pruned first, then quantized. The cumulative scheme prunes from epoch 0
//! and switches quantization on at epoch `ceil(epochs / 2)`, initializing
//! the learnable scales from the weights at that point.

use crate::error::{Error, Result};
use crate::prune::{apply_mask, global_prune_mask, PruneMask};
use crate::quant::{init_scales, qat_backward, quantize, Precision, QuantConfig};
use crate::tensor::Tensor;
use crate::train::TrainHook;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    QuantOnly,
    PruneOnly,
    Cumulative,
    Joint,
}

impl SchemeKind {
    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::QuantOnly => "quant_only",
            SchemeKind::PruneOnly => "prune_only",
            SchemeKind::Cumulative => "cumulative",
            SchemeKind::Joint => "joint",
        }
    }
}

/// Quantizer settings shared by all layers of a scheme (scales stay
/// per-layer and learnable).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantSettings {
    pub precision: Precision,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Global sparsity target; used by the pruning schemes.
    pub omega: f64,
    pub quant: Option<QuantSettings>,
    /// Total fine-tuning epochs (sets the cumulative switch point).
    pub epochs: usize,
    /// Optional fixed initial quantizer step per parameterized layer,
    /// replacing the statistics-based initialization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_overrides: Option<Vec<f64>>,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        let needs_quant = matches!(self.kind, SchemeKind::QuantOnly);
        let needs_omega = matches!(
            self.kind,
            SchemeKind::PruneOnly | SchemeKind::Cumulative | SchemeKind::Joint
        );
        if needs_quant && self.quant.is_none() {
            return Err(Error::Config(format!(
                "scheme {} needs quantizer settings",
                self.kind.label()
            )));
        }
        if needs_omega && !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::Config(format!(
                "scheme {} needs a sparsity target in [0, 1]",
                self.kind.label()
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("scheme epochs must be >= 1".into()));
        }
        Ok(())
    }

    /// Epoch at which quantization-aware training begins.
    pub fn quant_start_epoch(&self) -> usize {
        match self.kind {
            SchemeKind::Cumulative => self.epochs.div_ceil(2),
            _ => 0,
        }
    }

    fn prunes(&self) -> bool {
        matches!(
            self.kind,
            SchemeKind::PruneOnly | SchemeKind::Cumulative | SchemeKind::Joint
        )
    }
}

struct LayerQuant {
    cfg: QuantConfig,
    vel_s_in: f64,
    vel_s_out: f64,
    pending_grad_s_in: f64,
    pending_grad_s_out: f64,
}

/// The training hook implementing all four schemes.
pub struct SchemeHook {
    config: SchemeConfig,
    mask: Option<PruneMask>,
    quant: Option<Vec<LayerQuant>>,
    quant_active: bool,
    momentum: f64,
}

/// Builds the per-step hook for a scheme.
pub fn scheme_hooks(config: &SchemeConfig) -> Result<SchemeHook> {
    config.validate()?;
    Ok(SchemeHook {
        config: config.clone(),
        mask: None,
        quant: None,
        quant_active: false,
        momentum: 0.9,
    })
}

impl SchemeHook {
    pub fn mask(&self) -> Option<&PruneMask> {
        self.mask.as_ref()
    }

    /// Learned per-layer quantizer configs (available once active).
    pub fn quant_configs(&self) -> Option<Vec<QuantConfig>> {
        self.quant
            .as_ref()
            .map(|qs| qs.iter().map(|q| q.cfg.clone()).collect())
    }

    pub fn quant_active(&self) -> bool {
        self.quant_active
    }

    fn masked(&self, weights: &[Tensor]) -> Result<Vec<Tensor>> {
        match &self.mask {
            Some(mask) => weights
                .iter()
                .zip(mask.masks.iter())
                .map(|(w, m)| apply_mask(w, m))
                .collect(),
            None => Ok(weights.to_vec()),
        }
    }

    fn init_quant(&mut self, weights: &[Tensor]) -> Result<()> {
        let settings = self.config.quant.expect("quant settings");
        if let Some(overrides) = &self.config.scale_overrides {
            if overrides.len() != weights.len() {
                return Err(Error::Config(format!(
                    "{} scale overrides for {} weight tensors",
                    overrides.len(),
                    weights.len()
                )));
            }
        }
        let masked = self.masked(weights)?;
        let mut layers = Vec::with_capacity(masked.len());
        for (li, w) in masked.iter().enumerate() {
            // init_scales gives the representable range (mean + 3 std); the
            // rounding step maps that range onto the code range, so ternary
            // keeps the full scale and b bits divide it by 2^{b-1}. An
            // explicit override is used verbatim as the step.
            let s = match &self.config.scale_overrides {
                Some(overrides) => overrides[li],
                None => {
                    let range = init_scales(w)?;
                    let qmax = match settings.precision {
                        Precision::Ternary => 1.0,
                        Precision::Bits(b) => (1u64 << (b - 1)) as f64,
                    };
                    range / qmax
                }
            };
            layers.push(LayerQuant {
                cfg: QuantConfig::new(settings.precision, s, s, settings.delta)?,
                vel_s_in: 0.0,
                vel_s_out: 0.0,
                pending_grad_s_in: 0.0,
                pending_grad_s_out: 0.0,
            });
        }
        self.quant = Some(layers);
        self.quant_active = true;
        Ok(())
    }
}

impl TrainHook for SchemeHook {
    fn on_epoch_start(&mut self, epoch: usize, weights: &[Tensor]) -> Result<()> {
        if epoch == 0 && self.config.prunes() {
            self.mask = Some(global_prune_mask(weights, self.config.omega)?);
        }
        if !self.quant_active
            && self.config.quant.is_some()
            && epoch >= self.config.quant_start_epoch()
        {
            self.init_quant(weights)?;
        }
        Ok(())
    }

    fn effective_weights(&self, weights: &[Tensor]) -> Result<Vec<Tensor>> {
        let masked = self.masked(weights)?;
        if !self.quant_active {
            return Ok(masked);
        }
        let quant = self.quant.as_ref().unwrap();
        masked
            .iter()
            .zip(quant.iter())
            .map(|(w, q)| quantize(w, &q.cfg))
            .collect()
    }

    fn transform_grads(&mut self, weights: &[Tensor], grads: &mut [Tensor]) -> Result<()> {
        if self.quant_active {
            let masked = self.masked(weights)?;
            let quant = self.quant.as_mut().unwrap();
            for ((g, w), q) in grads.iter_mut().zip(masked.iter()).zip(quant.iter_mut()) {
                let back = qat_backward(g, w, &q.cfg)?;
                // scale grads are sums over codes up to +-qmax; normalize per
                // element and code range so they share the weight lr
                let (_, hi) = q.cfg.code_range();
                let norm = 1.0 / (w.len().max(1) as f64 * hi.max(1) as f64);
                q.pending_grad_s_in += back.grad_s_in * norm;
                q.pending_grad_s_out += back.grad_s_out * norm;
                *g = back.grad_x;
            }
        }
        if let Some(mask) = &self.mask {
            for (g, m) in grads.iter_mut().zip(mask.masks.iter()) {
                *g = apply_mask(g, m)?;
            }
        }
        Ok(())
    }

    fn after_step(&mut self, weights: &mut [Tensor], lr: f64) -> Result<()> {
        if let Some(quant) = self.quant.as_mut() {
            for q in quant.iter_mut() {
                q.vel_s_in = self.momentum * q.vel_s_in + q.pending_grad_s_in;
                q.vel_s_out = self.momentum * q.vel_s_out + q.pending_grad_s_out;
                // cap each step at a 5% relative move: scales adapt smoothly
                // and can never collapse or explode in one step
                let step = |s: f64, vel: f64| {
                    let delta = (lr * vel).clamp(-0.05 * s, 0.05 * s);
                    (s - delta).max(1e-12)
                };
                q.cfg.s_in = step(q.cfg.s_in, q.vel_s_in);
                q.cfg.s_out = step(q.cfg.s_out, q.vel_s_out);
                q.pending_grad_s_in = 0.0;
                q.pending_grad_s_out = 0.0;
            }
        }
        if let Some(mask) = &self.mask {
            mask.apply_in_place(weights)?;
        }
        Ok(())
    }
}
